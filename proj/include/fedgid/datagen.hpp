#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedgid/tensor.hpp"

namespace fedgid {

enum class Split { kTrain, kOodTest };

struct Bbox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool operator==(const Bbox&) const = default;
  int width() const { return x2 - x1 + 1; }
  int height() const { return y2 - y1 + 1; }
};

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
  bool operator==(const Rgb&) const = default;
};

// Colorized digit sample. Background pixels (object_mask false) are exactly
// the palette color; object pixels carry a dark color-neutral ink value.
struct LabeledImage {
  Tensor pixels;                  // H x W x 3, values in [0,1]
  int label = 0;                  // class in [0, C)
  std::vector<std::uint8_t> object_mask;  // H*W, 1 = object pixel
  Bbox bbox;                      // tight box around the mask
  int background_color_id = 0;   // palette index

  int height() const { return static_cast<int>(pixels.dim(0)); }
  int width() const { return static_cast<int>(pixels.dim(1)); }
  bool mask_at(int y, int x) const {
    return object_mask[static_cast<std::size_t>(y) * pixels.dim(1) + x] != 0;
  }
};

struct DatasetSpec {
  int num_classes = 10;
  int height = 14;
  int width = 14;
  std::vector<Rgb> palette;       // size >= num_classes
  double correlation_strength = 0.9;  // P(background color == class color), train only
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<LabeledImage> images;

  std::size_t size() const { return images.size(); }
};

// Grayscale digit template used as the base corpus entry.
struct Glyph {
  int label = 0;
  int height = 0;
  int width = 0;
  std::vector<double> intensity;  // row-major, values in [0,1]
};

// The bundled 8x8 synthetic digit corpus (one glyph per class, two stroke
// intensities plus faint sub-threshold pixels).
std::vector<Glyph> builtin_glyph_corpus();

// Ten visually distinct background colors; n <= 10.
std::vector<Rgb> default_palette(int n);

// Renders `count` images: class cycles i % num_classes, glyph placement and
// intensity jitter are drawn from the spec seed. Train split couples the
// background color to the label at correlation_strength; the OOD split draws
// it uniformly from the palette.
Dataset generate_dataset(const DatasetSpec& spec,
                         const std::vector<Glyph>& base_digits,
                         std::size_t count);

// Fraction of images whose background color id equals the label.
double measure_background_label_correlation(const Dataset& ds);

struct ClientPartition {
  std::vector<std::vector<std::size_t>> assignments;  // client -> sorted indices
  double beta = 0.1;
  int num_clients = 0;
  std::uint64_t seed = 0;
};

// Per class, client proportions ~ Dirichlet(beta,...,beta); indices of that
// class are allotted by those proportions. Draws that leave a client empty
// are resampled with an incremented sub-seed (max 100 attempts).
ClientPartition dirichlet_partition(const std::vector<int>& labels,
                                    int num_clients, double beta,
                                    std::uint64_t seed);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

void save_partition(const std::string& path, const ClientPartition& part);
ClientPartition load_partition(const std::string& path);

}  // namespace fedgid
