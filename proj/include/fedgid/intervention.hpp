#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedgid/datagen.hpp"
#include "fedgid/model.hpp"
#include "fedgid/tensor.hpp"

namespace fedgid {

enum class ExtractorMode { kOracleMask, kBboxFile };

// Where the mixing of Eq.-style f_INV happens: at the 64-dim feature vector
// or at the post-conv (pre-pool) feature map.
enum class GiLevel { kFeature, kFeatureMap };

// Supplies the object box used to cut the background out of an image.
// kOracleMask uses the box stored on the image itself; kBboxFile reads a
// text table ("<id> <x1> <y1> <x2> <y2>" per line), the slot where a real
// detector's output would be ingested.
struct BackgroundExtractor {
  ExtractorMode mode = ExtractorMode::kOracleMask;
  std::unordered_map<std::uint64_t, Bbox> bbox_table;  // kBboxFile only

  static BackgroundExtractor oracle();
  static BackgroundExtractor from_bbox_file(const std::string& path);

  // Resolves the box for one image; image_id is only consulted in kBboxFile
  // mode (missing ids are an error).
  Bbox box_for(const LabeledImage& img, std::uint64_t image_id) const;
};

struct InterventionConfig {
  bool enabled = false;
  double alpha = 0.7;  // weight of the original feature in the mix
  GiLevel level = GiLevel::kFeatureMap;
};

// Keeps pixels outside the (inclusive) box, zeroes everything inside.
// Returns H x W x 3.
Tensor extract_background(const LabeledImage& img, const Bbox& box);
Tensor extract_background(const LabeledImage& img,
                          const BackgroundExtractor& extractor,
                          std::uint64_t image_id);

// Uniform random permutation of [0, n); self-pairing is allowed. This is the
// exact pairing used by sample_backgrounds for the same seed.
std::vector<std::size_t> background_permutation(std::size_t n,
                                                std::uint64_t seed);

// Pairs each image with the background of a uniformly permuted batch mate
// and stacks the extracted backgrounds into [B, H, W, 3]. Batch size must be
// at least 2. Boxes come from the images themselves (oracle mode).
Tensor sample_backgrounds(const std::vector<const LabeledImage*>& batch,
                          std::uint64_t seed);

// f_inv = alpha * f_i + (1 - alpha) * f_b, elementwise. Shapes must match;
// alpha must lie in [0,1].
Tensor mix_features(const Tensor& f_i, const Tensor& f_b, double alpha);

// Mean cross-entropy of the classifier head applied to mixed features
// ([B, feature_dim]). When dfeature/grads are given, also backpropagates:
// dfeature receives the loss gradient w.r.t. f_inv and grads accumulates the
// classifier-weight gradients.
double intervention_loss(const ModelParams& params, const Tensor& f_inv,
                         const std::vector<int>& labels,
                         Tensor* dfeature = nullptr,
                         ModelParams* grads = nullptr);

}  // namespace fedgid
