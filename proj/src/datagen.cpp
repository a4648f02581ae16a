#include "fedgid/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedgid/container.hpp"
#include "fedgid/rng.hpp"

namespace fedgid {

namespace {

// 8x8 digit templates. '#' = 1.0, '+' = 0.55 (both above the binarization
// threshold), '~' = 0.2 (below it, vanishes into the background).
const char* const kGlyphArt[10][8] = {
    {
        "..####..",
        ".##..##.",
        ".#+..+#.",
        ".#....#.",
        ".#....#.",
        ".#+..+#.",
        ".##..##.",
        "..####..",
    },
    {
        "...##...",
        "..###...",
        ".~.##...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        "..####..",
    },
    {
        "..####..",
        ".#+..##.",
        ".~...##.",
        "....##..",
        "...##...",
        "..##.~..",
        ".##.....",
        ".######.",
    },
    {
        "..####..",
        ".#+..##.",
        ".....##.",
        "...###..",
        ".....##.",
        ".....##.",
        ".#+..##.",
        "..####..",
    },
    {
        "....##..",
        "...###..",
        "..#.##..",
        ".#..##..",
        ".######.",
        "....##..",
        "....##..",
        "....##..",
    },
    {
        ".######.",
        ".##.....",
        ".##.~...",
        ".#####..",
        ".....##.",
        ".....##.",
        ".#+..##.",
        "..####..",
    },
    {
        "..####..",
        ".##..+..",
        ".##.....",
        ".#####..",
        ".##..##.",
        ".##..##.",
        ".##..##.",
        "..####..",
    },
    {
        ".######.",
        ".....##.",
        "....##..",
        "....##..",
        "...##...",
        "...##...",
        "..##....",
        "..##....",
    },
    {
        "..####..",
        ".##..##.",
        ".##..##.",
        "..####..",
        ".##..##.",
        ".##..##.",
        ".##..##.",
        "..####..",
    },
    {
        "..####..",
        ".##..##.",
        ".##..##.",
        ".##..##.",
        "..#####.",
        ".~...##.",
        ".....##.",
        "..####..",
    },
};

double glyph_char_value(char c) {
  switch (c) {
    case '#': return 1.0;
    case '+': return 0.55;
    case '~': return 0.2;
    default: return 0.0;
  }
}

constexpr double kMaskThresholdFraction = 0.3;
constexpr std::uint64_t kTrainStreamTag = 0x7261696eULL;  // "rain"
constexpr std::uint64_t kOodStreamTag = 0x6f6f6474ULL;    // "oodt"

std::string split_name(Split s) {
  return s == Split::kTrain ? "train" : "ood_test";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "ood_test") return Split::kOodTest;
  throw std::runtime_error("unknown split name: " + s);
}

}  // namespace

std::vector<Glyph> builtin_glyph_corpus() {
  std::vector<Glyph> corpus;
  corpus.reserve(10);
  for (int label = 0; label < 10; ++label) {
    Glyph g;
    g.label = label;
    g.height = 8;
    g.width = 8;
    g.intensity.resize(64);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        g.intensity[y * 8 + x] = glyph_char_value(kGlyphArt[label][y][x]);
      }
    }
    corpus.push_back(std::move(g));
  }
  return corpus;
}

std::vector<Rgb> default_palette(int n) {
  static const Rgb kColors[10] = {
      {0.90, 0.10, 0.10},  // red
      {0.10, 0.80, 0.15},  // green
      {0.15, 0.25, 0.95},  // blue
      {0.95, 0.85, 0.10},  // yellow
      {0.85, 0.15, 0.85},  // magenta
      {0.10, 0.85, 0.85},  // cyan
      {0.95, 0.55, 0.10},  // orange
      {0.50, 0.15, 0.75},  // purple
      {0.60, 0.40, 0.20},  // brown
      {0.55, 0.55, 0.55},  // gray
  };
  if (n < 1 || n > 10) {
    throw std::invalid_argument("default_palette: n must be in [1,10]");
  }
  return std::vector<Rgb>(kColors, kColors + n);
}

Dataset generate_dataset(const DatasetSpec& spec,
                         const std::vector<Glyph>& base_digits,
                         std::size_t count) {
  if (base_digits.empty()) {
    throw std::invalid_argument("generate_dataset: base corpus is empty");
  }
  if (static_cast<int>(spec.palette.size()) < spec.num_classes) {
    throw std::invalid_argument(
        "generate_dataset: palette smaller than num_classes");
  }
  if (spec.correlation_strength < 0.0 || spec.correlation_strength > 1.0) {
    throw std::invalid_argument(
        "generate_dataset: correlation_strength outside [0,1]");
  }
  if (spec.num_classes < 1) {
    throw std::invalid_argument("generate_dataset: num_classes must be >= 1");
  }

  std::vector<std::vector<std::size_t>> by_class(spec.num_classes);
  for (std::size_t i = 0; i < base_digits.size(); ++i) {
    const Glyph& g = base_digits[i];
    if (g.label < 0 || g.label >= spec.num_classes) {
      throw std::invalid_argument("generate_dataset: corpus label outside [0,C)");
    }
    if (g.height > spec.height || g.width > spec.width) {
      throw std::invalid_argument("generate_dataset: glyph larger than image");
    }
    by_class[static_cast<std::size_t>(g.label)].push_back(i);
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw std::invalid_argument("generate_dataset: corpus has no glyph for class " +
                                  std::to_string(c));
    }
  }

  const std::size_t palette_size = spec.palette.size();
  Rng rng(derive_seed(spec.seed, spec.split == Split::kTrain ? kTrainStreamTag
                                                             : kOodStreamTag));

  Dataset ds;
  ds.spec = spec;
  ds.images.reserve(count);

  const int img_h = spec.height;
  const int img_w = spec.width;

  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
    const auto& pool = by_class[static_cast<std::size_t>(label)];
    const Glyph& glyph = base_digits[pool[rng.below(pool.size())]];

    int bg_id;
    if (spec.split == Split::kOodTest) {
      bg_id = static_cast<int>(rng.below(palette_size));
    } else if (rng.uniform() < spec.correlation_strength) {
      bg_id = label;
    } else {
      // a uniformly random palette color other than the preferred one
      auto other = rng.below(palette_size - 1);
      bg_id = static_cast<int>(other >= static_cast<std::uint64_t>(label)
                                   ? other + 1
                                   : other);
    }

    const int oy = static_cast<int>(rng.below(
        static_cast<std::uint64_t>(img_h - glyph.height + 1)));
    const int ox = static_cast<int>(rng.below(
        static_cast<std::uint64_t>(img_w - glyph.width + 1)));
    const double scale = rng.uniform(0.7, 1.0);

    double gmax = 0.0;
    for (double v : glyph.intensity) gmax = std::max(gmax, v);
    const double threshold = kMaskThresholdFraction * gmax;

    LabeledImage img;
    img.label = label;
    img.background_color_id = bg_id;
    img.pixels = Tensor({static_cast<std::size_t>(img_h),
                         static_cast<std::size_t>(img_w), 3});
    img.object_mask.assign(static_cast<std::size_t>(img_h) * img_w, 0);

    const Rgb bg = spec.palette[static_cast<std::size_t>(bg_id)];
    double* px = img.pixels.ptr();
    for (int y = 0; y < img_h; ++y) {
      for (int x = 0; x < img_w; ++x) {
        px[(y * img_w + x) * 3 + 0] = bg.r;
        px[(y * img_w + x) * 3 + 1] = bg.g;
        px[(y * img_w + x) * 3 + 2] = bg.b;
      }
    }

    int min_x = img_w, min_y = img_h, max_x = -1, max_y = -1;
    for (int gy = 0; gy < glyph.height; ++gy) {
      for (int gx = 0; gx < glyph.width; ++gx) {
        const double v = glyph.intensity[gy * glyph.width + gx];
        if (v <= threshold) continue;  // faint pixels stay background
        const int y = oy + gy;
        const int x = ox + gx;
        // dark ink: stronger glyph pixels go darker, scale modulates depth
        const double stroke = std::clamp(0.35 * (1.0 - scale * v), 0.0, 1.0);
        px[(y * img_w + x) * 3 + 0] = stroke;
        px[(y * img_w + x) * 3 + 1] = stroke;
        px[(y * img_w + x) * 3 + 2] = stroke;
        img.object_mask[static_cast<std::size_t>(y) * img_w + x] = 1;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
    if (max_x < 0) {
      throw std::invalid_argument("generate_dataset: glyph has empty mask");
    }
    img.bbox = Bbox{min_x, min_y, max_x, max_y};
    ds.images.push_back(std::move(img));
  }
  return ds;
}

double measure_background_label_correlation(const Dataset& ds) {
  if (ds.images.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& img : ds.images) {
    if (img.background_color_id == img.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.images.size());
}

ClientPartition dirichlet_partition(const std::vector<int>& labels,
                                    int num_clients, double beta,
                                    std::uint64_t seed) {
  if (labels.empty()) {
    throw std::invalid_argument("dirichlet_partition: labels are empty");
  }
  if (num_clients < 1) {
    throw std::invalid_argument("dirichlet_partition: num_clients must be >= 1");
  }
  if (!(beta > 0.0)) {
    throw std::invalid_argument("dirichlet_partition: beta must be positive");
  }
  if (static_cast<std::size_t>(num_clients) > labels.size()) {
    throw std::invalid_argument(
        "dirichlet_partition: more clients than examples");
  }

  int num_classes = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("dirichlet_partition: negative label");
    num_classes = std::max(num_classes, l + 1);
  }

  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  const std::size_t k = static_cast<std::size_t>(num_clients);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, 0x64697269ULL, static_cast<std::uint64_t>(attempt)));
    std::vector<std::vector<std::size_t>> assignments(k);

    for (auto idx : by_class) {
      if (idx.empty()) continue;
      rng.shuffle(idx);
      const std::vector<double> p = rng.dirichlet(beta, k);

      // largest-remainder allotment so counts sum exactly to the class size
      const double n = static_cast<double>(idx.size());
      std::vector<std::size_t> counts(k);
      std::vector<std::pair<double, std::size_t>> remainders(k);
      std::size_t assigned = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double exact = p[c] * n;
        counts[c] = static_cast<std::size_t>(std::floor(exact));
        remainders[c] = {exact - std::floor(exact), c};
        assigned += counts[c];
      }
      std::stable_sort(remainders.begin(), remainders.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t r = 0; assigned < idx.size(); ++r, ++assigned) {
        counts[remainders[r % k].second] += 1;
      }

      std::size_t pos = 0;
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < counts[c]; ++j) {
          assignments[c].push_back(idx[pos++]);
        }
      }
    }

    const bool all_nonempty = std::all_of(
        assignments.begin(), assignments.end(),
        [](const std::vector<std::size_t>& a) { return !a.empty(); });
    if (!all_nonempty) continue;

    for (auto& a : assignments) std::sort(a.begin(), a.end());
    ClientPartition part;
    part.assignments = std::move(assignments);
    part.beta = beta;
    part.num_clients = num_clients;
    part.seed = seed;
    return part;
  }
  throw std::runtime_error(
      "dirichlet_partition: could not produce non-empty clients in 100 attempts");
}

void save_dataset(const std::string& path, const Dataset& ds) {
  const std::size_t n = ds.images.size();
  const std::size_t h = static_cast<std::size_t>(ds.spec.height);
  const std::size_t w = static_cast<std::size_t>(ds.spec.width);

  std::vector<double> pixels(n * h * w * 3);
  std::vector<std::int64_t> labels(n), bboxes(n * 4), bg_ids(n);
  std::vector<unsigned char> masks(n * h * w);
  for (std::size_t i = 0; i < n; ++i) {
    const LabeledImage& img = ds.images[i];
    std::copy(img.pixels.data.begin(), img.pixels.data.end(),
              pixels.begin() + static_cast<std::ptrdiff_t>(i * h * w * 3));
    std::copy(img.object_mask.begin(), img.object_mask.end(),
              masks.begin() + static_cast<std::ptrdiff_t>(i * h * w));
    labels[i] = img.label;
    bg_ids[i] = img.background_color_id;
    bboxes[i * 4 + 0] = img.bbox.x1;
    bboxes[i * 4 + 1] = img.bbox.y1;
    bboxes[i * 4 + 2] = img.bbox.x2;
    bboxes[i * 4 + 3] = img.bbox.y2;
  }

  nlohmann::json palette = nlohmann::json::array();
  for (const auto& c : ds.spec.palette) {
    palette.push_back({c.r, c.g, c.b});
  }

  Container c;
  c.kind = "fedgid.dataset";
  c.meta = {{"num_classes", ds.spec.num_classes},
            {"height", ds.spec.height},
            {"width", ds.spec.width},
            {"palette", palette},
            {"correlation_strength", ds.spec.correlation_strength},
            {"split", split_name(ds.spec.split)},
            {"seed", ds.spec.seed},
            {"count", n}};
  c.arrays.push_back(NamedArray::f64("pixels", {n, h, w, 3}, pixels.data()));
  c.arrays.push_back(NamedArray::i64("labels", {n}, labels.data()));
  c.arrays.push_back(NamedArray::u8("masks", {n, h, w}, masks.data()));
  c.arrays.push_back(NamedArray::i64("bboxes", {n, 4}, bboxes.data()));
  c.arrays.push_back(NamedArray::i64("bg_ids", {n}, bg_ids.data()));
  write_container(path, c);
}

Dataset load_dataset(const std::string& path) {
  Container c = read_container(path);
  if (c.kind != "fedgid.dataset") {
    throw std::runtime_error("not a dataset container: " + path);
  }
  Dataset ds;
  ds.spec.num_classes = c.meta.at("num_classes");
  ds.spec.height = c.meta.at("height");
  ds.spec.width = c.meta.at("width");
  ds.spec.correlation_strength = c.meta.at("correlation_strength");
  ds.spec.split = split_from_name(c.meta.at("split"));
  ds.spec.seed = c.meta.at("seed");
  for (const auto& col : c.meta.at("palette")) {
    ds.spec.palette.push_back(Rgb{col[0], col[1], col[2]});
  }

  const auto pixels = c.array("pixels").as_f64();
  const auto labels = c.array("labels").as_i64();
  const auto masks = c.array("masks").as_u8();
  const auto bboxes = c.array("bboxes").as_i64();
  const auto bg_ids = c.array("bg_ids").as_i64();

  const std::size_t n = labels.size();
  const std::size_t h = static_cast<std::size_t>(ds.spec.height);
  const std::size_t w = static_cast<std::size_t>(ds.spec.width);
  ds.images.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledImage& img = ds.images[i];
    img.pixels = Tensor({h, w, 3});
    std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(i * h * w * 3),
                h * w * 3, img.pixels.data.begin());
    img.object_mask.assign(
        masks.begin() + static_cast<std::ptrdiff_t>(i * h * w),
        masks.begin() + static_cast<std::ptrdiff_t>((i + 1) * h * w));
    img.label = static_cast<int>(labels[i]);
    img.background_color_id = static_cast<int>(bg_ids[i]);
    img.bbox = Bbox{static_cast<int>(bboxes[i * 4 + 0]),
                    static_cast<int>(bboxes[i * 4 + 1]),
                    static_cast<int>(bboxes[i * 4 + 2]),
                    static_cast<int>(bboxes[i * 4 + 3])};
  }
  return ds;
}

void save_partition(const std::string& path, const ClientPartition& part) {
  std::vector<std::int64_t> sizes(part.assignments.size());
  std::vector<std::int64_t> indices;
  for (std::size_t c = 0; c < part.assignments.size(); ++c) {
    sizes[c] = static_cast<std::int64_t>(part.assignments[c].size());
    for (auto i : part.assignments[c]) {
      indices.push_back(static_cast<std::int64_t>(i));
    }
  }
  Container c;
  c.kind = "fedgid.partition";
  c.meta = {{"beta", part.beta},
            {"num_clients", part.num_clients},
            {"seed", part.seed}};
  c.arrays.push_back(
      NamedArray::i64("client_sizes", {sizes.size()}, sizes.data()));
  c.arrays.push_back(
      NamedArray::i64("indices", {indices.size()}, indices.data()));
  write_container(path, c);
}

ClientPartition load_partition(const std::string& path) {
  Container c = read_container(path);
  if (c.kind != "fedgid.partition") {
    throw std::runtime_error("not a partition container: " + path);
  }
  ClientPartition part;
  part.beta = c.meta.at("beta");
  part.num_clients = c.meta.at("num_clients");
  part.seed = c.meta.at("seed");
  const auto sizes = c.array("client_sizes").as_i64();
  const auto indices = c.array("indices").as_i64();
  std::size_t pos = 0;
  for (auto s : sizes) {
    std::vector<std::size_t> a(static_cast<std::size_t>(s));
    for (auto& v : a) v = static_cast<std::size_t>(indices.at(pos++));
    part.assignments.push_back(std::move(a));
  }
  return part;
}

}  // namespace fedgid
