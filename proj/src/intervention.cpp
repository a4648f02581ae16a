#include "fedgid/intervention.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedgid/rng.hpp"

namespace fedgid {

BackgroundExtractor BackgroundExtractor::oracle() {
  BackgroundExtractor ex;
  ex.mode = ExtractorMode::kOracleMask;
  return ex;
}

BackgroundExtractor BackgroundExtractor::from_bbox_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bbox file: " + path);
  BackgroundExtractor ex;
  ex.mode = ExtractorMode::kBboxFile;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::uint64_t id = 0;
    Bbox box;
    if (!(ls >> id)) {
      // Blank line is fine; anything else is a malformed row.
      std::istringstream probe(line);
      std::string tok;
      if (probe >> tok)
        throw std::runtime_error("bbox file " + path + ": bad line " +
                                 std::to_string(lineno));
      continue;
    }
    if (!(ls >> box.x1 >> box.y1 >> box.x2 >> box.y2))
      throw std::runtime_error("bbox file " + path + ": bad line " +
                               std::to_string(lineno));
    if (box.x1 < 0 || box.y1 < 0 || box.x2 < box.x1 || box.y2 < box.y1)
      throw std::runtime_error("bbox file " + path + ": invalid box on line " +
                               std::to_string(lineno));
    ex.bbox_table[id] = box;
  }
  return ex;
}

Bbox BackgroundExtractor::box_for(const LabeledImage& img,
                                  std::uint64_t image_id) const {
  if (mode == ExtractorMode::kOracleMask) return img.bbox;
  auto it = bbox_table.find(image_id);
  if (it == bbox_table.end())
    throw std::runtime_error("no bbox entry for image id " +
                             std::to_string(image_id));
  return it->second;
}

Tensor extract_background(const LabeledImage& img, const Bbox& box) {
  const int h = img.height();
  const int w = img.width();
  if (box.x1 < 0 || box.y1 < 0 || box.x2 < box.x1 || box.y2 < box.y1 ||
      box.x2 >= w || box.y2 >= h)
    throw std::invalid_argument("extract_background: box outside image");
  Tensor out = img.pixels;
  for (int y = box.y1; y <= box.y2; ++y) {
    double* row = out.ptr() + (static_cast<std::size_t>(y) * w + box.x1) * 3;
    std::memset(row, 0, sizeof(double) * 3 * static_cast<std::size_t>(box.x2 - box.x1 + 1));
  }
  return out;
}

Tensor extract_background(const LabeledImage& img,
                          const BackgroundExtractor& extractor,
                          std::uint64_t image_id) {
  return extract_background(img, extractor.box_for(img, image_id));
}

std::vector<std::size_t> background_permutation(std::size_t n,
                                                std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  return perm;
}

Tensor sample_backgrounds(const std::vector<const LabeledImage*>& batch,
                          std::uint64_t seed) {
  if (batch.size() < 2)
    throw std::invalid_argument("sample_backgrounds: batch size must be >= 2");
  const int h = batch[0]->height();
  const int w = batch[0]->width();
  for (const LabeledImage* img : batch)
    if (img->height() != h || img->width() != w)
      throw std::invalid_argument("sample_backgrounds: mixed image sizes");

  const std::vector<std::size_t> perm = background_permutation(batch.size(), seed);
  Tensor out({batch.size(), static_cast<std::size_t>(h),
              static_cast<std::size_t>(w), 3});
  const std::size_t stride = static_cast<std::size_t>(h) * w * 3;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledImage& src = *batch[perm[i]];
    Tensor bg = extract_background(src, src.bbox);
    std::memcpy(out.ptr() + i * stride, bg.ptr(), stride * sizeof(double));
  }
  return out;
}

Tensor mix_features(const Tensor& f_i, const Tensor& f_b, double alpha) {
  require_same_shape(f_i, f_b, "mix_features");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("mix_features: alpha outside [0,1]");
  Tensor out = f_i;
  const double beta = 1.0 - alpha;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = alpha * f_i.data[i] + beta * f_b.data[i];
  return out;
}

double intervention_loss(const ModelParams& params, const Tensor& f_inv,
                         const std::vector<int>& labels, Tensor* dfeature,
                         ModelParams* grads) {
  Tensor logits = classify_feature(params, f_inv);
  const bool want_grad = dfeature != nullptr || grads != nullptr;
  if (!want_grad) return softmax_cross_entropy(logits, labels);

  Tensor dlogits;
  const double loss = softmax_cross_entropy(logits, labels, &dlogits);
  ModelParams scratch;
  ModelParams* sink = grads;
  if (sink == nullptr) {
    scratch = zeros_like(params);
    sink = &scratch;
  }
  Tensor dfeat = backward_classifier(params, f_inv, dlogits, *sink);
  if (dfeature != nullptr) *dfeature = std::move(dfeat);
  return loss;
}

}  // namespace fedgid
