#include "fedgid/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedgid {

GradCamResult grad_cam(const ModelParams& params, const Tensor& image) {
  const ArchConfig& arch = params.arch;
  require_shape(image,
                {static_cast<std::size_t>(arch.in_height),
                 static_cast<std::size_t>(arch.in_width),
                 static_cast<std::size_t>(arch.in_channels)},
                "grad_cam: image");
  Tensor x({1, image.dim(0), image.dim(1), image.dim(2)});
  std::memcpy(x.ptr(), image.ptr(), image.numel() * sizeof(double));

  FeatureBundle fb = forward(params, x);
  const std::size_t c = fb.logits.dim(1);
  std::size_t pred = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (fb.logits.data[j] > fb.logits.data[pred]) pred = j;

  Tensor dlogits({1, c});
  dlogits.data[pred] = 1.0;
  ModelParams scratch = zeros_like(params);
  Tensor dfeat = backward_classifier(params, fb.feature, dlogits, scratch);
  Tensor dmap = backward_tail(params, fb.feature_map, fb.feature, dfeat, scratch);

  const std::size_t ch = dmap.dim(1);
  const std::size_t oh = dmap.dim(2);
  const std::size_t ow = dmap.dim(3);
  const std::size_t plane = oh * ow;

  Tensor cam({oh, ow});
  for (std::size_t k = 0; k < ch; ++k) {
    const double* g = dmap.ptr() + k * plane;
    double w = 0.0;
    for (std::size_t p = 0; p < plane; ++p) w += g[p];
    w /= static_cast<double>(plane);
    const double* a = fb.feature_map.ptr() + k * plane;
    for (std::size_t p = 0; p < plane; ++p) cam.data[p] += w * a[p];
  }
  for (double& v : cam.data) v = std::max(0.0, v);

  GradCamResult result;
  result.predicted = static_cast<int>(pred);
  result.heatmap = bilinear_upsample(cam, image.dim(0), image.dim(1));

  // Normalize after upsampling so the reported map actually peaks at 1;
  // interpolation of a pre-normalized map would leave the max below it.
  double lo = result.heatmap.data[0], hi = result.heatmap.data[0];
  for (double v : result.heatmap.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    for (double& v : result.heatmap.data) v = (v - lo) / (hi - lo);
  } else {
    result.degenerate = true;
    const double fill = hi > 0.0 ? 1.0 : 0.0;
    for (double& v : result.heatmap.data) v = fill;
  }
  return result;
}

Tensor bilinear_upsample(const Tensor& map, std::size_t out_h,
                         std::size_t out_w) {
  if (map.shape.size() != 2 || map.dim(0) == 0 || map.dim(1) == 0)
    throw std::invalid_argument("bilinear_upsample: need a non-empty [h,w] map");
  if (out_h == 0 || out_w == 0)
    throw std::invalid_argument("bilinear_upsample: empty output");
  const std::size_t ih = map.dim(0);
  const std::size_t iw = map.dim(1);
  Tensor out({out_h, out_w});
  const double sy =
      out_h > 1 ? static_cast<double>(ih - 1) / static_cast<double>(out_h - 1) : 0.0;
  const double sx =
      out_w > 1 ? static_cast<double>(iw - 1) / static_cast<double>(out_w - 1) : 0.0;
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = sy * static_cast<double>(y);
    const std::size_t y0 = std::min(static_cast<std::size_t>(fy), ih - 1);
    const std::size_t y1 = std::min(y0 + 1, ih - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = sx * static_cast<double>(x);
      const std::size_t x0 = std::min(static_cast<std::size_t>(fx), iw - 1);
      const std::size_t x1 = std::min(x0 + 1, iw - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = (1.0 - tx) * map.data[y0 * iw + x0] + tx * map.data[y0 * iw + x1];
      const double bot = (1.0 - tx) * map.data[y1 * iw + x0] + tx * map.data[y1 * iw + x1];
      out.data[y * out_w + x] = (1.0 - ty) * top + ty * bot;
    }
  }
  return out;
}

PcaProjection pca_project_2d(const Tensor& features) {
  if (features.shape.size() != 2)
    throw std::invalid_argument("pca_project_2d: features must be [N,D]");
  const std::size_t n = features.dim(0);
  const std::size_t d = features.dim(1);
  if (n < 2 || d < 2)
    throw std::invalid_argument("pca_project_2d: need at least 2 samples and 2 dims");

  using MatrixRM =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const MatrixRM> x(features.ptr(), static_cast<Eigen::Index>(n),
                               static_cast<Eigen::Index>(d));
  MatrixRM centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered /
                        static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("pca_project_2d: eigendecomposition failed");

  PcaProjection result;
  const double scale = std::max(1.0, cov.trace());
  // eigenvalues come out ascending; the last two are the leading components
  result.degenerate = es.eigenvalues()(static_cast<Eigen::Index>(d) - 1) <=
                      1e-12 * scale;

  Eigen::MatrixXd comps(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(static_cast<Eigen::Index>(d) - 1 - k);
    Eigen::Index imax = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (std::abs(v(i)) > std::abs(v(imax))) imax = i;
    if (v(imax) < 0.0) v = -v;
    comps.col(k) = v;
    result.component_variance[static_cast<std::size_t>(k)] =
        es.eigenvalues()(static_cast<Eigen::Index>(d) - 1 - k);
  }

  MatrixRM proj = centered * comps;
  result.coords = Tensor({n, 2});
  std::memcpy(result.coords.ptr(), proj.data(), n * 2 * sizeof(double));
  return result;
}

void write_pgm(const std::string& path, const Tensor& gray) {
  if (gray.shape.size() != 2)
    throw std::invalid_argument("write_pgm: need a [H,W] map");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P5\n" << gray.dim(1) << " " << gray.dim(0) << "\n255\n";
  std::vector<unsigned char> row(gray.dim(1));
  for (std::size_t y = 0; y < gray.dim(0); ++y) {
    for (std::size_t x = 0; x < gray.dim(1); ++x) {
      const double v = std::clamp(gray.data[y * gray.dim(1) + x], 0.0, 1.0);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_ppm_scatter(const std::string& path, const Tensor& coords,
                       const std::vector<int>& groups, std::size_t canvas_px) {
  if (coords.shape.size() != 2 || coords.dim(1) != 2)
    throw std::invalid_argument("write_ppm_scatter: coords must be [N,2]");
  if (groups.size() != coords.dim(0))
    throw std::invalid_argument("write_ppm_scatter: one group id per point");
  if (canvas_px < 16)
    throw std::invalid_argument("write_ppm_scatter: canvas too small");

  static constexpr unsigned char kPalette[][3] = {
      {220, 50, 47},   // red
      {38, 139, 210},  // blue
      {133, 153, 0},   // green
      {181, 137, 0},   // yellow
      {108, 113, 196}, // violet
      {42, 161, 152},  // cyan
  };
  constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

  const std::size_t n = coords.dim(0);
  double xmin = coords.data[0], xmax = coords.data[0];
  double ymin = coords.data[1], ymax = coords.data[1];
  for (std::size_t i = 0; i < n; ++i) {
    xmin = std::min(xmin, coords.data[i * 2]);
    xmax = std::max(xmax, coords.data[i * 2]);
    ymin = std::min(ymin, coords.data[i * 2 + 1]);
    ymax = std::max(ymax, coords.data[i * 2 + 1]);
  }
  const double xspan = xmax > xmin ? xmax - xmin : 1.0;
  const double yspan = ymax > ymin ? ymax - ymin : 1.0;

  const std::size_t margin = canvas_px / 16;
  const std::size_t inner = canvas_px - 2 * margin;
  std::vector<unsigned char> img(canvas_px * canvas_px * 3, 255);
  auto put = [&](std::size_t px, std::size_t py, const unsigned char* rgb) {
    unsigned char* p = img.data() + (py * canvas_px + px) * 3;
    p[0] = rgb[0];
    p[1] = rgb[1];
    p[2] = rgb[2];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (coords.data[i * 2] - xmin) / xspan;
    const double v = (coords.data[i * 2 + 1] - ymin) / yspan;
    const std::size_t cx = margin + static_cast<std::size_t>(
                                        std::lround(u * static_cast<double>(inner - 1)));
    // raster y grows downward; flip so larger coordinates plot higher
    const std::size_t cy = margin + static_cast<std::size_t>(std::lround(
                                        (1.0 - v) * static_cast<double>(inner - 1)));
    const unsigned char* rgb =
        kPalette[static_cast<std::size_t>(groups[i] < 0 ? 0 : groups[i]) %
                 kPaletteSize];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const std::size_t px = std::min(canvas_px - 1,
                                        static_cast<std::size_t>(std::max(
                                            0, static_cast<int>(cx) + dx)));
        const std::size_t py = std::min(canvas_px - 1,
                                        static_cast<std::size_t>(std::max(
                                            0, static_cast<int>(cy) + dy)));
        put(px, py, rgb);
      }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P6\n" << canvas_px << " " << canvas_px << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fedgid
