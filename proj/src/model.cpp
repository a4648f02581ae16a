#include "fedgid/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "fedgid/container.hpp"
#include "fedgid/rng.hpp"

namespace fedgid {

namespace {

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// im2col with window packing (c*k + ky)*k + kx, matching the conv weight
// layout [out, in, k, k] flattened per output channel.
MatrixRM im2col(const ArchConfig& arch, const Tensor& images) {
  const std::size_t batch = images.dim(0);
  const int oh = arch.conv_out_h();
  const int ow = arch.conv_out_w();
  const int k = arch.kernel;
  const int w = arch.in_width;
  const int cin = arch.in_channels;
  MatrixRM cols(static_cast<Eigen::Index>(batch) * oh * ow,
                static_cast<Eigen::Index>(cin) * k * k);
  const double* px = images.ptr();
  const std::size_t img_stride = static_cast<std::size_t>(arch.in_height) * w * cin;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* img = px + b * img_stride;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double* row =
            cols.data() +
            ((b * oh + oy) * ow + ox) * static_cast<std::size_t>(cin * k * k);
        for (int c = 0; c < cin; ++c) {
          for (int ky = 0; ky < k; ++ky) {
            const double* src = img + ((oy + ky) * w + ox) * cin + c;
            double* dst = row + (c * k + ky) * k;
            for (int kx = 0; kx < k; ++kx) {
              dst[kx] = src[kx * cin];
            }
          }
        }
      }
    }
  }
  return cols;
}

// 2x2 stride-2 max pool with first-max ties; used identically in forward and
// backward so the argmax recomputation matches.
void max_pool(const ArchConfig& arch, const Tensor& feature_map,
              Tensor* pooled, std::vector<std::uint32_t>* argmax) {
  const std::size_t batch = feature_map.dim(0);
  const int ch = arch.conv_channels;
  const int oh = arch.conv_out_h();
  const int ow = arch.conv_out_w();
  const int ph = arch.pooled_h();
  const int pw = arch.pooled_w();
  if (pooled) {
    *pooled = Tensor({batch, static_cast<std::size_t>(ch),
                      static_cast<std::size_t>(ph), static_cast<std::size_t>(pw)});
  }
  if (argmax) {
    argmax->assign(batch * ch * ph * pw, 0);
  }
  const double* src = feature_map.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double* plane = src + (b * ch + c) * static_cast<std::size_t>(oh) * ow;
      for (int py = 0; py < ph; ++py) {
        for (int pxi = 0; pxi < pw; ++pxi) {
          double best = -std::numeric_limits<double>::infinity();
          std::uint32_t best_idx = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int y = 2 * py + dy;
              const int x = 2 * pxi + dx;
              const double v = plane[y * ow + x];
              if (v > best) {
                best = v;
                best_idx = static_cast<std::uint32_t>(y * ow + x);
              }
            }
          }
          const std::size_t out_idx =
              ((b * ch + c) * ph + py) * static_cast<std::size_t>(pw) + pxi;
          if (pooled) pooled->data[out_idx] = best;
          if (argmax) (*argmax)[out_idx] = best_idx;
        }
      }
    }
  }
}

ModelParams alloc_params(const ArchConfig& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  const auto k = static_cast<std::size_t>(arch.kernel);
  p.conv_w = Tensor({static_cast<std::size_t>(arch.conv_channels),
                     static_cast<std::size_t>(arch.in_channels), k, k});
  p.conv_b = Tensor({static_cast<std::size_t>(arch.conv_channels)});
  p.fc1_w = Tensor({static_cast<std::size_t>(arch.feature_dim),
                    static_cast<std::size_t>(arch.flat_dim())});
  p.fc1_b = Tensor({static_cast<std::size_t>(arch.feature_dim)});
  p.fc2_w = Tensor({static_cast<std::size_t>(arch.num_classes),
                    static_cast<std::size_t>(arch.feature_dim)});
  p.fc2_b = Tensor({static_cast<std::size_t>(arch.num_classes)});
  return p;
}

void require_params_shape(const ModelParams& p) {
  p.arch.validate();
  const auto k = static_cast<std::size_t>(p.arch.kernel);
  require_shape(p.conv_w,
                {static_cast<std::size_t>(p.arch.conv_channels),
                 static_cast<std::size_t>(p.arch.in_channels), k, k},
                "conv.weight");
  require_shape(p.conv_b, {static_cast<std::size_t>(p.arch.conv_channels)},
                "conv.bias");
  require_shape(p.fc1_w,
                {static_cast<std::size_t>(p.arch.feature_dim),
                 static_cast<std::size_t>(p.arch.flat_dim())},
                "fc1.weight");
  require_shape(p.fc1_b, {static_cast<std::size_t>(p.arch.feature_dim)},
                "fc1.bias");
  require_shape(p.fc2_w,
                {static_cast<std::size_t>(p.arch.num_classes),
                 static_cast<std::size_t>(p.arch.feature_dim)},
                "fc2.weight");
  require_shape(p.fc2_b, {static_cast<std::size_t>(p.arch.num_classes)},
                "fc2.bias");
}

}  // namespace

void ArchConfig::validate() const {
  if (in_height < kernel || in_width < kernel) {
    throw std::invalid_argument("ArchConfig: image smaller than kernel");
  }
  if (conv_out_h() < 2 || conv_out_w() < 2) {
    throw std::invalid_argument("ArchConfig: conv output too small to pool");
  }
  if (conv_channels < 1 || feature_dim < 1 || num_classes < 1 ||
      in_channels < 1 || kernel < 1) {
    throw std::invalid_argument("ArchConfig: non-positive dimension");
  }
}

std::array<Tensor*, 6> ModelParams::tensors() {
  return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
}

std::array<const Tensor*, 6> ModelParams::tensors() const {
  return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
}

bool ModelParams::same_structure(const ModelParams& other) const {
  if (!(arch == other.arch)) return false;
  auto a = tensors();
  auto b = other.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i]->same_shape(*b[i])) return false;
  }
  return true;
}

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed) {
  ModelParams p = alloc_params(arch);
  const int fan_in[3] = {arch.in_channels * arch.kernel * arch.kernel,
                         arch.flat_dim(), arch.feature_dim};
  Tensor* weights[3] = {&p.conv_w, &p.fc1_w, &p.fc2_w};
  for (int t = 0; t < 3; ++t) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[t]));
    Rng rng(derive_seed(seed, 0x696e6974ULL, static_cast<std::uint64_t>(t)));
    for (auto& v : weights[t]->data) {
      v = rng.uniform(-bound, bound);
    }
  }
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams g;
  g.arch = params.arch;
  auto src = params.tensors();
  auto dst = g.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) {
    *dst[i] = Tensor(src[i]->shape);
  }
  return g;
}

FeatureBundle forward(const ModelParams& params, const Tensor& images) {
  require_params_shape(params);
  const ArchConfig& arch = params.arch;
  if (images.shape.size() != 4 ||
      images.dim(1) != static_cast<std::size_t>(arch.in_height) ||
      images.dim(2) != static_cast<std::size_t>(arch.in_width) ||
      images.dim(3) != static_cast<std::size_t>(arch.in_channels)) {
    throw std::invalid_argument("forward: images must be [B,H,W,C] matching arch");
  }
  const std::size_t batch = images.dim(0);
  const int ch = arch.conv_channels;
  const int oh = arch.conv_out_h();
  const int ow = arch.conv_out_w();

  const MatrixRM cols = im2col(arch, images);
  ConstMapRM w_conv(params.conv_w.ptr(), ch,
                    static_cast<Eigen::Index>(arch.in_channels) * arch.kernel *
                        arch.kernel);
  MatrixRM pre = cols * w_conv.transpose();  // [B*oh*ow, ch]

  FeatureBundle out;
  out.feature_map = Tensor({batch, static_cast<std::size_t>(ch),
                            static_cast<std::size_t>(oh),
                            static_cast<std::size_t>(ow)});
  const double* bias = params.conv_b.ptr();
  double* fm = out.feature_map.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double* row = pre.data() + ((b * oh + oy) * ow + ox) * ch;
        for (int c = 0; c < ch; ++c) {
          const double v = row[c] + bias[c];
          fm[((b * ch + c) * oh + oy) * ow + ox] = v > 0.0 ? v : 0.0;
        }
      }
    }
  }

  out.feature = encode_feature_map_tail(params, out.feature_map);
  out.logits = classify_feature(params, out.feature);
  return out;
}

Tensor encode_feature_map_tail(const ModelParams& params,
                               const Tensor& feature_map) {
  const ArchConfig& arch = params.arch;
  if (feature_map.shape.size() != 4 ||
      feature_map.dim(1) != static_cast<std::size_t>(arch.conv_channels) ||
      feature_map.dim(2) != static_cast<std::size_t>(arch.conv_out_h()) ||
      feature_map.dim(3) != static_cast<std::size_t>(arch.conv_out_w())) {
    throw std::invalid_argument("encode_feature_map_tail: bad feature map shape");
  }
  const std::size_t batch = feature_map.dim(0);

  Tensor pooled;
  max_pool(arch, feature_map, &pooled, nullptr);

  ConstMapRM x(pooled.ptr(), static_cast<Eigen::Index>(batch), arch.flat_dim());
  ConstMapRM w1(params.fc1_w.ptr(), arch.feature_dim, arch.flat_dim());
  Eigen::Map<const Eigen::VectorXd> b1(params.fc1_b.ptr(), arch.feature_dim);

  Tensor feature({batch, static_cast<std::size_t>(arch.feature_dim)});
  MapRM f(feature.ptr(), static_cast<Eigen::Index>(batch), arch.feature_dim);
  f.noalias() = x * w1.transpose();
  f.rowwise() += b1.transpose();
  f = f.cwiseMax(0.0);
  return feature;
}

Tensor classify_feature(const ModelParams& params, const Tensor& feature) {
  const ArchConfig& arch = params.arch;
  if (feature.shape.size() != 2 ||
      feature.dim(1) != static_cast<std::size_t>(arch.feature_dim)) {
    throw std::invalid_argument("classify_feature: feature width mismatch");
  }
  const std::size_t batch = feature.dim(0);
  ConstMapRM f(feature.ptr(), static_cast<Eigen::Index>(batch), arch.feature_dim);
  ConstMapRM w2(params.fc2_w.ptr(), arch.num_classes, arch.feature_dim);
  Eigen::Map<const Eigen::VectorXd> b2(params.fc2_b.ptr(), arch.num_classes);

  Tensor logits({batch, static_cast<std::size_t>(arch.num_classes)});
  MapRM z(logits.ptr(), static_cast<Eigen::Index>(batch), arch.num_classes);
  z.noalias() = f * w2.transpose();
  z.rowwise() += b2.transpose();
  return logits;
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& grads,
                     double lr, double weight_decay) {
  if (!params.same_structure(grads)) {
    throw std::invalid_argument("sgd_step: gradient structure mismatch");
  }
  ModelParams out = params;
  auto p = out.tensors();
  auto g = grads.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    const auto& gd = g[t]->data;
    for (double v : gd) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string("sgd_step: non-finite gradient in ") +
                                    ModelParams::kTensorNames[t]);
      }
    }
    auto& pd = p[t]->data;
    for (std::size_t i = 0; i < pd.size(); ++i) {
      pd[i] -= lr * (gd[i] + weight_decay * pd[i]);
    }
  }
  return out;
}

double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels, Tensor* dlogits) {
  if (logits.shape.size() != 2 || logits.dim(0) != labels.size()) {
    throw std::invalid_argument("softmax_cross_entropy: bad logits shape");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (dlogits) *dlogits = Tensor(logits.shape);

  double total = 0.0;
  const double* z = logits.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label outside [0,C)");
    }
    const double* row = z + b * classes;
    double mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - mx);
    const double logsum = mx + std::log(sum);
    total += logsum - row[static_cast<std::size_t>(y)];
    if (dlogits) {
      double* drow = dlogits->ptr() + b * classes;
      const double inv_batch = 1.0 / static_cast<double>(batch);
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(row[c] - logsum);
        drow[c] = (p - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0)) * inv_batch;
      }
    }
  }
  return total / static_cast<double>(batch);
}

Tensor backward_classifier(const ModelParams& params, const Tensor& feature,
                           const Tensor& dlogits, ModelParams& grads) {
  const ArchConfig& arch = params.arch;
  const std::size_t batch = feature.dim(0);
  require_shape(dlogits, {batch, static_cast<std::size_t>(arch.num_classes)},
                "backward_classifier dlogits");

  ConstMapRM f(feature.ptr(), static_cast<Eigen::Index>(batch), arch.feature_dim);
  ConstMapRM dz(dlogits.ptr(), static_cast<Eigen::Index>(batch), arch.num_classes);
  ConstMapRM w2(params.fc2_w.ptr(), arch.num_classes, arch.feature_dim);

  MapRM gw2(grads.fc2_w.ptr(), arch.num_classes, arch.feature_dim);
  Eigen::Map<Eigen::VectorXd> gb2(grads.fc2_b.ptr(), arch.num_classes);
  gw2.noalias() += dz.transpose() * f;
  gb2 += dz.colwise().sum().transpose();

  Tensor dfeature({batch, static_cast<std::size_t>(arch.feature_dim)});
  MapRM df(dfeature.ptr(), static_cast<Eigen::Index>(batch), arch.feature_dim);
  df.noalias() = dz * w2;
  return dfeature;
}

Tensor backward_tail(const ModelParams& params, const Tensor& feature_map,
                     const Tensor& feature, const Tensor& dfeature,
                     ModelParams& grads) {
  const ArchConfig& arch = params.arch;
  const std::size_t batch = feature_map.dim(0);
  require_same_shape(feature, dfeature, "backward_tail dfeature");

  Tensor pooled;
  std::vector<std::uint32_t> argmax;
  max_pool(arch, feature_map, &pooled, &argmax);

  // ReLU mask of fc1: post-activation value > 0 <=> pre-activation > 0
  Tensor du({batch, static_cast<std::size_t>(arch.feature_dim)});
  for (std::size_t i = 0; i < du.numel(); ++i) {
    du.data[i] = feature.data[i] > 0.0 ? dfeature.data[i] : 0.0;
  }

  ConstMapRM x(pooled.ptr(), static_cast<Eigen::Index>(batch), arch.flat_dim());
  ConstMapRM dum(du.ptr(), static_cast<Eigen::Index>(batch), arch.feature_dim);
  ConstMapRM w1(params.fc1_w.ptr(), arch.feature_dim, arch.flat_dim());

  MapRM gw1(grads.fc1_w.ptr(), arch.feature_dim, arch.flat_dim());
  Eigen::Map<Eigen::VectorXd> gb1(grads.fc1_b.ptr(), arch.feature_dim);
  gw1.noalias() += dum.transpose() * x;
  gb1 += dum.colwise().sum().transpose();

  MatrixRM dx = dum * w1;  // [B, flat_dim]

  Tensor dfm(feature_map.shape);
  const int ch = arch.conv_channels;
  const int oh = arch.conv_out_h();
  const int ow = arch.conv_out_w();
  const int ph = arch.pooled_h();
  const int pw = arch.pooled_w();
  for (std::size_t b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      for (int py = 0; py < ph; ++py) {
        for (int pxi = 0; pxi < pw; ++pxi) {
          const std::size_t cell =
              ((b * ch + c) * ph + py) * static_cast<std::size_t>(pw) + pxi;
          const std::size_t plane =
              (b * ch + c) * static_cast<std::size_t>(oh) * ow;
          dfm.data[plane + argmax[cell]] +=
              dx(static_cast<Eigen::Index>(b),
                 (c * ph + py) * pw + pxi);
        }
      }
    }
  }
  return dfm;
}

void backward_conv(const ModelParams& params, const Tensor& images,
                   const Tensor& feature_map, const Tensor& dfeature_map,
                   ModelParams& grads) {
  const ArchConfig& arch = params.arch;
  require_same_shape(feature_map, dfeature_map, "backward_conv dfeature_map");
  const std::size_t batch = feature_map.dim(0);
  const int ch = arch.conv_channels;
  const int oh = arch.conv_out_h();
  const int ow = arch.conv_out_w();

  // [B*oh*ow, ch] pre-activation gradient with the conv ReLU mask applied
  MatrixRM dpre(static_cast<Eigen::Index>(batch) * oh * ow, ch);
  const double* fm = feature_map.ptr();
  const double* dfm = dfeature_map.ptr();
  for (std::size_t b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      const std::size_t plane = (b * ch + c) * static_cast<std::size_t>(oh) * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const std::size_t i = plane + oy * ow + ox;
          dpre(static_cast<Eigen::Index>((b * oh + oy) * ow + ox), c) =
              fm[i] > 0.0 ? dfm[i] : 0.0;
        }
      }
    }
  }

  const MatrixRM cols = im2col(arch, images);
  MapRM gwc(grads.conv_w.ptr(), ch,
            static_cast<Eigen::Index>(arch.in_channels) * arch.kernel *
                arch.kernel);
  Eigen::Map<Eigen::VectorXd> gbc(grads.conv_b.ptr(), ch);
  gwc.noalias() += dpre.transpose() * cols;
  gbc += dpre.colwise().sum().transpose();
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  Container c;
  c.kind = "fedgid.checkpoint";
  c.meta = {{"in_height", params.arch.in_height},
            {"in_width", params.arch.in_width},
            {"in_channels", params.arch.in_channels},
            {"conv_channels", params.arch.conv_channels},
            {"kernel", params.arch.kernel},
            {"feature_dim", params.arch.feature_dim},
            {"num_classes", params.arch.num_classes}};
  auto t = params.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) {
    c.arrays.push_back(
        NamedArray::f64(ModelParams::kTensorNames[i], t[i]->shape, t[i]->ptr()));
  }
  write_container(path, c);
}

ModelParams load_checkpoint(const std::string& path) {
  Container c = read_container(path);
  if (c.kind != "fedgid.checkpoint") {
    throw std::runtime_error("not a checkpoint container: " + path);
  }
  ArchConfig arch;
  arch.in_height = c.meta.at("in_height");
  arch.in_width = c.meta.at("in_width");
  arch.in_channels = c.meta.at("in_channels");
  arch.conv_channels = c.meta.at("conv_channels");
  arch.kernel = c.meta.at("kernel");
  arch.feature_dim = c.meta.at("feature_dim");
  arch.num_classes = c.meta.at("num_classes");

  ModelParams p = alloc_params(arch);
  auto t = p.tensors();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const NamedArray& a = c.array(ModelParams::kTensorNames[i]);
    if (a.shape != t[i]->shape) {
      throw std::runtime_error("checkpoint tensor shape mismatch: " +
                               std::string(ModelParams::kTensorNames[i]));
    }
    t[i]->data = a.as_f64();
  }
  return p;
}

}  // namespace fedgid
