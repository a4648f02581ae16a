#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fedgid/tensor.hpp"

namespace fedgid {

// SimpleCNN: one 5x5 conv (ReLU, 2x2 max-pool) followed by two fully
// connected layers. fc1's post-ReLU output is the 64-dim feature used by the
// intervention and distillation losses; fc2 is the shared classifier head.
struct ArchConfig {
  int in_height = 14;
  int in_width = 14;
  int in_channels = 3;
  int conv_channels = 16;
  int kernel = 5;
  int feature_dim = 64;
  int num_classes = 10;

  bool operator==(const ArchConfig&) const = default;

  int conv_out_h() const { return in_height - kernel + 1; }
  int conv_out_w() const { return in_width - kernel + 1; }
  int pooled_h() const { return conv_out_h() / 2; }
  int pooled_w() const { return conv_out_w() / 2; }
  int flat_dim() const { return conv_channels * pooled_h() * pooled_w(); }

  void validate() const;
};

struct ModelParams {
  ArchConfig arch;
  Tensor conv_w;  // [conv_channels, in_channels, k, k]
  Tensor conv_b;  // [conv_channels]
  Tensor fc1_w;   // [feature_dim, flat_dim]
  Tensor fc1_b;   // [feature_dim]
  Tensor fc2_w;   // [num_classes, feature_dim]
  Tensor fc2_b;   // [num_classes]

  static constexpr std::array<const char*, 6> kTensorNames = {
      "conv.weight", "conv.bias", "fc1.weight",
      "fc1.bias",    "fc2.weight", "fc2.bias"};

  std::array<Tensor*, 6> tensors();
  std::array<const Tensor*, 6> tensors() const;

  bool same_structure(const ModelParams& other) const;
};

struct FeatureBundle {
  Tensor feature_map;  // [B, conv_channels, oh, ow], post-conv post-ReLU pre-pool
  Tensor feature;      // [B, feature_dim], post-ReLU fc1 output
  Tensor logits;       // [B, num_classes]
};

// Deterministic fan-in-scaled uniform init; biases zero.
ModelParams init_params(const ArchConfig& arch, std::uint64_t seed);

ModelParams zeros_like(const ModelParams& params);

// images: [B, H, W, 3] in [0,1]. Pure function of (params, images).
FeatureBundle forward(const ModelParams& params, const Tensor& images);

// Classifier head only; accepts features that never passed this encoder.
Tensor classify_feature(const ModelParams& params, const Tensor& feature);

// pool + fc1 + ReLU applied to a conv feature map (the GI_FM tail).
Tensor encode_feature_map_tail(const ModelParams& params,
                               const Tensor& feature_map);

// p <- p - lr * (g + weight_decay * p). Rejects non-finite gradients.
ModelParams sgd_step(const ModelParams& params, const ModelParams& grads,
                     double lr, double weight_decay);

// Mean softmax cross-entropy; dlogits (optional) receives the gradient of the
// mean loss.
double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels,
                             Tensor* dlogits = nullptr);

// --- analytic backward pieces -------------------------------------------
// Each accumulates parameter gradients into `grads` (same layout as params)
// and returns the gradient with respect to its input activation. ReLU masks
// and pool argmaxes are recomputed from the stored activations.

// dlogits [B,C] -> dfeature [B,F]; accumulates fc2 grads.
Tensor backward_classifier(const ModelParams& params, const Tensor& feature,
                           const Tensor& dlogits, ModelParams& grads);

// dfeature [B,F] -> dfeature_map [B,c,oh,ow]; accumulates fc1 grads.
// feature_map/feature must be the activations of the same tail invocation.
Tensor backward_tail(const ModelParams& params, const Tensor& feature_map,
                     const Tensor& feature, const Tensor& dfeature,
                     ModelParams& grads);

// dfeature_map -> conv grads (input gradients are not needed: conv is the
// first layer).
void backward_conv(const ModelParams& params, const Tensor& images,
                   const Tensor& feature_map, const Tensor& dfeature_map,
                   ModelParams& grads);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace fedgid
