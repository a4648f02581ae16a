#pragma once

#include <array>
#include <string>
#include <vector>

#include "fedgid/model.hpp"
#include "fedgid/tensor.hpp"

namespace fedgid {

struct GradCamResult {
  Tensor heatmap;  // [H, W] in [0,1], upsampled to the input size
  int predicted = 0;
  bool degenerate = false;  // the raw map was spatially constant
};

// Grad-CAM over the conv feature map for one [H,W,3] image: channel weights
// are the spatially averaged gradients of the predicted-class logit, the map
// is the ReLU'd weighted channel sum, min-max normalized and bilinearly
// upsampled to the input size.
GradCamResult grad_cam(const ModelParams& params, const Tensor& image);

// Bilinear resize of a [h,w] map (corners map to corners).
Tensor bilinear_upsample(const Tensor& map, std::size_t out_h,
                         std::size_t out_w);

struct PcaProjection {
  Tensor coords;  // [N, 2]
  std::array<double, 2> component_variance = {0.0, 0.0};
  bool degenerate = false;  // rank-deficient input (all rows identical)
};

// Projects [N,D] features (D >= 2, N >= 2) onto the top two principal
// components. Deterministic: each component's largest-magnitude loading is
// made positive.
PcaProjection pca_project_2d(const Tensor& features);

// 8-bit binary PGM from a [H,W] map of values in [0,1] (clamped).
void write_pgm(const std::string& path, const Tensor& gray);

// Scatter plot of [N,2] coords on a white square canvas; group ids pick the
// point color (small fixed palette, cycled).
void write_ppm_scatter(const std::string& path, const Tensor& coords,
                       const std::vector<int>& groups, std::size_t canvas_px);

}  // namespace fedgid
