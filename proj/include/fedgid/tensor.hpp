#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedgid {

// Dense row-major double tensor. All model math maps these buffers into Eigen
// views; the struct itself stays a plain value type.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(numel_of(shape), 0.0) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::size_t numel() const { return data.size(); }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  std::size_t dim(std::size_t i) const { return shape.at(i); }

  static std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(s[i]);
    }
    return out + "]";
  }
};

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& s,
                          const char* what) {
  if (t.shape != s) {
    throw std::invalid_argument(std::string(what) + ": expected shape " +
                                Tensor::shape_str(s) + ", got " +
                                Tensor::shape_str(t.shape));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                Tensor::shape_str(a.shape) + " vs " +
                                Tensor::shape_str(b.shape));
  }
}

}  // namespace fedgid
