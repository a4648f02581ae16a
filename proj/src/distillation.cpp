#include "fedgid/distillation.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fedgid {

namespace {

// Row-wise log-softmax of x/tau into `out` (same layout as x).
void log_softmax_rows(const Tensor& x, double tau, std::size_t rows,
                      std::size_t cols, std::vector<double>& out) {
  out.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = x.ptr() + r * cols;
    double* oi = out.data() + r * cols;
    double mx = xi[0] / tau;
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xi[j] / tau);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      oi[j] = xi[j] / tau - mx;
      sum += std::exp(oi[j]);
    }
    const double lse = std::log(sum);
    for (std::size_t j = 0; j < cols; ++j) oi[j] -= lse;
  }
}

}  // namespace

double feature_kl(const Tensor& f_student, const Tensor& f_teacher,
                  double temperature, Tensor* dstudent) {
  require_same_shape(f_student, f_teacher, "feature_kl");
  if (f_student.shape.size() != 2)
    throw std::invalid_argument("feature_kl: features must be [B, F]");
  if (!(temperature > 0.0))
    throw std::invalid_argument("feature_kl: temperature must be positive");

  const std::size_t b = f_student.dim(0);
  const std::size_t f = f_student.dim(1);
  std::vector<double> ls, lt;
  log_softmax_rows(f_student, temperature, b, f, ls);
  log_softmax_rows(f_teacher, temperature, b, f, lt);

  if (dstudent != nullptr) *dstudent = Tensor(f_student.shape);

  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double* lsr = ls.data() + r * f;
    const double* ltr = lt.data() + r * f;
    double kl = 0.0;
    for (std::size_t j = 0; j < f; ++j)
      kl += std::exp(lsr[j]) * (lsr[j] - ltr[j]);
    total += kl;
    if (dstudent != nullptr) {
      double* dr = dstudent->ptr() + r * f;
      const double scale = 1.0 / (static_cast<double>(b) * temperature);
      for (std::size_t j = 0; j < f; ++j)
        dr[j] = scale * std::exp(lsr[j]) * ((lsr[j] - ltr[j]) - kl);
    }
  }
  return total / static_cast<double>(b);
}

double gd_loss(const Tensor& f_i, const Tensor& f_inv, const Tensor& f_g,
               double temperature, Tensor* df_i, Tensor* df_inv) {
  require_same_shape(f_i, f_g, "gd_loss");
  require_same_shape(f_inv, f_g, "gd_loss");
  return feature_kl(f_i, f_g, temperature, df_i) +
         feature_kl(f_inv, f_g, temperature, df_inv);
}

}  // namespace fedgid
