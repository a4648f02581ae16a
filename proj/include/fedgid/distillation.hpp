#pragma once

#include "fedgid/tensor.hpp"

namespace fedgid {

struct DistillConfig {
  double temperature = 1.0;  // softmax temperature over feature dimensions
  double lambda_gd = 0.0;    // weight of the distillation term; 0 disables it
};

// Mean over the batch of KL(softmax(student/tau) || softmax(teacher/tau)),
// with the softmax taken across feature dimensions. The teacher is a frozen
// constant: no gradient is ever produced for it. When dstudent is given it
// receives the gradient of the mean KL w.r.t. the student features.
double feature_kl(const Tensor& f_student, const Tensor& f_teacher,
                  double temperature, Tensor* dstudent = nullptr);

// L_GD: KL of the local features against the global ones plus KL of the
// interventional features against the global ones.
double gd_loss(const Tensor& f_i, const Tensor& f_inv, const Tensor& f_g,
               double temperature, Tensor* df_i = nullptr,
               Tensor* df_inv = nullptr);

}  // namespace fedgid
