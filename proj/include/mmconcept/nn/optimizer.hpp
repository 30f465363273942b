#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmconcept/nn/transformer.hpp"

namespace mmconcept::nn {

/// Adam with a fixed learning rate.
template <typename T>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelParams<T>& params) {
    ++t_;
    if (moments_.empty()) {
      params.visit([&](const std::string&, Param<T>& p) {
        moments_.push_back({Matrix<T>::Zero(p.value.rows(), p.value.cols()),
                            Matrix<T>::Zero(p.value.rows(), p.value.cols())});
      });
    }
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    std::size_t i = 0;
    params.visit([&](const std::string&, Param<T>& p) {
      auto& [m, v] = moments_[i++];
      m = b1 * m + (T(1) - b1) * p.grad;
      v = b2 * v + (T(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    });
  }

  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    Matrix<T> first;
    Matrix<T> second;
  };
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Moments> moments_;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ModelParams<T>& params, double max_norm) {
  double sq = 0;
  params.visit([&](const std::string&, const Param<T>& p) { sq += static_cast<double>(p.grad.squaredNorm()); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    params.visit([&](const std::string&, Param<T>& p) { p.grad *= s; });
  }
  return norm;
}

}  // namespace mmconcept::nn
