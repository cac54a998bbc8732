// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace itrlhf {

enum class OptimizerKind { Sgd, Adam };

/// First-order optimizer over a flat parameter vector (minimizes).
template <typename Scalar>
class Optimizer {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Optimizer(OptimizerKind kind, Scalar lr, Eigen::Index n)
      : kind_(kind), lr_(lr), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grad) {
    if (kind_ == OptimizerKind::Sgd) {
      params -= lr_ * grad;
      return;
    }
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(beta1_, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, Scalar(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  OptimizerKind kind_;
  Scalar lr_;
  Scalar beta1_ = Scalar(0.9);
  Scalar beta2_ = Scalar(0.999);
  Scalar eps_ = Scalar(1e-8);
  long t_ = 0;
  Vector m_;
  Vector v_;
};

}  // namespace itrlhf
