// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "itrlhf/errors.hpp"

namespace itrlhf {

/// Fully connected scalar-output network: tanh on every hidden layer,
/// identity on the output. All weights live in one flat column vector so
/// that averaging and interpolation are plain vector arithmetic.
///
/// Layout, per layer l with shape (out_l x in_l): the weight matrix in
/// column-major order, followed by the bias vector of length out_l.
template <typename Scalar>
class Mlp {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Mlp() = default;

  /// `widths` = {input, hidden..., 1}. An empty hidden list gives a linear model.
  explicit Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2 || widths_.back() != 1)
      throw std::invalid_argument("Mlp: widths must be {input, hidden..., 1}");
    for (int w : widths_)
      if (w <= 0) throw std::invalid_argument("Mlp: non-positive layer width");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(offset);
      offset += static_cast<std::size_t>(widths_[l + 1]) * (widths_[l] + 1);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
  }

  const std::vector<int>& widths() const { return widths_; }
  std::size_t n_layers() const { return offsets_.size(); }
  int input_dim() const { return widths_.front(); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  /// Offset and length of the final (output) layer inside params().
  Eigen::Index head_offset() const { return static_cast<Eigen::Index>(offsets_.back()); }
  Eigen::Index head_size() const { return params_.size() - head_offset(); }

  std::string arch_tag() const {
    std::ostringstream os;
    os << "mlp[";
    for (std::size_t i = 0; i < widths_.size(); ++i) os << (i ? "-" : "") << widths_[i];
    os << "]-tanh";
    return os.str();
  }

  /// Gaussian init with std gain/sqrt(fan_in) on weights, zero biases, for
  /// layers in [first, last).
  template <typename Urbg>
  void init_layers(std::size_t first, std::size_t last, Urbg& rng, Scalar gain = Scalar(1)) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = first; l < last && l < n_layers(); ++l) {
      auto w = weight(l);
      const double scale = static_cast<double>(gain) / std::sqrt(static_cast<double>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(normal(rng) * scale);
      bias(l).setZero();
    }
  }

  Eigen::Map<Matrix> weight(std::size_t l) {
    return {params_.data() + offsets_[l], widths_[l + 1], widths_[l]};
  }
  Eigen::Map<const Matrix> weight(std::size_t l) const {
    return {params_.data() + offsets_[l], widths_[l + 1], widths_[l]};
  }
  Eigen::Map<Vector> bias(std::size_t l) {
    return {params_.data() + offsets_[l] + widths_[l + 1] * widths_[l], widths_[l + 1]};
  }
  Eigen::Map<const Vector> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + widths_[l + 1] * widths_[l], widths_[l + 1]};
  }

  Scalar forward(const Eigen::Ref<const Vector>& input) const {
    Vector h = input;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Vector z = weight(l) * h + bias(l);
      h = (l + 1 < n_layers()) ? Vector(z.array().tanh()) : z;
    }
    return h(0);
  }

  /// One output per input column.
  Vector forward_batch(const Eigen::Ref<const Matrix>& inputs) const {
    Matrix h = inputs;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Matrix z = (weight(l) * h).colwise() + bias(l);
      h = (l + 1 < n_layers()) ? Matrix(z.array().tanh()) : z;
    }
    return h.row(0).transpose();
  }

  /// Returns the output and adds upstream * d(output)/d(params) into grad.
  Scalar forward_backward(const Eigen::Ref<const Vector>& input, Scalar upstream,
                          Eigen::Ref<Vector> grad) const {
    std::vector<Vector> activations;
    activations.reserve(n_layers() + 1);
    activations.push_back(input);
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Vector z = weight(l) * activations.back() + bias(l);
      activations.push_back((l + 1 < n_layers()) ? Vector(z.array().tanh()) : z);
    }
    const Scalar out = activations.back()(0);

    Vector delta = Vector::Constant(1, upstream);
    for (std::size_t l = n_layers(); l-- > 0;) {
      const Vector& in = activations[l];
      const std::size_t off = offsets_[l];
      const Eigen::Index rows = widths_[l + 1];
      const Eigen::Index cols = widths_[l];
      Eigen::Map<Matrix>(grad.data() + off, rows, cols).noalias() += delta * in.transpose();
      Eigen::Map<Vector>(grad.data() + off + rows * cols, rows) += delta;
      if (l == 0) break;
      Vector back = weight(l).transpose() * delta;
      // in = tanh(z) for hidden layers, so dtanh = 1 - in^2
      delta = back.array() * (Scalar(1) - in.array().square());
    }
    return out;
  }

  /// Elementwise mean of parameters; all members must share one architecture.
  static Mlp average(const std::vector<const Mlp*>& members) {
    if (members.empty()) throw std::invalid_argument("Mlp::average: no members");
    Mlp out = *members.front();
    for (std::size_t i = 1; i < members.size(); ++i) {
      if (members[i]->widths_ != out.widths_)
        throw ArchitectureMismatch("Mlp::average: " + members[i]->arch_tag() + " vs " +
                                   out.arch_tag());
      out.params_ += members[i]->params_;
    }
    out.params_ /= Scalar(static_cast<double>(members.size()));
    return out;
  }

 private:
  std::vector<int> widths_;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

}  // namespace itrlhf
