// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "itrlhf/errors.hpp"
#include "itrlhf/rng.hpp"
#include "itrlhf/world.hpp"

namespace itrlhf {

/// Softmax policy over the response catalog with logits W^T phi(x) + b,
/// where phi(x) are the prompt features. W (d x M) and b (M) share one flat
/// parameter vector: W column-major first, then b.
template <typename Scalar>
class SoftmaxPolicy {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  SoftmaxPolicy() = default;
  SoftmaxPolicy(Eigen::Index feat_dim, Eigen::Index n_responses)
      : feat_dim_(feat_dim),
        n_responses_(n_responses),
        params_(Vector::Zero(feat_dim * n_responses + n_responses)) {}

  static SoftmaxPolicy zeros_like(const SyntheticWorld& world) {
    return SoftmaxPolicy(world.feat_dim(), world.n_responses());
  }

  Eigen::Index feat_dim() const { return feat_dim_; }
  Eigen::Index n_responses() const { return n_responses_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weights() { return {params_.data(), feat_dim_, n_responses_}; }
  Eigen::Map<const Matrix> weights() const { return {params_.data(), feat_dim_, n_responses_}; }
  Eigen::Map<Vector> bias() { return {params_.data() + feat_dim_ * n_responses_, n_responses_}; }
  Eigen::Map<const Vector> bias() const {
    return {params_.data() + feat_dim_ * n_responses_, n_responses_};
  }

  std::string arch_tag() const {
    std::ostringstream os;
    os << "softmax-linear[" << feat_dim_ << "x" << n_responses_ << "]";
    return os.str();
  }

  bool operator==(const SoftmaxPolicy& other) const {
    return feat_dim_ == other.feat_dim_ && n_responses_ == other.n_responses_ &&
           params_ == other.params_;
  }

 private:
  Eigen::Index feat_dim_ = 0;
  Eigen::Index n_responses_ = 0;
  Vector params_;
};

using Policy = SoftmaxPolicy<double>;

template <typename Scalar>
void check_compatible(const SoftmaxPolicy<Scalar>& pol, const SyntheticWorld& world) {
  if (pol.feat_dim() != world.feat_dim() || pol.n_responses() != world.n_responses())
    throw ArchitectureMismatch("policy " + pol.arch_tag() + " does not fit world");
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits(const SoftmaxPolicy<Scalar>& pol,
                                                const SyntheticWorld& world, PromptId x) {
  world.check_prompt(x);
  check_compatible(pol, world);
  const auto phi = world.prompt_features().row(x).transpose().template cast<Scalar>();
  return pol.weights().transpose() * phi + pol.bias();
}

template <typename Derived>
auto log_softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = z.maxCoeff();
  const Scalar lse = peak + std::log((z.array() - peak).exp().sum());
  return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(z.array() - lse);
}

template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (z.array() - z.maxCoeff()).exp();
  return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(e / e.sum());
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probabilities(const SoftmaxPolicy<Scalar>& pol,
                                                       const SyntheticWorld& world, PromptId x) {
  return softmax(logits(pol, world, x));
}

/// pi(y|x) for every pair, P x M.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> probability_table(
    const SoftmaxPolicy<Scalar>& pol, const SyntheticWorld& world) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> table(world.n_prompts(),
                                                               world.n_responses());
  for (PromptId x = 0; x < world.n_prompts(); ++x)
    table.row(x) = probabilities(pol, world, x).transpose();
  return table;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> log_prob_table(
    const SoftmaxPolicy<Scalar>& pol, const SyntheticWorld& world) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> table(world.n_prompts(),
                                                               world.n_responses());
  for (PromptId x = 0; x < world.n_prompts(); ++x)
    table.row(x) = log_softmax(logits(pol, world, x)).transpose();
  return table;
}

template <typename Scalar>
ResponseId sample_response(const SoftmaxPolicy<Scalar>& pol, const SyntheticWorld& world,
                           PromptId x, Rng& rng) {
  return sample_categorical(probabilities(pol, world, x), rng);
}

/// E_rho[ KL(pi(.|x) || ref(.|x)) ] in nats, computed exactly over the catalog.
template <typename Scalar>
Scalar analytic_kl(const SoftmaxPolicy<Scalar>& pol, const SoftmaxPolicy<Scalar>& ref,
                   const SyntheticWorld& world) {
  check_compatible(pol, world);
  check_compatible(ref, world);
  Scalar total(0);
  for (PromptId x = 0; x < world.n_prompts(); ++x) {
    const auto logp = log_softmax(logits(pol, world, x));
    const auto logq = log_softmax(logits(ref, world, x));
    Scalar kl(0);
    for (Eigen::Index y = 0; y < logp.size(); ++y) {
      const Scalar p = std::exp(logp(y));
      if (p == Scalar(0)) continue;
      if (!std::isfinite(static_cast<double>(logq(y))))
        throw InfiniteDivergenceError("analytic_kl: reference has zero mass at a supported response");
      kl += p * (logp(y) - logq(y));
    }
    total += Scalar(world.prompt_dist()(x)) * std::max(kl, Scalar(0));
  }
  return total;
}

/// (1 - eta) * a + eta * b, parameter by parameter. eta = 0 and eta = 1
/// return the endpoints bitwise.
template <typename Scalar>
SoftmaxPolicy<Scalar> interpolate_params(const SoftmaxPolicy<Scalar>& a,
                                         const SoftmaxPolicy<Scalar>& b, Scalar eta) {
  if (a.arch_tag() != b.arch_tag())
    throw ArchitectureMismatch("interpolate_params: " + a.arch_tag() + " vs " + b.arch_tag());
  if (!(eta >= Scalar(0) && eta <= Scalar(1)))
    throw std::invalid_argument("interpolate_params: eta must lie in [0, 1]");
  if (eta == Scalar(0)) return a;
  if (eta == Scalar(1)) return b;
  SoftmaxPolicy<Scalar> out = a;
  out.params() = (Scalar(1) - eta) * a.params() + eta * b.params();
  return out;
}

/// Adds scale * d log pi(y|x) / d params into grad.
template <typename Scalar>
void accumulate_log_prob_grad(const SoftmaxPolicy<Scalar>& pol, const SyntheticWorld& world,
                              PromptId x, ResponseId y, Scalar scale,
                              Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Vector dlogits = -probabilities(pol, world, x);
  dlogits(y) += Scalar(1);
  dlogits *= scale;
  const auto phi = world.prompt_features().row(x).transpose().template cast<Scalar>();
  const Eigen::Index d = pol.feat_dim();
  const Eigen::Index m = pol.n_responses();
  Eigen::Map<Matrix>(grad.data(), d, m).noalias() += phi * dlogits.transpose();
  Eigen::Map<Vector>(grad.data() + d * m, m) += dlogits;
}

}  // namespace itrlhf
