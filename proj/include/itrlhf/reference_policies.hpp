// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "itrlhf/policy.hpp"
#include "itrlhf/world.hpp"

namespace itrlhf {

struct SftSettings {
  int steps = 200;
  double step_size = 0.05;
};

/// Supervised reference policy: draws `n_demos` demonstrations from
/// softmax(R*(x, .) / temperature) with x ~ rho, then fits the softmax policy
/// to them by full-batch maximum likelihood from zero parameters.
Policy make_sft_policy(const SyntheticWorld& world, double temperature, int n_demos,
                       std::uint64_t seed, const SftSettings& settings = {});

/// Per-prompt deterministic choice. Not every such choice is reachable by
/// the linear softmax family, so the oracle keeps its own representation.
struct GreedyPolicy {
  std::vector<ResponseId> action;  // one per prompt

  /// One-hot P x M probability table.
  Eigen::MatrixXd probability_table(Eigen::Index n_responses) const;
};

/// argmax_y R*(x, y) per prompt (ties to the lowest response id) and the
/// exact expected gold reward E_rho[max_y R*(x, y)].
std::pair<GreedyPolicy, double> brute_force_gold_optimal(const SyntheticWorld& world);

/// E_{x~rho, y~pi}[table(x, y)] computed exactly.
double expected_score(const Policy& pol, const SyntheticWorld& world,
                      const Eigen::MatrixXd& table);

/// Same, for an explicit P x M probability table.
double expected_score(const Eigen::MatrixXd& probs, const SyntheticWorld& world,
                      const Eigen::MatrixXd& table);

}  // namespace itrlhf
