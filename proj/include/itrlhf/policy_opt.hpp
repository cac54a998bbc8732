// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "itrlhf/checkpoint.hpp"
#include "itrlhf/optimizer.hpp"
#include "itrlhf/policy.hpp"
#include "itrlhf/reward_model.hpp"
#include "itrlhf/rng.hpp"
#include "itrlhf/strategies.hpp"
#include "itrlhf/world.hpp"

namespace itrlhf {

enum class KlReference { Init, Sft };

struct PpoHyper {
  long steps = 6000;
  double lr = 1e-2;
  double beta = 1e-4;
  double clip = 0.2;
  int rollouts_per_step = 256;
  int minibatch = 32;
  long eval_every = 300;
  /// Recorded for provenance only: single-step episodes make GAE collapse
  /// to reward minus baseline.
  double gae_lambda = 0.95;
  OptimizerKind optimizer = OptimizerKind::Adam;
  KlReference kl_reference = KlReference::Init;

  void validate() const;
};

/// R(x, y) - beta * log(pi(y|x) / pi_init(y|x)).
double ppo_reward(const CombinedReward& cr, const Policy& pol, const Policy& init,
                  const SyntheticWorld& world, PromptId x, ResponseId y, double beta);

struct Rollout {
  PromptId x = 0;
  ResponseId y = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

/// Mean clipped surrogate min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
/// with ratio = pi(y|x) / exp(old_log_prob), and its gradient (to be
/// ascended). Where the clipped branch is strictly smaller the sample
/// contributes no gradient.
std::pair<double, Eigen::VectorXd> clipped_surrogate(const Policy& pol, const SyntheticWorld& world,
                                                     std::span<const Rollout> batch, double clip);

/// Holdout evaluation inputs shared by every iteration of a run.
struct EvalSetup {
  const Policy* sft = nullptr;
  std::vector<PromptId> holdout_prompts;
  std::uint64_t eval_seed = 0;
  int iteration = 1;
};

/// Fixed holdout prompts drawn i.i.d. from rho.
std::vector<PromptId> draw_holdout_prompts(const SyntheticWorld& world, int n, Rng& rng);

struct PolicyTrainResult {
  Policy policy;
  std::vector<CheckpointRow> checkpoints;
};

/// Bandit PPO against a fixed P x M reward table. Checkpoints at step 0,
/// every eval_every steps, and at the final step.
PolicyTrainResult train_policy(const Policy& init, const Eigen::MatrixXd& reward_table,
                               const SyntheticWorld& world, const PpoHyper& hp, Rng& rng,
                               const EvalSetup& eval);

PolicyTrainResult train_policy(const Policy& init, const CombinedReward& cr,
                               const SyntheticWorld& world, const PpoHyper& hp, Rng& rng,
                               const EvalSetup& eval);

/// pi_init_k from the history of inits [pi_init_1..pi_init_{k-1}] and trained
/// policies [pi_1..pi_{k-1}]; every strategy returns pi_sft at k = 1.
Policy init_policy(InitStrategy strategy, const Policy& pi_sft, const std::vector<Policy>& prev_inits,
                   const std::vector<Policy>& prev_trained, double eta);

}  // namespace itrlhf
