// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/policy_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "itrlhf/metrics.hpp"

namespace itrlhf {

void PpoHyper::validate() const {
  if (steps < 0) throw ConfigError("ppo.steps must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("ppo.lr must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("ppo.beta must be >= 0");
  if (!(clip > 0.0 && clip <= 1.0)) throw ConfigError("ppo.clip must lie in (0, 1]");
  if (rollouts_per_step < 1) throw ConfigError("ppo.rollouts must be >= 1");
  if (minibatch < 1) throw ConfigError("ppo.minibatch must be >= 1");
  if (eval_every < 1) throw ConfigError("ppo.eval_every must be >= 1");
}

double ppo_reward(const CombinedReward& cr, const Policy& pol, const Policy& init,
                  const SyntheticWorld& world, PromptId x, ResponseId y, double beta) {
  world.check_ids(x, y);
  const double proxy = cr.score(world, x, y);
  if (beta == 0.0) return proxy;
  const double log_ratio = log_softmax(logits(pol, world, x))(y) - log_softmax(logits(init, world, x))(y);
  return proxy - beta * log_ratio;
}

std::pair<double, Eigen::VectorXd> clipped_surrogate(const Policy& pol, const SyntheticWorld& world,
                                                     std::span<const Rollout> batch, double clip) {
  if (batch.empty()) throw std::invalid_argument("clipped_surrogate: empty batch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pol.params().size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double objective = 0.0;
  for (const auto& s : batch) {
    const double log_prob = log_softmax(logits(pol, world, s.x))(s.y);
    const double ratio = std::exp(log_prob - s.old_log_prob);
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    const double unclipped_term = ratio * s.advantage;
    const double clipped_term = clipped * s.advantage;
    if (clipped_term < unclipped_term) {
      objective += clipped_term;
      continue;  // flat in the parameters
    }
    objective += unclipped_term;
    // d(ratio)/d(params) = ratio * d log pi
    accumulate_log_prob_grad(pol, world, s.x, s.y, ratio * s.advantage * inv_n, grad);
  }
  return {objective * inv_n, std::move(grad)};
}

std::vector<PromptId> draw_holdout_prompts(const SyntheticWorld& world, int n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("draw_holdout_prompts: need n >= 2");
  std::vector<PromptId> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = sample_categorical(world.prompt_dist(), rng);
  return out;
}

namespace {

CheckpointRow evaluate(const Policy& pol, const Policy& init, const Eigen::MatrixXd& reward_table,
                       const SyntheticWorld& world, const EvalSetup& eval, long step, Rng& eval_rng) {
  CheckpointRow row;
  row.iteration = eval.iteration;
  row.step = step;
  row.kl_to_init = analytic_kl(pol, init, world);
  row.kl_to_sft = eval.sft ? analytic_kl(pol, *eval.sft, world) : row.kl_to_init;

  const Eigen::MatrixXd probs = probability_table(pol, world);
  const auto n = static_cast<Eigen::Index>(eval.holdout_prompts.size());
  row.gold_samples.resize(n);
  row.proxy_samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PromptId x = eval.holdout_prompts[static_cast<std::size_t>(i)];
    const ResponseId y = sample_categorical(probs.row(x), eval_rng);
    row.gold_samples(i) = world.gold_table()(x, y);
    row.proxy_samples(i) = reward_table(x, y);
  }
  row.mean_gold = row.gold_samples.mean();
  row.mean_proxy = row.proxy_samples.mean();
  try {
    row.mmd = rm_discrepancy(ScoreSample(row.proxy_samples, "proxy"), ScoreSample(row.gold_samples, "gold"));
  } catch (const DegenerateSampleError&) {
    row.mmd = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

}  // namespace

PolicyTrainResult train_policy(const Policy& init, const Eigen::MatrixXd& reward_table,
                               const SyntheticWorld& world, const PpoHyper& hp, Rng& rng,
                               const EvalSetup& eval) {
  hp.validate();
  check_compatible(init, world);
  if (reward_table.rows() != world.n_prompts() || reward_table.cols() != world.n_responses())
    throw std::invalid_argument("train_policy: reward table shape mismatch");
  if (!reward_table.allFinite()) throw TrainingDiverged("train_policy", "reward table is not finite");
  if (eval.holdout_prompts.size() < 2) throw std::invalid_argument("train_policy: holdout set too small");

  const Policy& kl_ref = (hp.kl_reference == KlReference::Sft && eval.sft) ? *eval.sft : init;
  const Eigen::MatrixXd ref_log_probs = log_prob_table(kl_ref, world);

  PolicyTrainResult result{init, {}};
  Policy& pol = result.policy;
  Optimizer<double> opt(hp.optimizer, hp.lr, pol.params().size());
  Rng eval_rng = make_rng(eval.eval_seed);

  std::vector<Rollout> rollouts(static_cast<std::size_t>(hp.rollouts_per_step));
  std::vector<std::size_t> order(rollouts.size());
  std::vector<Rollout> batch;
  std::vector<double> rewards(rollouts.size());

  for (long step = 0;; ++step) {
    if (step % hp.eval_every == 0 || step == hp.steps)
      result.checkpoints.push_back(evaluate(pol, init, reward_table, world, eval, step, eval_rng));
    if (step == hp.steps) break;

    const Eigen::MatrixXd old_log_probs = log_prob_table(pol, world);
    const Eigen::MatrixXd old_probs = old_log_probs.array().exp();
    double reward_sum = 0.0;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      const PromptId x = sample_categorical(world.prompt_dist(), rng);
      const ResponseId y = sample_categorical(old_probs.row(x), rng);
      const double log_ratio = old_log_probs(x, y) - ref_log_probs(x, y);
      rewards[i] = reward_table(x, y) - hp.beta * log_ratio;
      reward_sum += rewards[i];
      rollouts[i] = {x, y, old_log_probs(x, y), 0.0};
    }
    const double baseline = reward_sum / static_cast<double>(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) rollouts[i].advantage = rewards[i] - baseline;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.minibatch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hp.minibatch));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(rollouts[order[i]]);
      auto [objective, grad] = clipped_surrogate(pol, world, batch, hp.clip);
      if (!std::isfinite(objective) || !grad.allFinite())
        throw TrainingDiverged("train_policy", "non-finite surrogate at step " + std::to_string(step));
      // ascend the surrogate
      opt.step(pol.params(), -grad);
    }
    if (!pol.params().allFinite())
      throw TrainingDiverged("train_policy", "non-finite policy parameters at step " + std::to_string(step));
  }
  return result;
}

PolicyTrainResult train_policy(const Policy& init, const CombinedReward& cr,
                               const SyntheticWorld& world, const PpoHyper& hp, Rng& rng,
                               const EvalSetup& eval) {
  return train_policy(init, cr.table(world), world, hp, rng, eval);
}

Policy init_policy(InitStrategy strategy, const Policy& pi_sft, const std::vector<Policy>& prev_inits,
                   const std::vector<Policy>& prev_trained, double eta) {
  if (prev_inits.size() != prev_trained.size())
    throw std::invalid_argument("init_policy: init and trained histories differ in length");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("init_policy: eta must lie in [0, 1]");
  if (prev_trained.empty()) return pi_sft;
  switch (strategy) {
    case InitStrategy::FromSft:
      return pi_sft;
    case InitStrategy::TakeLast:
      return prev_trained.back();
    case InitStrategy::Liti:
      return interpolate_params(prev_inits.back(), prev_trained.back(), eta);
  }
  throw std::logic_error("init_policy: unknown strategy");
}

}  // namespace itrlhf
