// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "itrlhf/mlp.hpp"
#include "itrlhf/optimizer.hpp"
#include "itrlhf/preference_data.hpp"
#include "itrlhf/strategies.hpp"
#include "itrlhf/world.hpp"

namespace itrlhf {

/// Proxy reward: an MLP over joint features whose body comes from a shared
/// base seed and whose output layer (head) comes from a per-model seed.
struct RewardModel {
  Mlp<double> net;
  std::uint64_t base_seed = 0;
  std::uint64_t head_seed = 0;

  std::string arch_tag() const { return net.arch_tag(); }
};

struct RmHyper {
  std::vector<int> hidden{16, 16};
  int epochs = 5;
  int batch_size = 32;
  double lr = 1e-2;
  OptimizerKind optimizer = OptimizerKind::Adam;
  bool train_body = true;
};

RewardModel make_reward_model(const SyntheticWorld& world, const std::vector<int>& hidden,
                              std::uint64_t base_seed, std::uint64_t head_seed);

double rm_score(const RewardModel& rm, const SyntheticWorld& world, PromptId x, ResponseId y);

/// Scores for every (x, y) pair, P x M.
Eigen::MatrixXd score_table(const RewardModel& rm, const SyntheticWorld& world);

/// P(y0 > y1) = 1 / (1 + exp(r1 - r0)), evaluated without overflow.
double bt_probability(double r0, double r1);

/// Mean Bradley-Terry cross-entropy over the batch and its gradient with
/// respect to every network parameter.
std::pair<double, Eigen::VectorXd> rm_loss_and_grad(const RewardModel& rm,
                                                    std::span<const PreferenceExample> batch,
                                                    const SyntheticWorld& world);

double rm_loss(const RewardModel& rm, std::span<const PreferenceExample> batch,
               const SyntheticWorld& world);

struct RmTrainLog {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int updates = 0;
};

RewardModel train_rm(std::uint64_t base_seed, std::uint64_t head_seed, const PreferenceDataset& data,
                     const RmHyper& hp, const SyntheticWorld& world, RmTrainLog* log = nullptr);

/// Fraction of pairs whose proxy ordering matches the gold ordering
/// (gold ties are skipped).
double pairwise_accuracy(const Eigen::MatrixXd& proxy_table, const SyntheticWorld& world,
                         std::span<const PreferenceExample> pairs);

/// R_k built from the list of proxy models trained so far.
class CombinedReward {
 public:
  CombinedReward(RewardStrategy strategy, std::vector<RewardModel> members);

  RewardStrategy strategy() const { return strategy_; }
  const std::vector<RewardModel>& members() const { return members_; }
  /// The mean-parameter model (WeightAverage) or the last member otherwise.
  const RewardModel& effective_model() const { return effective_; }

  double score(const SyntheticWorld& world, PromptId x, ResponseId y) const;
  Eigen::MatrixXd table(const SyntheticWorld& world) const;

 private:
  RewardStrategy strategy_;
  std::vector<RewardModel> members_;
  RewardModel effective_;
};

double combined_score(const CombinedReward& cr, const SyntheticWorld& world, PromptId x, ResponseId y);

}  // namespace itrlhf
