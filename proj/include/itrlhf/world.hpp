// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "itrlhf/mlp.hpp"

namespace itrlhf {

using PromptId = Eigen::Index;
using ResponseId = Eigen::Index;

/// Hidden widths of the gold reward network.
inline const std::vector<int> kGoldHidden{16, 16};

/// Finite prompt/response task with a hidden gold reward. Immutable once
/// built; share it read-only across runs.
class SyntheticWorld {
 public:
  SyntheticWorld(Eigen::MatrixXd prompt_features, Eigen::MatrixXd response_features,
                 Eigen::VectorXd prompt_dist, Mlp<double> gold, std::uint64_t world_seed);

  Eigen::Index n_prompts() const { return prompt_features_.rows(); }
  Eigen::Index n_responses() const { return response_features_.rows(); }
  Eigen::Index feat_dim() const { return prompt_features_.cols(); }
  Eigen::Index joint_dim() const { return 2 * feat_dim() + 1; }
  std::uint64_t world_seed() const { return world_seed_; }

  const Eigen::MatrixXd& prompt_features() const { return prompt_features_; }
  const Eigen::MatrixXd& response_features() const { return response_features_; }
  const Eigen::VectorXd& prompt_dist() const { return prompt_dist_; }
  const Mlp<double>& gold() const { return gold_; }

  /// Joint features of every (x, y) pair, one column per pair at x*M + y.
  const Eigen::MatrixXd& joint_features() const { return joint_; }
  /// R*(x, y) for every pair, P x M.
  const Eigen::MatrixXd& gold_table() const { return gold_table_; }

  Eigen::Index pair_index(PromptId x, ResponseId y) const { return x * n_responses() + y;  }
  void check_ids(PromptId x, ResponseId y) const;
  void check_prompt(PromptId x) const;

 private:
  Eigen::MatrixXd prompt_features_;
  Eigen::MatrixXd response_features_;
  Eigen::VectorXd prompt_dist_;
  Mlp<double> gold_;
  std::uint64_t world_seed_;
  Eigen::MatrixXd joint_;
  Eigen::MatrixXd gold_table_;
};

/// Standard-normal features, a random 16-16 tanh gold network and uniform
/// prompt distribution, all from `world_seed`.
SyntheticWorld make_world(std::uint64_t world_seed, int n_prompts, int n_responses, int feat_dim);

/// [prompt features, response features, <prompt, response>].
Eigen::VectorXd joint_feature(const SyntheticWorld& world, PromptId x, ResponseId y);

double gold_reward(const SyntheticWorld& world, PromptId x, ResponseId y);

}  // namespace itrlhf
