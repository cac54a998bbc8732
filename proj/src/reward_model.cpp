// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "itrlhf/rng.hpp"

namespace itrlhf {

namespace {

constexpr std::uint64_t kBodyStream = 0x626f6479;     // "body"
constexpr std::uint64_t kHeadStream = 0x68656164;     // "head"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"

// -log sigmoid(z), stable for either sign.
double softplus_neg(double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

RewardModel make_reward_model(const SyntheticWorld& world, const std::vector<int>& hidden,
                              std::uint64_t base_seed, std::uint64_t head_seed) {
  std::vector<int> widths{static_cast<int>(world.joint_dim())};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  RewardModel rm{Mlp<double>(widths), base_seed, head_seed};
  const std::size_t layers = rm.net.n_layers();
  Rng body = make_rng(mix64(base_seed ^ kBodyStream));
  rm.net.init_layers(0, layers - 1, body);
  Rng head = make_rng(mix64(head_seed ^ kHeadStream));
  rm.net.init_layers(layers - 1, layers, head);
  return rm;
}

double rm_score(const RewardModel& rm, const SyntheticWorld& world, PromptId x, ResponseId y) {
  world.check_ids(x, y);
  return rm.net.forward(world.joint_features().col(world.pair_index(x, y)));
}

Eigen::MatrixXd score_table(const RewardModel& rm, const SyntheticWorld& world) {
  const Eigen::VectorXd flat = rm.net.forward_batch(world.joint_features());
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), world.n_prompts(), world.n_responses());
}

double bt_probability(double r0, double r1) { return sigmoid(r0 - r1); }

double rm_loss(const RewardModel& rm, std::span<const PreferenceExample> batch,
               const SyntheticWorld& world) {
  if (batch.empty()) throw std::invalid_argument("rm_loss: empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    const double z = rm_score(rm, world, ex.x, ex.y0) - rm_score(rm, world, ex.x, ex.y1);
    total += ex.p == 1 ? softplus_neg(z) : softplus_neg(-z);
  }
  return total / static_cast<double>(batch.size());
}

std::pair<double, Eigen::VectorXd> rm_loss_and_grad(const RewardModel& rm,
                                                    std::span<const PreferenceExample> batch,
                                                    const SyntheticWorld& world) {
  if (batch.empty()) throw std::invalid_argument("rm_loss_and_grad: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(rm.net.params().size());
  double total = 0.0;
  for (const auto& ex : batch) {
    world.check_ids(ex.x, ex.y0);
    world.check_ids(ex.x, ex.y1);
    const auto f0 = world.joint_features().col(world.pair_index(ex.x, ex.y0));
    const auto f1 = world.joint_features().col(world.pair_index(ex.x, ex.y1));
    const double z = rm.net.forward(f0) - rm.net.forward(f1);
    total += ex.p == 1 ? softplus_neg(z) : softplus_neg(-z);
    // d loss / d z = sigmoid(z) - p
    const double dz = (sigmoid(z) - static_cast<double>(ex.p)) * inv_n;
    rm.net.forward_backward(f0, dz, grad);
    rm.net.forward_backward(f1, -dz, grad);
  }
  return {total * inv_n, std::move(grad)};
}

RewardModel train_rm(std::uint64_t base_seed, std::uint64_t head_seed, const PreferenceDataset& data,
                     const RmHyper& hp, const SyntheticWorld& world, RmTrainLog* log) {
  if (data.empty()) throw std::invalid_argument("train_rm: empty preference dataset");
  if (hp.batch_size < 1 || hp.epochs < 0) throw std::invalid_argument("train_rm: bad hyperparameters");

  RewardModel rm = make_reward_model(world, hp.hidden, base_seed, head_seed);
  const std::span<const PreferenceExample> all(data.examples);
  RmTrainLog local;
  local.initial_loss = rm_loss(rm, all, world);

  Optimizer<double> opt(hp.optimizer, hp.lr, rm.net.params().size());
  Rng rng = make_rng(mix64(head_seed ^ kShuffleStream));
  std::vector<std::size_t> order(data.size());
  std::vector<PreferenceExample> batch;
  batch.reserve(static_cast<std::size_t>(hp.batch_size));
  const Eigen::Index body_len = rm.net.head_offset();

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data.examples[order[i]]);
      auto [loss, grad] = rm_loss_and_grad(rm, batch, world);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw TrainingDiverged("train_rm", "reward model loss became non-finite at epoch " +
                                               std::to_string(epoch));
      if (!hp.train_body) grad.head(body_len).setZero();
      opt.step(rm.net.params(), grad);
      ++local.updates;
    }
  }
  local.final_loss = rm_loss(rm, all, world);
  if (log) *log = local;
  return rm;
}

double pairwise_accuracy(const Eigen::MatrixXd& proxy_table, const SyntheticWorld& world,
                         std::span<const PreferenceExample> pairs) {
  int agree = 0;
  int counted = 0;
  for (const auto& ex : pairs) {
    const double g = world.gold_table()(ex.x, ex.y0) - world.gold_table()(ex.x, ex.y1);
    if (g == 0.0) continue;
    const double r = proxy_table(ex.x, ex.y0) - proxy_table(ex.x, ex.y1);
    agree += (g > 0.0) == (r > 0.0);
    ++counted;
  }
  return counted ? static_cast<double>(agree) / counted : 0.0;
}

// ---------------------------------------------------------------------------

CombinedReward::CombinedReward(RewardStrategy strategy, std::vector<RewardModel> members)
    : strategy_(strategy), members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("CombinedReward: no members");
  if (strategy_ == RewardStrategy::WeightAverage) {
    std::vector<const Mlp<double>*> nets;
    for (const auto& m : members_) nets.push_back(&m.net);
    effective_ = RewardModel{Mlp<double>::average(nets), members_.front().base_seed, 0};
  } else {
    effective_ = members_.back();
  }
}

double CombinedReward::score(const SyntheticWorld& world, PromptId x, ResponseId y) const {
  switch (strategy_) {
    case RewardStrategy::TakeLast:
    case RewardStrategy::WeightAverage:
      return rm_score(effective_, world, x, y);
    case RewardStrategy::EnsembleMean: {
      double sum = 0.0;
      for (const auto& m : members_) sum += rm_score(m, world, x, y);
      return sum / static_cast<double>(members_.size());
    }
    case RewardStrategy::WorstCase: {
      double lo = rm_score(members_.front(), world, x, y);
      for (std::size_t i = 1; i < members_.size(); ++i) lo = std::min(lo, rm_score(members_[i], world, x, y));
      return lo;
    }
  }
  throw std::logic_error("CombinedReward: unknown strategy");
}

Eigen::MatrixXd CombinedReward::table(const SyntheticWorld& world) const {
  switch (strategy_) {
    case RewardStrategy::TakeLast:
    case RewardStrategy::WeightAverage:
      return score_table(effective_, world);
    case RewardStrategy::EnsembleMean: {
      Eigen::MatrixXd sum = score_table(members_.front(), world);
      for (std::size_t i = 1; i < members_.size(); ++i) sum += score_table(members_[i], world);
      return sum / static_cast<double>(members_.size());
    }
    case RewardStrategy::WorstCase: {
      Eigen::MatrixXd lo = score_table(members_.front(), world);
      for (std::size_t i = 1; i < members_.size(); ++i) lo = lo.cwiseMin(score_table(members_[i], world));
      return lo;
    }
  }
  throw std::logic_error("CombinedReward: unknown strategy");
}

double combined_score(const CombinedReward& cr, const SyntheticWorld& world, PromptId x, ResponseId y) {
  return cr.score(world, x, y);
}

}  // namespace itrlhf
