// SPDX-License-Identifier: Apache-2.0
#include "catch_amalgamated.hpp"

#include <random>

#include "itrlhf/preference.hpp"
#include "itrlhf/reward_model.hpp"

using namespace itrlhf;
using Catch::Matchers::WithinAbs;

namespace {

const SyntheticWorld& world() {
  static const SyntheticWorld w = make_world(7, 8, 32, 4);
  return w;
}

PreferenceDataset uniform_prefs(int n, std::uint64_t seed, LabelMode mode = LabelMode::BtSample) {
  Rng rng(seed);
  return collect_preferences(Policy::zeros_like(world()), world(), n, mode, rng);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST_CASE("zero head scores zero everywhere") {
  RewardModel rm = make_reward_model(world(), {16, 16}, 1, 2);
  rm.net.params().tail(rm.net.head_size()).setZero();
  CHECK(score_table(rm, world()).isZero(0.0));
}

TEST_CASE("same seeds give identical score tables") {
  const auto a = make_reward_model(world(), {16, 16}, 1, 2);
  const auto b = make_reward_model(world(), {16, 16}, 1, 2);
  CHECK(score_table(a, world()) == score_table(b, world()));
}

TEST_CASE("shared base seed shares the body, head seed changes the head") {
  const auto a = make_reward_model(world(), {16, 16}, 1, 2);
  const auto b = make_reward_model(world(), {16, 16}, 1, 3);
  const Eigen::Index body = a.net.head_offset();
  CHECK(a.net.params().head(body) == b.net.params().head(body));
  CHECK(a.net.params().tail(a.net.head_size()) != b.net.params().tail(b.net.head_size()));
}

TEST_CASE("fresh reward model is non-constant") {
  const Eigen::MatrixXd t = score_table(make_reward_model(world(), {16, 16}, 1, 2), world());
  CHECK(t.maxCoeff() > t.minCoeff());
}

TEST_CASE("score table agrees with pointwise scores") {
  const auto rm = make_reward_model(world(), {8}, 4, 5);
  const Eigen::MatrixXd t = score_table(rm, world());
  for (PromptId x = 0; x < 8; ++x)
    for (ResponseId y = 0; y < 32; y += 5) CHECK_THAT(t(x, y), WithinAbs(rm_score(rm, world(), x, y), 1e-13));
}

TEST_CASE("Bradley-Terry probability") {
  CHECK(bt_probability(0.3, 0.3) == 0.5);
  CHECK_THAT(bt_probability(std::log(3.0), 0.0), WithinAbs(0.75, 1e-15));
  CHECK_THAT(bt_probability(50.0, 0.0), WithinAbs(1.0, 1e-10));
  CHECK_THAT(bt_probability(0.0, 50.0), WithinAbs(0.0, 1e-10));
  CHECK(std::isfinite(bt_probability(1e308, -1e308)));
  CHECK(bt_probability(-800.0, 800.0) == 0.0);
}

TEST_CASE("Bradley-Terry antisymmetry and monotonicity") {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double a = n(rng), b = n(rng), c = n(rng);
    CHECK_THAT(bt_probability(a, b) + bt_probability(b, a), WithinAbs(1.0, 1e-15));
    if (a - b < c - b) CHECK(bt_probability(a, b) <= bt_probability(c, b));
  }
}

TEST_CASE("uninformative model has loss ln 2") {
  RewardModel rm = make_reward_model(world(), {16, 16}, 1, 2);
  rm.net.params().tail(rm.net.head_size()).setZero();
  const std::vector<PreferenceExample> one{{0, 1, 2, 1}};
  CHECK_THAT(rm_loss(rm, one, world()), WithinAbs(std::log(2.0), 1e-15));
}

TEST_CASE("labels agreeing with an extreme-margin model give tiny loss") {
  RewardModel rm = make_reward_model(world(), {16, 16}, 1, 2);
  rm.net.params().tail(rm.net.head_size()) *= 1000.0;
  const Eigen::MatrixXd t = score_table(rm, world());
  std::vector<PreferenceExample> batch;
  for (PromptId x = 0; x < 8; ++x)
    for (ResponseId y = 1; y < 32; ++y)
      if (std::abs(t(x, 0) - t(x, y)) > 1.0) batch.push_back({x, 0, y, t(x, 0) > t(x, y) ? 1 : 0});
  REQUIRE(batch.size() > 50);
  CHECK(rm_loss(rm, batch, world()) < 0.01);
}

TEST_CASE("loss gradient matches finite differences on every architecture") {
  const auto data = uniform_prefs(40, 2);
  for (const std::vector<int>& hidden : {std::vector<int>{}, std::vector<int>{8}, std::vector<int>{16, 16}}) {
    const auto rm = make_reward_model(world(), hidden, 3, 4);
    const auto [loss, grad] = rm_loss_and_grad(rm, data.examples, world());
    CHECK_THAT(loss, WithinAbs(rm_loss(rm, data.examples, world()), 1e-14));
    Rng rng(5);
    std::uniform_int_distribution<Eigen::Index> coord(0, grad.size() - 1);
    for (int c = 0; c < 20; ++c) {
      const Eigen::Index i = coord(rng);
      RewardModel plus = rm, minus = rm;
      plus.net.params()(i) += 1e-5;
      minus.net.params()(i) -= 1e-5;
      const double fd = (rm_loss(plus, data.examples, world()) - rm_loss(minus, data.examples, world())) / 2e-5;
      CHECK(rel_err(grad(i), fd) < 1e-4);
    }
  }
}

TEST_CASE("500 gold comparisons give a better-than-chance ranker") {
  const auto train = uniform_prefs(500, 6);
  const auto held = uniform_prefs(2000, 7);
  RmHyper hp;
  const auto rm = train_rm(1, 2, train, hp, world());
  CHECK(pairwise_accuracy(score_table(rm, world()), world(), held.examples) >= 0.6);
}

TEST_CASE("zero epochs returns the initialization") {
  RmHyper hp;
  hp.epochs = 0;
  const auto rm = train_rm(1, 2, uniform_prefs(50, 8), hp, world());
  CHECK(rm.net.params() == make_reward_model(world(), hp.hidden, 1, 2).net.params());
}

TEST_CASE("train_rm is bitwise deterministic") {
  const auto data = uniform_prefs(200, 9);
  RmHyper hp;
  RmTrainLog log_a, log_b;
  const auto a = train_rm(1, 2, data, hp, world(), &log_a);
  const auto b = train_rm(1, 2, data, hp, world(), &log_b);
  CHECK(a.net.params() == b.net.params());
  CHECK(log_a.final_loss == log_b.final_loss);
  CHECK(log_a.final_loss < log_a.initial_loss);
  CHECK(log_a.updates == 5 * 7);
}

TEST_CASE("frozen body leaves body parameters untouched") {
  RmHyper hp;
  hp.train_body = false;
  const auto rm = train_rm(1, 2, uniform_prefs(200, 10), hp, world());
  const auto init = make_reward_model(world(), hp.hidden, 1, 2);
  const Eigen::Index body = init.net.head_offset();
  CHECK(rm.net.params().head(body) == init.net.params().head(body));
  CHECK(rm.net.params().tail(init.net.head_size()) != init.net.params().tail(init.net.head_size()));
}

TEST_CASE("doubling data does not hurt ranking accuracy on average") {
  const auto held = uniform_prefs(2000, 11);
  RmHyper hp;
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto big = uniform_prefs(400, 100 + s);
    PreferenceDataset half = big;
    half.examples.resize(200);
    small += pairwise_accuracy(score_table(train_rm(1, 20 + s, half, hp, world()), world()), world(), held.examples);
    large += pairwise_accuracy(score_table(train_rm(1, 20 + s, big, hp, world()), world()), world(), held.examples);
  }
  CHECK(large >= small);
}

TEST_CASE("ensemble of identical models equals one model") {
  const auto rm = make_reward_model(world(), {16, 16}, 1, 2);
  const Eigen::MatrixXd single = score_table(rm, world());
  for (int k : {1, 2, 5}) {
    const CombinedReward cr(RewardStrategy::EnsembleMean, std::vector<RewardModel>(static_cast<std::size_t>(k), rm));
    CHECK((cr.table(world()) - single).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THAT(cr.score(world(), 3, 4), WithinAbs(single(3, 4), 1e-12));
  }
}

TEST_CASE("worst case over a dominated member picks that member") {
  const auto r = make_reward_model(world(), {16, 16}, 1, 2);
  RewardModel lower = r;
  lower.net.bias(lower.net.n_layers() - 1)(0) -= 1.0;
  const CombinedReward cr(RewardStrategy::WorstCase, {r, lower});
  CHECK((cr.table(world()) - (score_table(r, world()).array() - 1.0).matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("worst case never exceeds the ensemble mean") {
  for (int k = 1; k <= 5; ++k) {
    std::vector<RewardModel> members;
    for (int i = 0; i < k; ++i) members.push_back(make_reward_model(world(), {16, 16}, 1, 30 + i * k));
    const Eigen::MatrixXd wc = CombinedReward(RewardStrategy::WorstCase, members).table(world());
    const Eigen::MatrixXd em = CombinedReward(RewardStrategy::EnsembleMean, members).table(world());
    CHECK((wc.array() <= em.array() + 1e-15).all());
  }
}

TEST_CASE("weight average of a linear model is the mean-parameter model") {
  RewardModel a = make_reward_model(world(), {}, 1, 2);
  RewardModel b = a;
  a.net.params().setConstant(2.0);
  b.net.params().setConstant(4.0);
  const CombinedReward cr(RewardStrategy::WeightAverage, {a, b});
  CHECK(cr.effective_model().net.params().isApproxToConstant(3.0, 0.0));
  RewardModel c = a;
  c.net.params().setConstant(3.0);
  CHECK((cr.table(world()) - score_table(c, world())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weight average of nonlinear models averages parameters, not outputs") {
  // Distinct bodies; with a shared body the head is linear and both notions coincide.
  const auto a = make_reward_model(world(), {16, 16}, 1, 2);
  const auto b = make_reward_model(world(), {16, 16}, 5, 3);
  RewardModel mean = a;
  mean.net.params() = 0.5 * (a.net.params() + b.net.params());
  const CombinedReward cr(RewardStrategy::WeightAverage, {a, b});
  const Eigen::MatrixXd t = cr.table(world());
  CHECK((t - score_table(mean, world())).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd output_mean = 0.5 * (score_table(a, world()) + score_table(b, world()));
  CHECK((t - output_mean).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("weight average of copies reproduces the model") {
  const auto rm = make_reward_model(world(), {16, 16}, 1, 2);
  const CombinedReward cr(RewardStrategy::WeightAverage, {rm, rm, rm});
  CHECK((cr.table(world()) - score_table(rm, world())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weight average rejects mixed architectures") {
  const auto a = make_reward_model(world(), {16, 16}, 1, 2);
  const auto b = make_reward_model(world(), {8}, 1, 2);
  CHECK_THROWS_AS(CombinedReward(RewardStrategy::WeightAverage, {a, b}), ArchitectureMismatch);
}

TEST_CASE("take last uses the newest model") {
  const auto a = make_reward_model(world(), {16, 16}, 1, 2);
  const auto b = make_reward_model(world(), {16, 16}, 1, 3);
  const CombinedReward cr(RewardStrategy::TakeLast, {a, b});
  CHECK(cr.table(world()) == score_table(b, world()));
  CHECK(combined_score(cr, world(), 1, 1) == rm_score(b, world(), 1, 1));
}
