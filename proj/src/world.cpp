// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/world.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "itrlhf/reference_policies.hpp"
#include "itrlhf/rng.hpp"

namespace itrlhf {

namespace {

constexpr double kGoldHiddenGain = 1.5;
constexpr double kGoldOutputGain = 2.0;

Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

}  // namespace

SyntheticWorld::SyntheticWorld(Eigen::MatrixXd prompt_features, Eigen::MatrixXd response_features,
                               Eigen::VectorXd prompt_dist, Mlp<double> gold,
                               std::uint64_t world_seed)
    : prompt_features_(std::move(prompt_features)),
      response_features_(std::move(response_features)),
      prompt_dist_(std::move(prompt_dist)),
      gold_(std::move(gold)),
      world_seed_(world_seed) {
  if (prompt_features_.rows() < 1 || response_features_.rows() < 1 || prompt_features_.cols() < 1)
    throw std::invalid_argument("SyntheticWorld: empty feature matrices");
  if (prompt_features_.cols() != response_features_.cols())
    throw std::invalid_argument("SyntheticWorld: prompt/response feature widths differ");
  if (prompt_dist_.size() != prompt_features_.rows())
    throw std::invalid_argument("SyntheticWorld: prompt_dist length != n_prompts");
  if ((prompt_dist_.array() < 0.0).any() || std::abs(prompt_dist_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("SyntheticWorld: prompt_dist is not a probability vector");
  if (!prompt_features_.allFinite() || !response_features_.allFinite())
    throw std::invalid_argument("SyntheticWorld: non-finite features");
  if (gold_.input_dim() != joint_dim())
    throw ArchitectureMismatch("SyntheticWorld: gold network input width != 2d+1");

  const Eigen::Index p = n_prompts();
  const Eigen::Index m = n_responses();
  const Eigen::Index d = feat_dim();
  joint_.resize(joint_dim(), p * m);
  for (Eigen::Index x = 0; x < p; ++x) {
    for (Eigen::Index y = 0; y < m; ++y) {
      auto col = joint_.col(pair_index(x, y));
      col.head(d) = prompt_features_.row(x).transpose();
      col.segment(d, d) = response_features_.row(y).transpose();
      col(2 * d) = prompt_features_.row(x).dot(response_features_.row(y));
    }
  }
  const Eigen::VectorXd flat = gold_.forward_batch(joint_);
  gold_table_ = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(flat.data(), p, m);
}

void SyntheticWorld::check_prompt(PromptId x) const {
  if (x < 0 || x >= n_prompts())
    throw std::out_of_range("prompt id " + std::to_string(x) + " out of range [0, " +
                            std::to_string(n_prompts()) + ")");
}

void SyntheticWorld::check_ids(PromptId x, ResponseId y) const {
  check_prompt(x);
  if (y < 0 || y >= n_responses())
    throw std::out_of_range("response id " + std::to_string(y) + " out of range [0, " +
                            std::to_string(n_responses()) + ")");
}

SyntheticWorld make_world(std::uint64_t world_seed, int n_prompts, int n_responses, int feat_dim) {
  if (n_prompts <= 0 || n_responses <= 0 || feat_dim <= 0)
    throw std::invalid_argument("make_world: dimensions must be positive");
  if (n_prompts < 2 || n_responses < 4 || feat_dim < 2)
    throw std::invalid_argument("make_world: need P >= 2, M >= 4, d >= 2");

  Rng rng = make_rng(world_seed);
  Eigen::MatrixXd prompts = normal_matrix(n_prompts, feat_dim, rng);
  Eigen::MatrixXd responses = normal_matrix(n_responses, feat_dim, rng);

  std::vector<int> widths{2 * feat_dim + 1};
  widths.insert(widths.end(), kGoldHidden.begin(), kGoldHidden.end());
  widths.push_back(1);
  Mlp<double> gold(widths);
  gold.init_layers(0, gold.n_layers() - 1, rng, kGoldHiddenGain);
  gold.init_layers(gold.n_layers() - 1, gold.n_layers(), rng, kGoldOutputGain);

  Eigen::VectorXd rho = Eigen::VectorXd::Constant(n_prompts, 1.0 / n_prompts);
  return SyntheticWorld(std::move(prompts), std::move(responses), std::move(rho), std::move(gold),
                        world_seed);
}

Eigen::VectorXd joint_feature(const SyntheticWorld& world, PromptId x, ResponseId y) {
  world.check_ids(x, y);
  return world.joint_features().col(world.pair_index(x, y));
}

double gold_reward(const SyntheticWorld& world, PromptId x, ResponseId y) {
  world.check_ids(x, y);
  return world.gold_table()(x, y);
}

// ---------------------------------------------------------------------------

Policy make_sft_policy(const SyntheticWorld& world, double temperature, int n_demos,
                       std::uint64_t seed, const SftSettings& settings) {
  if (!(temperature > 0.0)) throw std::invalid_argument("make_sft_policy: temperature must be > 0");
  if (n_demos < 1) throw std::invalid_argument("make_sft_policy: n_demos must be >= 1");

  const Eigen::Index p = world.n_prompts();
  const Eigen::Index m = world.n_responses();
  Rng rng = make_rng(seed);

  // Demonstrations only enter the likelihood through their counts.
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(p, m);
  for (int i = 0; i < n_demos; ++i) {
    const PromptId x = sample_categorical(world.prompt_dist(), rng);
    const Eigen::VectorXd boltzmann = softmax(Eigen::VectorXd(world.gold_table().row(x).transpose() / temperature));
    counts(x, sample_categorical(boltzmann, rng)) += 1.0;
  }
  counts /= static_cast<double>(n_demos);
  const Eigen::VectorXd prompt_mass = counts.rowwise().sum();

  Policy pol = Policy::zeros_like(world);
  Eigen::VectorXd grad(pol.params().size());
  for (int step = 0; step < settings.steps; ++step) {
    grad.setZero();
    Eigen::Map<Eigen::MatrixXd> grad_w(grad.data(), world.feat_dim(), m);
    Eigen::Map<Eigen::VectorXd> grad_b(grad.data() + world.feat_dim() * m, m);
    for (PromptId x = 0; x < p; ++x) {
      if (prompt_mass(x) == 0.0) continue;
      // d(-mean log-lik)/d logits = mass_x * pi(.|x) - counts_x
      const Eigen::VectorXd dlogits =
          prompt_mass(x) * probabilities(pol, world, x) - counts.row(x).transpose();
      grad_w.noalias() += world.prompt_features().row(x).transpose() * dlogits.transpose();
      grad_b += dlogits;
    }
    pol.params() -= settings.step_size * grad;
  }
  return pol;
}

Eigen::MatrixXd GreedyPolicy::probability_table(Eigen::Index n_responses) const {
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(action.size()), n_responses);
  for (std::size_t x = 0; x < action.size(); ++x) table(static_cast<Eigen::Index>(x), action[x]) = 1.0;
  return table;
}

std::pair<GreedyPolicy, double> brute_force_gold_optimal(const SyntheticWorld& world) {
  GreedyPolicy greedy;
  double value = 0.0;
  for (PromptId x = 0; x < world.n_prompts(); ++x) {
    ResponseId best = 0;
    for (ResponseId y = 1; y < world.n_responses(); ++y)
      if (world.gold_table()(x, y) > world.gold_table()(x, best)) best = y;
    greedy.action.push_back(best);
    value += world.prompt_dist()(x) * world.gold_table()(x, best);
  }
  return {std::move(greedy), value};
}

double expected_score(const Eigen::MatrixXd& probs, const SyntheticWorld& world,
                      const Eigen::MatrixXd& table) {
  if (probs.rows() != table.rows() || probs.cols() != table.cols() ||
      probs.rows() != world.n_prompts())
    throw std::invalid_argument("expected_score: table shape mismatch");
  return world.prompt_dist().dot(probs.cwiseProduct(table).rowwise().sum());
}

double expected_score(const Policy& pol, const SyntheticWorld& world, const Eigen::MatrixXd& table) {
  return expected_score(probability_table(pol, world), world, table);
}

}  // namespace itrlhf
