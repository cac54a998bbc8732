// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/preference.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "itrlhf/reward_model.hpp"

namespace itrlhf {

int label_preference(double gold0, double gold1, LabelMode mode, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (mode == LabelMode::Argmax) {
    if (gold0 > gold1) return 1;
    if (gold0 < gold1) return 0;
    return unit(rng) < 0.5 ? 1 : 0;
  }
  return unit(rng) < bt_probability(gold0, gold1) ? 1 : 0;
}

PreferenceDataset collect_preferences(const Policy& pol, const SyntheticWorld& world, int n,
                                      LabelMode mode, Rng& rng, int iteration) {
  if (n < 1) throw std::invalid_argument("collect_preferences: N must be >= 1");
  check_compatible(pol, world);
  const Eigen::MatrixXd probs = probability_table(pol, world);

  PreferenceDataset out;
  out.iteration = iteration;
  out.examples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const PromptId x = sample_categorical(world.prompt_dist(), rng);
    const auto row = probs.row(x);
    const ResponseId y0 = sample_categorical(row, rng);
    ResponseId y1 = sample_categorical(row, rng);
    for (int attempt = 0; y1 == y0 && attempt < kMaxCollisionRetries; ++attempt)
      y1 = sample_categorical(row, rng);
    if (y1 == y0) {
      ++out.skipped;
      continue;
    }
    const int p = label_preference(world.gold_table()(x, y0), world.gold_table()(x, y1), mode, rng);
    out.examples.push_back({x, y0, y1, p});
  }
  return out;
}

std::vector<int> sample_quotas(const std::vector<PreferenceDataset>& datasets, int n_target,
                               RemainderPolicy remainder) {
  const int k = static_cast<int>(datasets.size());
  std::size_t available = 0;
  for (const auto& d : datasets) available += d.size();
  if (n_target < 0 || static_cast<std::size_t>(n_target) > available)
    throw std::invalid_argument("combine_data: N_target " + std::to_string(n_target) +
                                " is infeasible with " + std::to_string(available) + " examples");

  // Priority order for remainders and redistribution.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  if (remainder == RemainderPolicy::MostRecent) std::reverse(order.begin(), order.end());

  std::vector<int> quota(static_cast<std::size_t>(k), n_target / k);
  for (int i = 0; i < n_target % k; ++i) ++quota[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];

  int deficit = 0;
  for (int i = 0; i < k; ++i) {
    const int cap = static_cast<int>(datasets[static_cast<std::size_t>(i)].size());
    if (quota[static_cast<std::size_t>(i)] > cap) {
      deficit += quota[static_cast<std::size_t>(i)] - cap;
      quota[static_cast<std::size_t>(i)] = cap;
    }
  }
  for (int idx : order) {
    if (deficit == 0) break;
    const int cap = static_cast<int>(datasets[static_cast<std::size_t>(idx)].size());
    const int extra = std::min(deficit, cap - quota[static_cast<std::size_t>(idx)]);
    quota[static_cast<std::size_t>(idx)] += extra;
    deficit -= extra;
  }
  return quota;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

PreferenceDataset combine_data(DataStrategy strategy, const std::vector<PreferenceDataset>& datasets,
                               int n_target, Rng& rng, RemainderPolicy remainder) {
  if (datasets.empty()) throw std::invalid_argument("combine_data: no datasets");

  PreferenceDataset out;
  out.iteration = datasets.back().iteration;

  switch (strategy) {
    case DataStrategy::TakeLast:
      out = datasets.back();
      out.skipped = 0;
      return out;
    case DataStrategy::Concatenate:
      for (const auto& d : datasets) out.examples.insert(out.examples.end(), d.examples.begin(), d.examples.end());
      return out;
    case DataStrategy::Sample:
    case DataStrategy::SampleExclusive:
      break;
  }

  const std::vector<int> quota = sample_quotas(datasets, n_target, remainder);
  const bool exclusive = strategy == DataStrategy::SampleExclusive;
  std::set<PromptId> used_prompts;

  // Newest datasets are filled first so the exclusivity constraint favours
  // the current policy's distribution; output order is by dataset then index.
  std::vector<std::vector<std::size_t>> chosen(datasets.size());
  for (std::size_t di = datasets.size(); di-- > 0;) {
    const auto& d = datasets[di];
    const auto want = static_cast<std::size_t>(quota[di]);
    if (want == d.size()) {
      chosen[di].resize(d.size());
      std::iota(chosen[di].begin(), chosen[di].end(), std::size_t{0});
    } else {
      const std::vector<std::size_t> perm = shuffled_indices(d.size(), rng);
      if (!exclusive) {
        chosen[di].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(want));
      } else {
        std::vector<bool> taken(d.size(), false);
        for (std::size_t i : perm) {
          if (chosen[di].size() == want) break;
          if (used_prompts.count(d.examples[i].x)) continue;
          used_prompts.insert(d.examples[i].x);
          chosen[di].push_back(i);
          taken[i] = true;
        }
        for (std::size_t i : perm) {
          if (chosen[di].size() == want) break;
          if (taken[i]) continue;
          chosen[di].push_back(i);
          taken[i] = true;
          ++out.exclusivity_warnings;
        }
      }
    }
    if (exclusive && want == d.size()) {
      for (std::size_t i : chosen[di]) {
        if (!used_prompts.insert(d.examples[i].x).second) ++out.exclusivity_warnings;
      }
    }
    std::sort(chosen[di].begin(), chosen[di].end());
  }
  for (std::size_t di = 0; di < datasets.size(); ++di)
    for (std::size_t i : chosen[di]) out.examples.push_back(datasets[di].examples[i]);
  return out;
}

}  // namespace itrlhf
