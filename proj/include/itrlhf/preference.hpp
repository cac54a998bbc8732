// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "itrlhf/policy.hpp"
#include "itrlhf/preference_data.hpp"
#include "itrlhf/rng.hpp"
#include "itrlhf/strategies.hpp"
#include "itrlhf/world.hpp"

namespace itrlhf {

inline constexpr int kMaxCollisionRetries = 100;

/// Gold label for one comparison: 1 if y0 wins. BtSample draws from the
/// Bradley-Terry probability of the gold scores; Argmax compares them, with
/// a fair coin on exact ties.
int label_preference(double gold0, double gold1, LabelMode mode, Rng& rng);

/// N prompts from rho, two independent responses from `pol` for each, gold
/// labels. A prompt instance is dropped if y1 keeps colliding with y0.
PreferenceDataset collect_preferences(const Policy& pol, const SyntheticWorld& world, int n,
                                      LabelMode mode, Rng& rng, int iteration = 1);

enum class RemainderPolicy { MostRecent, Oldest };

/// Merges [D_1..D_k] into one training set. Sampling modes keep each
/// dataset's chosen examples in their original order.
PreferenceDataset combine_data(DataStrategy strategy, const std::vector<PreferenceDataset>& datasets,
                               int n_target, Rng& rng,
                               RemainderPolicy remainder = RemainderPolicy::MostRecent);

/// Per-dataset quotas used by the sampling modes: floor(N/k) each, one extra
/// for the r = N mod k most recent (or oldest) datasets, and any shortfall of
/// a small dataset moved to the others in the same priority order.
std::vector<int> sample_quotas(const std::vector<PreferenceDataset>& datasets, int n_target,
                               RemainderPolicy remainder);

}  // namespace itrlhf
