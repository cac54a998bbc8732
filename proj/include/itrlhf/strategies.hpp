// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <string_view>

#include "itrlhf/errors.hpp"

namespace itrlhf {

enum class DataStrategy { TakeLast, Concatenate, Sample, SampleExclusive };
enum class RewardStrategy { TakeLast, EnsembleMean, WorstCase, WeightAverage };
enum class InitStrategy { FromSft, TakeLast, Liti };
enum class LabelMode { BtSample, Argmax };

namespace detail {
template <typename E, std::size_t N>
struct Names {
  std::array<std::pair<E, std::string_view>, N> entries;

  std::string_view name(E e) const {
    for (const auto& [v, n] : entries)
      if (v == e) return n;
    return "?";
  }
  E parse(std::string_view text, std::string_view what) const {
    for (const auto& [v, n] : entries)
      if (n == text) return v;
    std::string valid;
    for (const auto& entry : entries) valid += (valid.empty() ? "" : ", ") + std::string(entry.second);
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(text) +
                      "' (valid: " + valid + ")");
  }
};

inline constexpr Names<DataStrategy, 4> kDataNames{{{{DataStrategy::TakeLast, "take_last"},
                                                     {DataStrategy::Concatenate, "concatenate"},
                                                     {DataStrategy::Sample, "sample"},
                                                     {DataStrategy::SampleExclusive, "sample_exclusive"}}}};
inline constexpr Names<RewardStrategy, 4> kRewardNames{{{{RewardStrategy::TakeLast, "take_last"},
                                                         {RewardStrategy::EnsembleMean, "ensemble_mean"},
                                                         {RewardStrategy::WorstCase, "worst_case"},
                                                         {RewardStrategy::WeightAverage, "weight_average"}}}};
inline constexpr Names<InitStrategy, 3> kInitNames{{{{InitStrategy::FromSft, "from_sft"},
                                                     {InitStrategy::TakeLast, "take_last"},
                                                     {InitStrategy::Liti, "liti"}}}};
inline constexpr Names<LabelMode, 2> kLabelNames{{{{LabelMode::BtSample, "bt-sample"},
                                                   {LabelMode::Argmax, "argmax"}}}};
}  // namespace detail

inline std::string_view to_string(DataStrategy s) { return detail::kDataNames.name(s); }
inline std::string_view to_string(RewardStrategy s) { return detail::kRewardNames.name(s); }
inline std::string_view to_string(InitStrategy s) { return detail::kInitNames.name(s); }
inline std::string_view to_string(LabelMode s) { return detail::kLabelNames.name(s); }

inline DataStrategy parse_data_strategy(std::string_view s) {
  return detail::kDataNames.parse(s, "data strategy");
}
inline RewardStrategy parse_reward_strategy(std::string_view s) {
  return detail::kRewardNames.parse(s, "reward strategy");
}
inline InitStrategy parse_init_strategy(std::string_view s) {
  return detail::kInitNames.parse(s, "policy init strategy");
}
inline LabelMode parse_label_mode(std::string_view s) {
  return detail::kLabelNames.parse(s, "label mode");
}

}  // namespace itrlhf
