// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "itrlhf/policy_opt.hpp"
#include "itrlhf/preference.hpp"
#include "itrlhf/reward_model.hpp"
#include "itrlhf/strategies.hpp"

namespace itrlhf {

struct WorldParams {
  std::uint64_t seed = 7;
  int n_prompts = 8;
  int n_responses = 32;
  int feat_dim = 4;
};

struct SftParams {
  double temperature = 2.0;
  int n_demos = 1000;
  std::uint64_t seed = 1;
};

struct RunConfig {
  WorldParams world;
  SftParams sft;

  int n_iterations = 4;
  int n_seeds = 8;
  std::uint64_t master_seed = 0;
  int jobs = 1;

  DataStrategy data_strategy = DataStrategy::Concatenate;
  RewardStrategy rm_strategy = RewardStrategy::TakeLast;
  InitStrategy policy_init_strategy = InitStrategy::FromSft;
  double eta = 0.5;
  RemainderPolicy sample_remainder = RemainderPolicy::MostRecent;

  LabelMode label_mode = LabelMode::BtSample;
  int n_prefs = 1000;

  PpoHyper ppo;
  RmHyper rm;

  int holdout_size = 2000;
  double bucket_width = 0.25;
  /// Fixed MMD bandwidth; the median heuristic when unset.
  std::optional<double> mmd_bandwidth;

  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
/// keys and malformed values raise ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, sorted by key, one `key = value` per
/// line. Feeding it back to parse_config reproduces the same config.
std::string canonical_config(const RunConfig& cfg);

/// FNV-1a of canonical_config; independent of key order in the source file.
std::string config_hash(const RunConfig& cfg);

/// Human-readable description of every key, its default and allowed values.
std::string config_schema_doc();

}  // namespace itrlhf
