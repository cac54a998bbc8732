// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

#include "itrlhf/policy.hpp"
#include "itrlhf/reward_model.hpp"

namespace itrlhf {

/// Parameter snapshot file:
///   8 bytes   magic "ITRLHFS1"
///   8 bytes   header length H, little-endian uint64
///   H bytes   UTF-8 JSON header; always has "count" and "dtype": "f64le"
///   8*count   parameters as little-endian IEEE-754 doubles
struct Snapshot {
  nlohmann::json header;
  Eigen::VectorXd params;
};

inline constexpr std::string_view kSnapshotMagic = "ITRLHFS1";

void write_snapshot(const std::filesystem::path& path, nlohmann::json header,
                    const Eigen::VectorXd& params);
Snapshot read_snapshot(const std::filesystem::path& path);

/// FNV-1a over the raw parameter bytes, as 16 hex digits.
std::string params_hash(const Eigen::VectorXd& params);
std::string fnv1a_hex(std::string_view bytes);

void save_policy(const std::filesystem::path& path, const Policy& pol, int iteration, long step);
Policy load_policy(const std::filesystem::path& path);

void save_reward_model(const std::filesystem::path& path, const RewardModel& rm, int iteration);
RewardModel load_reward_model(const std::filesystem::path& path);

}  // namespace itrlhf
