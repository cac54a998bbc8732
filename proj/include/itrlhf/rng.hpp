// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace itrlhf {

using Rng = std::mt19937_64;

/// Pipeline stages that each own an independent generator stream.
enum class Stage : std::uint64_t {
  Collect = 1,
  Combine = 2,
  RmHead = 3,
  RmShuffle = 4,
  Policy = 5,
  Eval = 6,
  Holdout = 7,
  RmBody = 8,
  Sft = 9,
};

constexpr std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Collect: return "collect";
    case Stage::Combine: return "combine";
    case Stage::RmHead: return "rm_head";
    case Stage::RmShuffle: return "rm_shuffle";
    case Stage::Policy: return "policy";
    case Stage::Eval: return "eval";
    case Stage::Holdout: return "holdout";
    case Stage::RmBody: return "rm_body";
    case Stage::Sft: return "sft";
  }
  return "unknown";
}

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for one stage of one iteration of one run. Each field is absorbed
/// through the bijective mixer, so distinct tuples map to distinct streams
/// except with probability ~2^-64 per pair.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t run_seed,
                                    std::uint64_t iteration, Stage stage) {
  std::uint64_t h = mix64(master_seed ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ run_seed);
  h = mix64(h ^ (iteration * 0x100000001b3ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(stage));
  return h;
}

/// Same-run streams that are shared by every seed (e.g. the reward-model body).
inline constexpr std::uint64_t kSharedRun = ~std::uint64_t{0};

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Inverse-CDF draw from a probability vector. Never returns an index with
/// zero probability.
template <typename Derived>
Eigen::Index sample_categorical(const Eigen::DenseBase<Derived>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = static_cast<double>(probs(i));
    if (p <= 0.0) continue;
    cumulative += p;
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace itrlhf
