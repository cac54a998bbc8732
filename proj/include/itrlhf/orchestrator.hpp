// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "itrlhf/checkpoint.hpp"
#include "itrlhf/config.hpp"
#include "itrlhf/policy.hpp"
#include "itrlhf/world.hpp"

namespace itrlhf {

/// Per-iteration provenance written to the manifest.
struct IterationRecord {
  int iteration = 0;
  std::string collect_policy_hash;  // policy that generated D~_k (pi_{k-1})
  std::string init_policy_hash;
  std::string trained_policy_hash;
  std::string rm_hash;
  std::size_t collected = 0;
  int skipped = 0;
  std::size_t rm_train_size = 0;
  int exclusivity_warnings = 0;
  double rm_initial_loss = 0.0;
  double rm_final_loss = 0.0;
  long sequence = 0;  // completion order of the iteration within the run
};

struct RunArtifacts {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failed_stage;
  std::string diagnostic;
  std::vector<IterationRecord> iterations;
  /// Checkpoint summaries of every iteration (holdout sample vectors dropped).
  std::vector<CheckpointRow> rows;
};

/// Fixed inputs of an experiment: the world and the frozen SFT policy.
struct Experiment {
  SyntheticWorld world;
  Policy sft;
};

Experiment make_experiment(const RunConfig& cfg);

/// Iterated RLHF for one seed. Writes manifest.json, world.json,
/// prefs_iter{k}.csv, rm_iter{k}.bin, policy_iter{k}.bin, metrics.jsonl and
/// aggregate.csv into `dir`. Stage failures are recorded in the manifest
/// rather than thrown.
RunArtifacts run_iterated_rlhf(const RunConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);
RunArtifacts run_iterated_rlhf(const RunConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir,
                               const Experiment& experiment);

/// Seeds 0..n_seeds-1 under root/seed_{s}, run.jobs at a time, then the
/// cross-seed aggregate.csv and a sweep manifest in root.
std::vector<RunArtifacts> run_sweep(const RunConfig& cfg, const std::filesystem::path& root);

/// Checkpoint rows from a metrics.jsonl file.
std::vector<CheckpointRow> read_metrics(const std::filesystem::path& path);

/// One JSON object per line, fields in a fixed order.
std::string metrics_jsonl_line(const CheckpointRow& row, std::uint64_t seed);

/// Run directories matching a glob (sorted), expanded into seed_* subdirs
/// when a match is a sweep root.
std::vector<std::filesystem::path> expand_run_dirs(const std::string& pattern);

/// Aggregate CSV rebuilt from persisted metrics.jsonl files.
std::string aggregate_from_runs(const std::vector<std::filesystem::path>& run_dirs, double bucket_width);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace itrlhf
