// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/orchestrator.hpp"

#include <glob.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "itrlhf/metrics.hpp"
#include "itrlhf/policy_opt.hpp"
#include "itrlhf/preference.hpp"
#include "itrlhf/reference_policies.hpp"
#include "itrlhf/reward_model.hpp"
#include "itrlhf/rng.hpp"
#include "itrlhf/snapshot.hpp"

namespace itrlhf {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

namespace {

void append_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::app);
  if (!os) throw std::runtime_error("cannot append to " + path.string());
  os << text;
}

ojson world_json(const RunConfig& cfg, const Experiment& ex) {
  ojson j;
  j["world_seed"] = ex.world.world_seed();
  j["n_prompts"] = ex.world.n_prompts();
  j["n_responses"] = ex.world.n_responses();
  j["feat_dim"] = ex.world.feat_dim();
  j["gold_arch"] = ex.world.gold().arch_tag();
  j["gold_params_hash"] = params_hash(ex.world.gold().params());
  j["sft"] = {{"temperature", cfg.sft.temperature}, {"demos", cfg.sft.n_demos}, {"seed", cfg.sft.seed}};
  j["sft_policy_hash"] = params_hash(ex.sft.params());
  return j;
}

std::string prefs_csv(const PreferenceDataset& d) {
  std::ostringstream os;
  os << "x,y0,y1,p\n";
  for (const auto& e : d.examples) os << e.x << ',' << e.y0 << ',' << e.y1 << ',' << e.p << '\n';
  return os.str();
}

ojson config_json(const RunConfig& cfg) {
  ojson j = ojson::object();
  std::istringstream in(canonical_config(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

ojson iteration_json(const IterationRecord& r) {
  ojson j;
  j["iteration"] = r.iteration;
  j["sequence"] = r.sequence;
  j["collect_policy_hash"] = r.collect_policy_hash;
  j["init_policy_hash"] = r.init_policy_hash;
  j["trained_policy_hash"] = r.trained_policy_hash;
  j["rm_hash"] = r.rm_hash;
  j["collected"] = r.collected;
  j["skipped"] = r.skipped;
  j["rm_train_size"] = r.rm_train_size;
  j["exclusivity_warnings"] = r.exclusivity_warnings;
  j["rm_initial_loss"] = r.rm_initial_loss;
  j["rm_final_loss"] = r.rm_final_loss;
  j["files"] = {"prefs_iter" + std::to_string(r.iteration) + ".csv",
                "rm_iter" + std::to_string(r.iteration) + ".bin",
                "policy_iter" + std::to_string(r.iteration) + ".bin"};
  return j;
}

void write_manifest(const RunConfig& cfg, const RunArtifacts& art) {
  ojson j;
  j["config_text"] = canonical_config(cfg);
  j["config_hash"] = config_hash(cfg);
  j["config"] = config_json(cfg);
  j["seed"] = art.seed;
  j["status"] = art.ok ? "ok" : "failed";
  if (!art.ok) {
    j["failed_stage"] = art.failed_stage;
    j["diagnostic"] = art.diagnostic;
  }
  j["iterations"] = ojson::array();
  for (const auto& r : art.iterations) j["iterations"].push_back(iteration_json(r));
  ojson files = ojson::array({"manifest.json", "world.json", "metrics.jsonl"});
  for (const auto& r : art.iterations)
    for (const auto& f : iteration_json(r)["files"]) files.push_back(f);
  if (art.ok) files.push_back("aggregate.csv");
  j["files"] = files;
  write_text(art.dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace

std::string metrics_jsonl_line(const CheckpointRow& row, std::uint64_t seed) {
  ojson j;
  j["seed"] = seed;
  j["iteration"] = row.iteration;
  j["step"] = row.step;
  j["kl_to_sft"] = row.kl_to_sft;
  j["kl_to_init"] = row.kl_to_init;
  j["mean_proxy"] = row.mean_proxy;
  j["mean_gold"] = row.mean_gold;
  if (std::isfinite(row.mmd))
    j["mmd"] = row.mmd;
  else
    j["mmd"] = nullptr;
  return j.dump() + "\n";
}

std::vector<CheckpointRow> read_metrics(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<CheckpointRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CheckpointRow r;
    r.iteration = j.at("iteration").get<int>();
    r.step = j.at("step").get<long>();
    r.kl_to_sft = j.at("kl_to_sft").get<double>();
    r.kl_to_init = j.at("kl_to_init").get<double>();
    r.mean_proxy = j.at("mean_proxy").get<double>();
    r.mean_gold = j.at("mean_gold").get<double>();
    r.mmd = j.at("mmd").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("mmd").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

Experiment make_experiment(const RunConfig& cfg) {
  SyntheticWorld world = make_world(cfg.world.seed, cfg.world.n_prompts, cfg.world.n_responses, cfg.world.feat_dim);
  Policy sft = make_sft_policy(world, cfg.sft.temperature, cfg.sft.n_demos, cfg.sft.seed);
  return {std::move(world), std::move(sft)};
}

RunArtifacts run_iterated_rlhf(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  cfg.validate();
  return run_iterated_rlhf(cfg, seed, dir, make_experiment(cfg));
}

RunArtifacts run_iterated_rlhf(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir,
                               const Experiment& ex) {
  cfg.validate();
  const SyntheticWorld& world = ex.world;
  RunArtifacts art;
  art.dir = dir;
  art.seed = seed;
  fs::create_directories(dir);
  write_text(dir / "world.json", world_json(cfg, ex).dump(2) + "\n");
  write_text(dir / "metrics.jsonl", "");

  const std::uint64_t master = cfg.master_seed;
  const std::uint64_t rm_base_seed = derive_seed(master, kSharedRun, 0, Stage::RmBody);
  Rng holdout_rng = make_rng(derive_seed(master, seed, 0, Stage::Holdout));

  std::vector<PreferenceDataset> collected;
  std::vector<RewardModel> trained_rms;
  std::vector<Policy> inits;
  std::vector<Policy> trained;
  std::string stage = "holdout";
  try {
    EvalSetup eval;
    eval.sft = &ex.sft;
    eval.holdout_prompts = draw_holdout_prompts(world, cfg.holdout_size, holdout_rng);

    for (int k = 1; k <= cfg.n_iterations; ++k) {
      const auto uk = static_cast<std::uint64_t>(k);
      IterationRecord rec;
      rec.iteration = k;
      const Policy& previous = trained.empty() ? ex.sft : trained.back();

      stage = "collect";
      Rng collect_rng = make_rng(derive_seed(master, seed, uk, Stage::Collect));
      rec.collect_policy_hash = params_hash(previous.params());
      collected.push_back(collect_preferences(previous, world, cfg.n_prefs, cfg.label_mode, collect_rng, k));
      rec.collected = collected.back().size();
      rec.skipped = collected.back().skipped;
      write_text(dir / ("prefs_iter" + std::to_string(k) + ".csv"), prefs_csv(collected.back()));

      stage = "combine_data";
      Rng combine_rng = make_rng(derive_seed(master, seed, uk, Stage::Combine));
      const PreferenceDataset train_set =
          combine_data(cfg.data_strategy, collected, cfg.n_prefs, combine_rng, cfg.sample_remainder);
      rec.rm_train_size = train_set.size();
      rec.exclusivity_warnings = train_set.exclusivity_warnings;

      stage = "train_rm";
      RmTrainLog rm_log;
      trained_rms.push_back(train_rm(rm_base_seed, derive_seed(master, seed, uk, Stage::RmHead), train_set,
                                     cfg.rm, world, &rm_log));
      rec.rm_initial_loss = rm_log.initial_loss;
      rec.rm_final_loss = rm_log.final_loss;
      rec.rm_hash = params_hash(trained_rms.back().net.params());
      save_reward_model(dir / ("rm_iter" + std::to_string(k) + ".bin"), trained_rms.back(), k);

      stage = "combine_rm";
      const CombinedReward reward(cfg.rm_strategy, trained_rms);

      stage = "init_policy";
      Policy init = init_policy(cfg.policy_init_strategy, ex.sft, inits, trained, cfg.eta);
      rec.init_policy_hash = params_hash(init.params());

      stage = "train_policy";
      Rng policy_rng = make_rng(derive_seed(master, seed, uk, Stage::Policy));
      eval.eval_seed = derive_seed(master, seed, uk, Stage::Eval);
      eval.iteration = k;
      PolicyTrainResult result = train_policy(init, reward, world, cfg.ppo, policy_rng, eval);
      if (cfg.mmd_bandwidth) {
        for (auto& row : result.checkpoints) {
          try {
            row.mmd = rm_discrepancy(ScoreSample(row.proxy_samples), ScoreSample(row.gold_samples),
                                     cfg.mmd_bandwidth);
          } catch (const DegenerateSampleError&) {
            row.mmd = std::numeric_limits<double>::quiet_NaN();
          }
        }
      }
      rec.trained_policy_hash = params_hash(result.policy.params());
      save_policy(dir / ("policy_iter" + std::to_string(k) + ".bin"), result.policy, k, cfg.ppo.steps);

      stage = "write_metrics";
      std::string lines;
      for (auto& row : result.checkpoints) {
        lines += metrics_jsonl_line(row, seed);
        row.gold_samples.resize(0);
        row.proxy_samples.resize(0);
        art.rows.push_back(row);
      }
      append_text(dir / "metrics.jsonl", lines);

      inits.push_back(std::move(init));
      trained.push_back(std::move(result.policy));
      rec.sequence = k;
      art.iterations.push_back(rec);
    }

    stage = "aggregate";
    write_text(dir / "aggregate.csv", aggregate_csv(aggregate_by_iteration(art.rows, cfg.bucket_width)));
    art.ok = true;
  } catch (const TrainingDiverged& e) {
    art.failed_stage = e.stage();
    art.diagnostic = e.what();
  } catch (const std::exception& e) {
    art.failed_stage = stage;
    art.diagnostic = e.what();
  }
  write_manifest(cfg, art);
  return art;
}

std::vector<RunArtifacts> run_sweep(const RunConfig& cfg, const fs::path& root) {
  cfg.validate();
  fs::create_directories(root);
  const Experiment ex = make_experiment(cfg);
  write_text(root / "world.json", world_json(cfg, ex).dump(2) + "\n");

  std::vector<RunArtifacts> runs(static_cast<std::size_t>(cfg.n_seeds));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int s = next++; s < cfg.n_seeds; s = next++) {
      const auto seed = static_cast<std::uint64_t>(s);
      runs[static_cast<std::size_t>(s)] =
          run_iterated_rlhf(cfg, seed, root / ("seed_" + std::to_string(s)), ex);
    }
  };
  const int n_workers = std::min(cfg.jobs, cfg.n_seeds);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }

  std::vector<CheckpointRow> rows;
  ojson manifest;
  manifest["config_text"] = canonical_config(cfg);
  manifest["config_hash"] = config_hash(cfg);
  manifest["config"] = config_json(cfg);
  manifest["seeds"] = ojson::array();
  manifest["warnings"] = ojson::array();
  for (const auto& r : runs) {
    manifest["seeds"].push_back({{"seed", r.seed},
                                 {"dir", r.dir.filename().string()},
                                 {"status", r.ok ? "ok" : "failed"}});
    if (!r.ok) {
      const std::string w = "seed " + std::to_string(r.seed) + " failed in " + r.failed_stage + ": " + r.diagnostic;
      manifest["warnings"].push_back(w);
      std::cerr << "warning: " << w << " (aggregating over the remaining seeds)\n";
      continue;
    }
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  }
  write_text(root / "aggregate.csv", aggregate_csv(aggregate_by_iteration(rows, cfg.bucket_width)));
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  return runs;
}

std::vector<fs::path> expand_run_dirs(const std::string& pattern) {
  glob_t g{};
  std::vector<fs::path> matches;
  if (::glob(pattern.c_str(), GLOB_NOSORT, nullptr, &g) == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) matches.emplace_back(g.gl_pathv[i]);
  ::globfree(&g);
  std::sort(matches.begin(), matches.end());

  std::vector<fs::path> out;
  for (const auto& m : matches) {
    if (!fs::is_directory(m)) continue;
    if (fs::exists(m / "metrics.jsonl")) {
      out.push_back(m);
      continue;
    }
    std::vector<fs::path> seeds;
    for (const auto& e : fs::directory_iterator(m))
      if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
          fs::exists(e.path() / "metrics.jsonl"))
        seeds.push_back(e.path());
    std::sort(seeds.begin(), seeds.end());
    out.insert(out.end(), seeds.begin(), seeds.end());
  }
  return out;
}

std::string aggregate_from_runs(const std::vector<fs::path>& run_dirs, double bucket_width) {
  std::vector<CheckpointRow> rows;
  for (const auto& d : run_dirs) {
    if (fs::exists(d / "manifest.json")) {
      const auto m = nlohmann::json::parse(read_text(d / "manifest.json"));
      if (m.value("status", "ok") != "ok") {
        std::cerr << "warning: skipping failed run " << d.string() << "\n";
        continue;
      }
    }
    auto r = read_metrics(d / "metrics.jsonl");
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return aggregate_csv(aggregate_by_iteration(rows, bucket_width));
}

}  // namespace itrlhf
