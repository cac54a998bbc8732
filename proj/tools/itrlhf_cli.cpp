// SPDX-License-Identifier: Apache-2.0
// itrlhf: run, sweep, aggregate, compare-rm, export.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "itrlhf/config.hpp"
#include "itrlhf/errors.hpp"
#include "itrlhf/export.hpp"
#include "itrlhf/metrics.hpp"
#include "itrlhf/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace itrlhf;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// One score per line; blank lines, '#' comments and a non-numeric header are skipped.
ScoreSample read_scores(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read score file '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string field = line.substr(first, line.find_first_of(",\t\r ", first) - first);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != field.size() || used == 0) {
      if (values.empty() && lineno == 1) continue;
      throw ConfigError("score file '" + path.string() + "' line " + std::to_string(lineno) +
                        ": not a number: " + field);
    }
    values.push_back(v);
  }
  return ScoreSample(Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
                     path.filename().string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterated RLHF simulator on a synthetic contextual bandit.\n\n" + config_schema_doc(), "itrlhf"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run one seed; prints the run directory");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed, "seed override");
  run->add_option("--out", out_dir, "run directory (default runs/<config-hash>/seed_<seed>)");

  auto* sweep = app.add_subcommand("sweep", "Run seeds 0..run.seeds-1; prints the sweep root");
  sweep->add_option("config", config_path, "config file")->required();
  sweep->add_option("--out", out_dir, "sweep root (default runs/<config-hash>)");

  std::string pattern, agg_out;
  double bucket_width = 0.25;
  auto* aggregate = app.add_subcommand("aggregate", "Bucket persisted metrics by KL, per iteration");
  aggregate->add_option("glob", pattern, "run directories or sweep roots (glob)")->required();
  aggregate->add_option("--bucket-width", bucket_width, "KL bucket width in nats")->check(CLI::PositiveNumber);
  aggregate->add_option("--out", agg_out, "output CSV (default stdout)");

  std::string file_a, file_b;
  std::optional<double> bandwidth;
  auto* compare = app.add_subcommand("compare-rm", "Standardized MMD^2 between two score files");
  compare->add_option("file_a", file_a, "scores, one per line")->required();
  compare->add_option("file_b", file_b, "scores, one per line")->required();
  compare->add_option("--bandwidth", bandwidth, "kernel bandwidth (default: median heuristic)")
      ->check(CLI::PositiveNumber);

  std::string run_dir, figure, export_out;
  std::vector<std::string> with;
  bool no_svg = false;
  auto* exp = app.add_subcommand("export", "Plot-ready CSV (and SVG) of a figure analog: fig2, fig3, fig6");
  exp->add_option("run_dir", run_dir, "run directory or sweep root")->required();
  exp->add_option("figure", figure, "figure id")->required();
  exp->add_option("out", export_out, "output CSV path")->required();
  exp->add_option("--with", with, "additional run dirs or sweep roots (fig2 compares strategies)");
  exp->add_option("--bucket-width", bucket_width, "KL bucket width in nats")->check(CLI::PositiveNumber);
  exp->add_flag("--no-svg", no_svg, "skip the chart");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) {
      const RunConfig cfg = load_config(config_path);
      cfg.validate();
      const std::uint64_t s = seed.value_or(0);
      const fs::path dir =
          out_dir.empty() ? fs::path("runs") / config_hash(cfg) / ("seed_" + std::to_string(s)) : fs::path(out_dir);
      const RunArtifacts art = run_iterated_rlhf(cfg, s, dir);
      if (!art.ok) {
        std::cerr << "run failed in stage " << art.failed_stage << ": " << art.diagnostic << "\n";
        std::cout << dir.string() << "\n";
        return kRuntime;
      }
      std::cout << dir.string() << "\n";
      return kOk;
    }
    if (*sweep) {
      const RunConfig cfg = load_config(config_path);
      cfg.validate();
      const fs::path root = out_dir.empty() ? fs::path("runs") / config_hash(cfg) : fs::path(out_dir);
      const auto runs = run_sweep(cfg, root);
      std::cout << root.string() << "\n";
      for (const auto& r : runs)
        if (r.ok) return kOk;
      std::cerr << "every seed failed\n";
      return kRuntime;
    }
    if (*aggregate) {
      const auto dirs = expand_run_dirs(pattern);
      if (dirs.empty()) {
        std::cerr << "no run directories match '" << pattern << "'\n";
        return kUsage;
      }
      const std::string csv = aggregate_from_runs(dirs, bucket_width);
      if (agg_out.empty())
        std::cout << csv;
      else
        write_text(agg_out, csv);
      return kOk;
    }
    if (*compare) {
      const ScoreSample a = read_scores(file_a);
      const ScoreSample b = read_scores(file_b);
      if (a.size() != b.size())
        throw ConfigError("score files differ in length (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
      const double h = bandwidth ? *bandwidth : median_bandwidth(standardize(a), standardize(b));
      nlohmann::ordered_json j;
      j["n"] = a.size();
      j["bandwidth"] = h;
      j["bandwidth_source"] = bandwidth ? "flag" : "median";
      j["mmd_u2"] = rm_discrepancy(a, b, h);
      std::cout << j.dump() << "\n";
      return kOk;
    }
    if (*exp) {
      ExportOptions opt;
      opt.bucket_width = bucket_width;
      opt.svg = !no_svg;
      for (const auto& w : with) opt.with.emplace_back(w);
      const fs::path chart = export_figure(run_dir, figure, export_out, opt);
      std::cout << export_out << "\n";
      if (!chart.empty()) std::cout << chart.string() << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const UnknownFigure& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
