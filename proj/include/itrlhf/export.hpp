// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace itrlhf {

/// Unknown figure id; the message lists the valid ones.
class UnknownFigure : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig2", "fig3", "fig6"};
  return ids;
}

struct ExportOptions {
  double bucket_width = 0.25;
  /// Extra run dirs or sweep roots (fig2 compares one series per data strategy).
  std::vector<std::filesystem::path> with;
  bool svg = true;
};

/// fig2: strategy,iteration,kl_bucket_lo,kl_bucket_hi,mean_gold,std_gold,count
/// fig3: iteration,kl_bucket,mean_gold,mean_proxy,mmd
/// fig6: iteration,step,global_step,mean_gold,mean_proxy,count
/// Reads metrics.jsonl under `run_dir` (a run or a sweep root). Pure function of
/// the artifacts.
std::string export_figure_csv(const std::filesystem::path& run_dir, const std::string& figure,
                              const ExportOptions& opt = {});

/// Writes the CSV to `out` and, when opt.svg, a line chart next to it with a
/// .svg extension. Returns the path of the chart, or empty if none.
std::filesystem::path export_figure(const std::filesystem::path& run_dir, const std::string& figure,
                                    const std::filesystem::path& out, const ExportOptions& opt = {});

}  // namespace itrlhf
