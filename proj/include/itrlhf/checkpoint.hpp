// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace itrlhf {

/// One evaluation of the policy during optimisation, on the holdout prompts.
struct CheckpointRow {
  int iteration = 1;
  long step = 0;
  double kl_to_sft = 0.0;
  double kl_to_init = 0.0;
  double mean_proxy = 0.0;
  double mean_gold = 0.0;
  /// Standardized-MMD between proxy and gold samples; NaN if either sample
  /// is degenerate.
  double mmd = 0.0;
  Eigen::VectorXd gold_samples;
  Eigen::VectorXd proxy_samples;
};

}  // namespace itrlhf
