// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "itrlhf/world.hpp"

namespace itrlhf {

/// One labelled comparison; p == 1 means y0 was preferred.
struct PreferenceExample {
  PromptId x = 0;
  ResponseId y0 = 0;
  ResponseId y1 = 0;
  int p = 0;

  bool operator==(const PreferenceExample&) const = default;
};

struct PreferenceDataset {
  int iteration = 1;
  std::vector<PreferenceExample> examples;
  /// Prompt instances dropped because y0 == y1 kept recurring.
  int skipped = 0;
  /// Slots filled without the unique-prompt constraint (SampleExclusive).
  int exclusivity_warnings = 0;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

}  // namespace itrlhf
