// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace itrlhf {

/// Malformed or inconsistent configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two parameter sets that cannot be combined elementwise.
class ArchitectureMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sample has no spread (constant rewards), so it cannot be standardized.
class DegenerateSampleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The reference distribution puts zero mass where the policy does not.
class InfiniteDivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Training produced a non-finite loss or parameter.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace itrlhf
