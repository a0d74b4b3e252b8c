#pragma once

#include <stdexcept>
#include <string>

namespace costfl {

// Precondition violations throw std::invalid_argument. The types below are the
// domain failures that callers (notably the CLI) map to distinct outcomes.

/// Absolute bound constants A0/B0 were requested but only their ratio is known.
class UnidentifiedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss threshold was not reached within the round budget.
class UnreachableLossError : public std::runtime_error {
 public:
  UnreachableLossError(const std::string& what, std::string threshold)
      : std::runtime_error(what), threshold_(std::move(threshold)) {}
  const std::string& threshold() const { return threshold_; }

 private:
  std::string threshold_;
};

/// Every pairwise ratio equation was degenerate or infeasible.
class InconsistentSamplesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration document failed validation.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run record was used where a complete (target-reaching) run is required.
class IncompleteRunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace costfl
