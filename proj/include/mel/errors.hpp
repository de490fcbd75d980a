#pragma once

#include <stdexcept>
#include <string>

namespace mel {

// Signals that no schedule/parameter combination can satisfy the active
// constraints. Callers that can degrade gracefully (the sweep driver, the
// CLI) catch this; everything else lets it propagate.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what, double shortfall = 0.0)
      : std::runtime_error(what), shortfall_(shortfall) {}

  // Unplaced samples (batch allocation) or unusable budget, context-dependent.
  double shortfall() const { return shortfall_; }

 private:
  double shortfall_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mel
