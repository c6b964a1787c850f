#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsdnoise {

/// A numeric parameter violates its domain (negative rate, unstable step, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs are individually valid but do not fit together (grid mismatch,
/// mixed horizons, too few samples).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The Riccati solution left the divergence guard.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(double time, double modulus)
      : std::runtime_error("Q diverged at t=" + std::to_string(time) +
                           " (|Q|=" + std::to_string(modulus) + ")"),
        time_(time),
        modulus_(modulus) {}

  double time() const noexcept { return time_; }
  double modulus() const noexcept { return modulus_; }

 private:
  double time_;
  double modulus_;
};

/// Too many trajectories of an ensemble were excluded as divergent.
class DivergenceBudgetError : public std::runtime_error {
 public:
  DivergenceBudgetError(std::size_t excluded, std::size_t total)
      : std::runtime_error(std::to_string(excluded) + " of " +
                           std::to_string(total) +
                           " trajectories diverged (budget is 1%)"),
        excluded_(excluded),
        total_(total) {}

  std::size_t excluded() const noexcept { return excluded_; }
  std::size_t total() const noexcept { return total_; }

 private:
  std::size_t excluded_;
  std::size_t total_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsdnoise
