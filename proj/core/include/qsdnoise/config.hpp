#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsdnoise/dynamics.hpp"
#include "qsdnoise/noise.hpp"

namespace qsdnoise {

enum class Mode { simulate, sweep, markov_scan, washout, noise_test, crosscheck };

std::string_view to_string(Mode m);
std::optional<Mode> mode_from_string(std::string_view name);

/// Resolved experiment description.
///
/// Times and rates use the reporting conventions: J in units of omega
/// (a kick phase when omega = 1), W and W_values in 1/T, horizon, t_probe,
/// probe_times in T. dt, ou_dt and max_lag are in simulator time (1/omega).
struct ExperimentConfig {
  std::optional<Mode> mode;
  std::string preset;  ///< "" or "flux-qubit"

  double omega = 1.0;
  double omega_T = 5.0;
  double g = 0.4;
  double gamma = 0.2;

  std::optional<double> J;
  std::optional<double> W;
  AmplitudeLaw amplitude_law = AmplitudeLaw::exponential;

  double dt = 1e-3;
  double horizon = 100.0;
  std::size_t output_stride = 1000;
  std::size_t n_traj = 2000;
  std::size_t n_trains = 32;
  std::uint64_t master_seed = 20130901;
  TrainPolicy train_policy = TrainPolicy::fresh;
  FidelityConvention fidelity_convention = FidelityConvention::riccati;
  bool density = false;  ///< simulate: also run the full state ensemble per cell

  std::vector<double> J_values;
  std::vector<double> W_values;
  std::vector<double> gamma_values;
  std::vector<double> probe_times;
  double t_probe = 50.0;

  // noise-test
  std::size_t n_paths = 10000;
  double ou_dt = 0.01;
  double ou_length = 50.0;
  double max_lag = 25.0;
  std::size_t n_lags = 101;
  double dt_gamma_bound = 0.05;

  std::size_t threads = 0;  ///< 0 = all hardware threads

  SystemParams system() const;
  double T() const { return omega_T / omega; }
  /// Converts a rate given in 1/T to simulator units.
  double rate(double W_per_T) const { return W_per_T / T(); }
  double time(double in_T) const { return in_T * T(); }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ConfigIssue {
  std::string key;  ///< empty for line-level syntax errors
  std::string message;
};

struct ParseResult {
  ExperimentConfig config;
  std::vector<ConfigIssue> errors;

  bool ok() const noexcept { return errors.empty(); }
};

/// Parses a flat `key = value` document.
///
/// Grammar: one assignment per line, `#` starts a comment, blank lines are
/// ignored, lists are comma-separated numbers. `mode_override` (the CLI
/// subcommand) wins over a `mode` key. Every problem found is reported, not
/// just the first.
ParseResult parse_config(std::string_view text, std::optional<Mode> mode_override = {});

/// Invariant and required-field checks; parse_config already runs these.
std::vector<ConfigIssue> validate_config(const ExperimentConfig& cfg);

/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Comment lines describing a preset (empty for unknown presets).
std::vector<std::string> preset_notes(std::string_view preset);

}  // namespace qsdnoise
