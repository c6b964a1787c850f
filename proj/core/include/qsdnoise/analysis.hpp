#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qsdnoise/dynamics.hpp"
#include "qsdnoise/noise.hpp"
#include "qsdnoise/rng.hpp"

namespace qsdnoise {

// ---------------------------------------------------------------------------
// Fidelity versus time for a set of (gamma, J, W) cells
// ---------------------------------------------------------------------------

struct FidelityStudyConfig {
  SystemParams system;                        ///< gamma is overridden per cell
  std::vector<double> gamma_values{0.2, 0.5};
  std::vector<double> J_values{15.0, 8.0, 3.0};
  std::vector<double> W_values{200.0, 40.0};  ///< rates in 1/time (1000/T, 200/T at T=5)
  AmplitudeLaw law = AmplitudeLaw::exponential;
  std::size_t n_trains = 32;
  double dt = 1e-3;
  double horizon = 500.0;
  std::size_t output_stride = 1000;
  FidelityConvention convention = FidelityConvention::riccati;
  std::size_t threads = 0;
};

struct FidelityStudyCurve {
  double gamma = 0.0;
  double J = 0.0;
  double W = 0.0;
  bool free = false;  ///< no control noise
  FidelityCurve curve;
};

/// One averaged curve per (gamma, J, W) plus a free-dynamics curve per gamma.
/// Free curves come first for each gamma. Cell c draws from rng/{c}.
std::vector<FidelityStudyCurve> fidelity_study(const FidelityStudyConfig& cfg,
                                               const RngStream& rng);

// ---------------------------------------------------------------------------
// (J, W) grid of fidelities at fixed probe times
// ---------------------------------------------------------------------------

struct SweepConfig {
  SystemParams system;
  std::vector<double> J_values;
  std::vector<double> W_values;     ///< 1/time
  std::vector<double> probe_times;  ///< time
  AmplitudeLaw law = AmplitudeLaw::exponential;
  std::size_t n_traj = 2000;
  double dt = 1e-3;
  FidelityConvention convention = FidelityConvention::riccati;
  std::size_t threads = 0;
  double threshold = 0.99;
  double plateau_tolerance = 0.005;

  /// 16 x 16 grid over J in [0, 20], W in [50, 1200]/T, probes {50T, 100T}.
  static SweepConfig defaults(const SystemParams& sys);
};

struct SweepGrid {
  std::vector<double> J_values;
  std::vector<double> W_values;
  std::vector<double> probe_times;
  std::vector<double> fidelity;  ///< [J][W][t], row-major
  std::vector<double> stderr;
  std::vector<std::size_t> n_traj;  ///< per (J, W) cell, after exclusions
  std::vector<std::size_t> excluded;
  double threshold = 0.99;
  double plateau_tolerance = 0.005;

  std::size_t index(std::size_t j, std::size_t w, std::size_t t) const {
    return (j * W_values.size() + w) * probe_times.size() + t;
  }
  double F(std::size_t j, std::size_t w, std::size_t t) const { return fidelity[index(j, w, t)]; }
  bool above(std::size_t j, std::size_t w, std::size_t t) const { return F(j, w, t) > threshold; }

  /// Smallest W whose F, and every F at larger W, lies within
  /// plateau_tolerance of the F at the largest W. Nullopt for an empty axis.
  std::optional<double> plateau_onset(std::size_t j, std::size_t t) const;
};

/// Cells are independent jobs run in parallel; cell (j, w) draws from
/// rng/{j * |W| + w}.
SweepGrid fidelity_sweep(const SweepConfig& cfg, const RngStream& rng);

// ---------------------------------------------------------------------------
// Suppression gain versus environment memory rate
// ---------------------------------------------------------------------------

struct MarkovScanConfig {
  SystemParams system;
  std::vector<double> gamma_values{0.2, 0.5, 1.0, 2.0, 5.0};
  double J = 15.0;
  double W = 200.0;
  double t_probe = 250.0;
  AmplitudeLaw law = AmplitudeLaw::exponential;
  std::size_t n_traj = 32;
  double dt = 1e-3;
  FidelityConvention convention = FidelityConvention::riccati;
  std::size_t threads = 0;
};

struct MarkovScan {
  std::vector<double> gamma_values;
  std::vector<double> F_noise;
  std::vector<double> F_noise_stderr;
  std::vector<double> F_free;
  std::vector<double> gain;  ///< F_noise - F_free
  std::vector<double> gain_stderr;
  double t_probe = 0.0;

  /// True when gain is strictly decreasing along gamma_values.
  bool monotone_degradation() const;
  std::string trend_summary() const;
};

/// gamma_values must be increasing and span at least a factor of 10.
MarkovScan markov_scan(const MarkovScanConfig& cfg, const RngStream& rng);

// ---------------------------------------------------------------------------
// Washout of the slow factor by the fast phase N(t)
// ---------------------------------------------------------------------------

/// N(t) = exp(-i int_0^t [omega + c(s)] ds), h(t) = -Q(t) <psi_0|psi_t> with
/// the overlap taken from the z* == 0 amplitude, and the running integral
/// I(t) = int_0^t N*(s) h(s) ds = -int_0^t Q N* <psi_0|psi_s> ds.
struct IntegrandSeries {
  std::vector<double> times;
  std::vector<cplx> N;
  std::vector<cplx> h;
  std::vector<cplx> partial_integral;

  /// |I(horizon)|.
  double final_magnitude() const;
};

IntegrandSeries washout_diagnostic(const SystemParams& sys, const ShotTrain& train, double dt,
                                   double horizon, std::size_t output_stride = 1000);

/// |(1/t) int_0^t N(s) ds| at every output time (0 at t = 0): the running
/// average of the fast factor alone, i.e. the integrand with h frozen to 1.
std::vector<double> phase_running_average(const SystemParams& sys, const ShotTrain& train,
                                          double dt, double horizon,
                                          std::size_t output_stride = 1000);

}  // namespace qsdnoise
