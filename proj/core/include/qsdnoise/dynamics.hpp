#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsdnoise/noise.hpp"
#include "qsdnoise/rng.hpp"

namespace qsdnoise {

using cplx = std::complex<double>;

/// Ordered key/value record of the inputs that produced a result.
using Provenance = std::vector<std::pair<std::string, std::string>>;

/// Two-level system with an Ornstein-Uhlenbeck environment. Simulator units
/// take omega = 1, so T = (omega T) / omega.
struct SystemParams {
  double omega = 1.0;  ///< level spacing
  double g = 0.4;      ///< system-environment coupling
  double gamma = 0.2;  ///< environment memory rate
  double T = 5.0;      ///< characteristic time scale

  void validate() const;
};

/// Uniform grid t_k = k dt, k = 0..n_steps.
struct TimeGrid {
  double dt = 1e-3;
  std::size_t n_steps = 0;

  /// Grid covering [0, horizon]; horizon is rounded to a whole number of steps.
  static TimeGrid covering(double dt, double horizon);

  std::size_t size() const noexcept { return n_steps + 1; }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
  double horizon() const noexcept { return time(n_steps); }
  /// Nearest grid index to t, clamped to the grid.
  std::size_t nearest(double t) const;
};

/// |Q| above this aborts the trajectory.
inline constexpr double kDivergenceGuard = 1e6;

/// A shot of the control noise after snapping onto the integration grid.
struct AppliedKick {
  std::size_t step;    ///< grid index where the kick acts
  double time;         ///< original arrival time t_j
  double amplitude;    ///< x_j
  cplx q_before;       ///< Q(t_j^-)
  cplx q_after;        ///< Q(t_j^+) = Q(t_j^-) e^{i x_j}
};

struct QTrajectory {
  TimeGrid grid;
  std::vector<cplx> values;          ///< Q at each grid point (after kicks there)
  std::vector<double> re_integral;   ///< running integral of Re Q
  std::vector<AppliedKick> kicks;
  double max_snap_error = 0.0;       ///< max |t_j - snapped t_j|, <= dt/2

  /// Wraps externally supplied samples; the running integral is filled in by
  /// the trapezoid rule.
  static QTrajectory from_samples(TimeGrid grid, std::vector<cplx> values);
};

/// Largest step integrate_q accepts: min(0.01/omega, 0.1/gamma).
double max_riccati_step(const SystemParams& sys);

/// Solves dQ/dt = g gamma/2 + (-gamma + i omega + i c(t)) Q + g Q^2, Q(0) = 0.
///
/// Smooth stretches use classical RK4 with the running integral of Re Q
/// carried as an extra quadrature state. Each shot is snapped to the nearest
/// grid point and applied exactly as Q -> Q e^{i x_j}. Throws DivergenceError
/// when |Q| exceeds kDivergenceGuard.
QTrajectory integrate_q(const SystemParams& sys, const ShotTrain& train,
                        double dt, double horizon);

/// How the Riccati solution is turned into a fidelity.
enum class FidelityConvention {
  riccati,    ///< F = exp(-int Re Q), the survival-amplitude formula as written
  amplitude,  ///< F = exp(-g int Re Q), from integrating the state amplitude
};

std::string_view to_string(FidelityConvention c);
FidelityConvention fidelity_convention_from_string(std::string_view name);

struct FidelityCurve {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderr;  ///< empty for single realizations
  std::size_t n_samples = 1;
  std::size_t excluded = 0;
  FidelityConvention convention = FidelityConvention::riccati;
  Provenance provenance;
};

/// F(t) = exp(-scale * int_0^t Re Q), scale = 1 (riccati) or g (amplitude).
FidelityCurve fidelity_from_q(const QTrajectory& q,
                              FidelityConvention convention = FidelityConvention::riccati,
                              double g = 1.0);

/// Unnormalized amplitudes on |1> (A) and |0> (B).
struct StateTrajectory {
  TimeGrid grid;
  std::vector<cplx> a;
  std::vector<cplx> b;
};

/// Linear (unnormalized) stochastic Schroedinger trajectory from |1>.
///
/// The free and shot-noise parts of the Hamiltonian are diagonal and handled
/// exactly in a rotating frame, so each shot multiplies the lab-frame
/// components by e^{-i x_j/2} and e^{+i x_j/2}; the coupling terms
/// i z*_t g sigma_- and -i g Q sigma_+ sigma_- are integrated by RK4 together
/// with Q. `ou` must live on the same grid (step dt) and sets the horizon.
StateTrajectory propagate_trajectory(const SystemParams& sys, const ShotTrain& train,
                                     const OUPath& ou, double dt);

/// Row-major 2x2 matrix in the basis (|1>, |0>).
using Matrix2 = std::array<cplx, 4>;

enum class TrainPolicy {
  shared,  ///< one shot train for the whole ensemble
  fresh,   ///< a new shot train per trajectory
};

std::string_view to_string(TrainPolicy p);
TrainPolicy train_policy_from_string(std::string_view name);

struct DensityCurve {
  std::vector<double> times;
  std::vector<Matrix2> rho;
  std::vector<std::array<double, 4>> stderr;
  std::size_t n_traj = 0;    ///< trajectories that entered the average
  std::size_t excluded = 0;  ///< divergent trajectories left out
  Provenance provenance;
};

struct EnsembleOptions {
  std::size_t n_traj = 1000;
  double dt = 1e-3;
  double horizon = 500.0;
  TrainPolicy policy = TrainPolicy::fresh;
  std::size_t output_stride = 1000;  ///< keep every n-th grid point
  std::size_t threads = 0;           ///< 0 = all hardware threads
  bool zero_environment = false;     ///< force z* == 0
  double ou_stability_bound = 0.05;
};

/// Stream layout shared by every ensemble: trajectory i draws its shot train
/// from rng/{i,0} and its environment path from rng/{i,1}; a shared train
/// comes from rng/{kSharedTrainStream}.
inline constexpr std::uint64_t kSharedTrainStream = ~std::uint64_t{0};
RngStream train_stream(const RngStream& rng, std::size_t trajectory);
RngStream environment_stream(const RngStream& rng, std::size_t trajectory);

/// rho_t = M[|psi_t><psi_t|] over n_traj trajectories. Sums are taken in
/// trajectory order over fixed blocks, so the result is bit-identical for any
/// thread count. Throws DivergenceBudgetError if more than 1% diverge.
DensityCurve ensemble_density(const SystemParams& sys, const ShotNoiseParams& noise,
                              const EnsembleOptions& opts, const RngStream& rng);

struct FidelityOptions {
  std::size_t n_trains = 32;
  double dt = 1e-3;
  double horizon = 500.0;
  /// If non-empty, sample only at these times (snapped to the grid);
  /// otherwise every output_stride-th grid point.
  std::vector<double> probe_times;
  std::size_t output_stride = 1000;
  FidelityConvention convention = FidelityConvention::riccati;
  std::size_t threads = 0;
};

/// Mean and standard error of F(t) over independent shot trains.
FidelityCurve fidelity_ensemble(const SystemParams& sys, const ShotNoiseParams& noise,
                                const FidelityOptions& opts, const RngStream& rng);

struct ConventionReport {
  double g = 0.0;
  double tolerance = 1e-4;
  std::vector<double> times;
  std::vector<double> log_f_riccati;    ///< -int Re Q
  std::vector<double> log_f_amplitude;  ///< log|A| from the z* == 0 amplitude equation
  std::vector<double> ratio;            ///< log_f_amplitude / log_f_riccati (NaN where both vanish)
  double mean_ratio = 0.0;
  double max_deviation = 0.0;  ///< max |ratio - g|
  bool ratio_equals_g = false;
  bool conventions_coincide = false;  ///< max |F_riccati - F_amplitude| <= tolerance
  FidelityConvention selected = FidelityConvention::riccati;
};

/// Compares the two fidelity conventions on one shot train. The amplitude
/// side integrates the state equation with z* == 0 rather than rescaling Q.
ConventionReport crosscheck_conventions(const SystemParams& sys, const ShotTrain& train,
                                        double dt, double horizon,
                                        std::size_t output_stride = 1000,
                                        double tolerance = 1e-4);

}  // namespace qsdnoise
