#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "qsdnoise/rng.hpp"

namespace qsdnoise {

// ---------------------------------------------------------------------------
// Poissonian shot noise c(t) = sum_j x_j delta(t - t_j)
// ---------------------------------------------------------------------------

/// Distribution of the kick heights x_j. Both laws have mean J.
enum class AmplitudeLaw {
  exponential,  ///< x ~ Exp(mean J); M[x^2] = 2 J^2
  fixed,        ///< x = J; M[x^2] = J^2
};

std::string_view to_string(AmplitudeLaw law);
/// Throws ParameterError for unknown names.
AmplitudeLaw amplitude_law_from_string(std::string_view name);

struct ShotNoiseParams {
  double J = 0.0;  ///< mean kick height (a phase, in units where omega = 1)
  double W = 0.0;  ///< mean arrival rate (1/time)
  AmplitudeLaw law = AmplitudeLaw::exponential;

  void validate() const;
  /// Second moment M[x^2] implied by the amplitude law.
  double second_moment() const;
};

struct Kick {
  double time;
  double amplitude;
};

/// One realization of the shot noise on [0, horizon).
struct ShotTrain {
  double horizon = 0.0;
  std::vector<Kick> arrivals;  ///< strictly increasing times, positive heights

  /// Sum of all kick heights, i.e. the integral of c(t) over the horizon.
  double total_amplitude() const;
};

/// Draws a train with exponential inter-arrival gaps (mean 1/W) and heights
/// from `p.law`. W = 0 or J = 0 both give an empty train (c == 0).
ShotTrain sample_shot_train(const ShotNoiseParams& p, double horizon,
                            const RngStream& rng);

struct MomentsReport {
  std::size_t n_trains = 0;
  std::size_t n_kicks = 0;
  double horizon = 0.0;
  ShotNoiseParams target;

  double rate = 0.0;  ///< kicks per unit time, averaged over trains
  double rate_stderr = 0.0;
  double amplitude_mean = 0.0;  ///< pooled M[x_j]
  double amplitude_mean_stderr = 0.0;
  double amplitude_second_moment = 0.0;  ///< pooled M[x_j^2]
  double amplitude_second_moment_stderr = 0.0;
  double mean_c = 0.0;  ///< time-averaged c, i.e. total kick sum / horizon
  double mean_c_stderr = 0.0;

  double target_rate() const { return target.W; }
  double target_mean_c() const { return target.J * target.W; }

  /// |rate - W| <= rel_tol * W.
  bool rate_within(double rel_tol) const;
  bool amplitude_mean_within(double rel_tol) const;
  bool second_moment_within(double rel_tol) const;
  /// |mean_c - J W| <= n_sigma * stderr (exact match required when stderr is 0).
  bool mean_c_within_sigma(double n_sigma) const;
};

/// Empirical statistics of a batch of trains against the targets in `target`.
/// Requires at least 100 trains sharing one horizon (UsageError otherwise).
MomentsReport shot_train_moments(std::span<const ShotTrain> trains,
                                 const ShotNoiseParams& target);

/// Minimum batch size accepted by shot_train_moments.
inline constexpr std::size_t kMinMomentTrains = 100;

// ---------------------------------------------------------------------------
// Complex Ornstein-Uhlenbeck environment noise z*_t
// ---------------------------------------------------------------------------

struct OUParams {
  double gamma = 0.2;
  double dt = 1e-3;
  std::size_t n_steps = 1;
  /// Upper bound on dt * gamma.
  double stability_bound = 0.05;

  void validate() const;
};

struct OUPath {
  std::vector<std::complex<double>> values;  ///< z*_0 ... z*_{n_steps}
  OUParams params;
};

/// Stationary start plus the Euler update
///   z*_{k+1} = z*_k - gamma z*_k dt + sqrt(dt/2) gamma w*_k.
OUPath sample_ou_path(const OUParams& p, const RngStream& rng);

/// Correlation function of the environment noise, (gamma/2) exp(-gamma |tau|).
double ou_correlation(double gamma, double lag);

struct OUStatistics {
  OUParams params;
  std::size_t n_paths = 0;

  std::vector<double> lags;
  std::vector<std::complex<double>> autocorrelation;  ///< estimate of E[z_{s+lag} z*_s]
  std::vector<double> target;                         ///< ou_correlation at each lag
  /// ||estimate - target||_2 / ||target||_2 over the lag grid.
  double relative_rms_error = 0.0;

  std::vector<double> probe_times;
  std::vector<std::complex<double>> mean;  ///< E[z*_t]
  std::vector<double> mean_stderr;         ///< stderr of the complex mean
  std::vector<double> second_moment;       ///< E|z*_t|^2
  std::vector<double> second_moment_stderr;

  /// |mean| < n_sigma * stderr at every probe time.
  bool mean_consistent_with_zero(double n_sigma) const;
  /// Every E|z|^2 within rel_tol of gamma/2.
  bool stationary_within(double rel_tol) const;
};

/// Monte Carlo check of the OU generator. Each path uses `rng.substream(i)`.
/// The autocorrelation is averaged over all paths and over several reference
/// times per path; `n_lags` points span [0, max_lag].
OUStatistics ou_statistics(const OUParams& p, std::size_t n_paths,
                           double max_lag, std::size_t n_lags,
                           const RngStream& rng, std::size_t threads = 0);

}  // namespace qsdnoise
