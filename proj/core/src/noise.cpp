#include "qsdnoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qsdnoise/errors.hpp"
#include "qsdnoise/parallel.hpp"

namespace qsdnoise {

std::string_view to_string(AmplitudeLaw law) {
  switch (law) {
    case AmplitudeLaw::exponential:
      return "exponential";
    case AmplitudeLaw::fixed:
      return "fixed";
  }
  return "unknown";
}

AmplitudeLaw amplitude_law_from_string(std::string_view name) {
  if (name == "exponential") return AmplitudeLaw::exponential;
  if (name == "fixed") return AmplitudeLaw::fixed;
  throw ParameterError("unknown amplitude law '" + std::string(name) +
                       "' (expected exponential or fixed)");
}

void ShotNoiseParams::validate() const {
  if (!(J >= 0.0) || !std::isfinite(J))
    throw ParameterError("J must be finite and >= 0, got " + std::to_string(J));
  if (!(W >= 0.0) || !std::isfinite(W))
    throw ParameterError("W must be finite and >= 0, got " + std::to_string(W));
}

double ShotNoiseParams::second_moment() const {
  switch (law) {
    case AmplitudeLaw::exponential:
      return 2.0 * J * J;
    case AmplitudeLaw::fixed:
      return J * J;
  }
  return 0.0;
}

double ShotTrain::total_amplitude() const {
  double sum = 0.0;
  for (const Kick& k : arrivals) sum += k.amplitude;
  return sum;
}

ShotTrain sample_shot_train(const ShotNoiseParams& p, double horizon,
                            const RngStream& rng) {
  p.validate();
  if (!(horizon > 0.0))
    throw ParameterError("shot train horizon must be > 0");

  ShotTrain train;
  train.horizon = horizon;
  if (p.W == 0.0 || p.J == 0.0) return train;

  auto engine = rng.engine();
  std::exponential_distribution<double> gap(p.W);
  std::exponential_distribution<double> height(1.0 / p.J);

  train.arrivals.reserve(static_cast<std::size_t>(p.W * horizon * 1.1) + 16);
  double t = 0.0;
  for (;;) {
    const double dt = gap(engine);
    if (dt <= 0.0) continue;  // keeps arrival times strictly increasing
    t += dt;
    if (t >= horizon) break;
    double x = p.J;
    if (p.law == AmplitudeLaw::exponential) {
      do {
        x = height(engine);
      } while (x <= 0.0);
    }
    train.arrivals.push_back({t, x});
  }
  return train;
}

bool MomentsReport::rate_within(double rel_tol) const {
  return std::abs(rate - target.W) <= rel_tol * target.W;
}

bool MomentsReport::amplitude_mean_within(double rel_tol) const {
  return std::abs(amplitude_mean - target.J) <= rel_tol * target.J;
}

bool MomentsReport::second_moment_within(double rel_tol) const {
  const double m2 = target.second_moment();
  return std::abs(amplitude_second_moment - m2) <= rel_tol * m2;
}

bool MomentsReport::mean_c_within_sigma(double n_sigma) const {
  const double diff = std::abs(mean_c - target_mean_c());
  if (mean_c_stderr == 0.0) return diff == 0.0;
  return diff <= n_sigma * mean_c_stderr;
}

MomentsReport shot_train_moments(std::span<const ShotTrain> trains,
                                 const ShotNoiseParams& target) {
  if (trains.size() < kMinMomentTrains)
    throw UsageError("shot_train_moments needs at least " +
                     std::to_string(kMinMomentTrains) + " trains, got " +
                     std::to_string(trains.size()));
  const double horizon = trains.front().horizon;
  for (const ShotTrain& tr : trains) {
    if (tr.horizon != horizon)
      throw UsageError("shot_train_moments: trains have mixed horizons");
  }

  MomentsReport r;
  r.n_trains = trains.size();
  r.horizon = horizon;
  r.target = target;

  double rate_sum = 0.0, rate_sq = 0.0;
  double c_sum = 0.0, c_sq = 0.0;
  double x_sum = 0.0, x2_sum = 0.0, x4_sum = 0.0;
  std::size_t n_kicks = 0;
  for (const ShotTrain& tr : trains) {
    const double rate = static_cast<double>(tr.arrivals.size()) / horizon;
    rate_sum += rate;
    rate_sq += rate * rate;
    double total = 0.0;
    for (const Kick& k : tr.arrivals) {
      total += k.amplitude;
      const double x2 = k.amplitude * k.amplitude;
      x_sum += k.amplitude;
      x2_sum += x2;
      x4_sum += x2 * x2;
    }
    n_kicks += tr.arrivals.size();
    const double c = total / horizon;
    c_sum += c;
    c_sq += c * c;
  }

  const auto n = static_cast<double>(trains.size());
  auto stderr_of = [](double sum, double sq, double count) {
    if (count < 2.0) return 0.0;
    const double mean = sum / count;
    const double var = std::max(0.0, (sq - count * mean * mean) / (count - 1.0));
    return std::sqrt(var / count);
  };

  r.n_kicks = n_kicks;
  r.rate = rate_sum / n;
  r.rate_stderr = stderr_of(rate_sum, rate_sq, n);
  r.mean_c = c_sum / n;
  r.mean_c_stderr = stderr_of(c_sum, c_sq, n);
  if (n_kicks > 0) {
    const auto k = static_cast<double>(n_kicks);
    r.amplitude_mean = x_sum / k;
    r.amplitude_mean_stderr = stderr_of(x_sum, x2_sum, k);
    r.amplitude_second_moment = x2_sum / k;
    r.amplitude_second_moment_stderr = stderr_of(x2_sum, x4_sum, k);
  }
  return r;
}

// ---------------------------------------------------------------------------

void OUParams::validate() const {
  if (!(gamma > 0.0)) throw ParameterError("OU gamma must be > 0");
  if (!(dt > 0.0)) throw ParameterError("OU dt must be > 0");
  if (n_steps < 1) throw ParameterError("OU n_steps must be >= 1");
  if (dt * gamma > stability_bound)
    throw ParameterError("OU step too coarse: dt*gamma = " +
                         std::to_string(dt * gamma) + " exceeds bound " +
                         std::to_string(stability_bound));
}

OUPath sample_ou_path(const OUParams& p, const RngStream& rng) {
  p.validate();
  auto engine = rng.engine();
  std::normal_distribution<double> normal(0.0, 1.0);

  OUPath path;
  path.params = p;
  path.values.resize(p.n_steps + 1);

  // Stationary start: E|z|^2 = gamma/2, split evenly between re and im.
  const double sd0 = std::sqrt(p.gamma / 4.0);
  {
    const double re = normal(engine);
    const double im = normal(engine);
    path.values[0] = {sd0 * re, sd0 * im};
  }

  // With w* = w1 + i w2 (unit-variance parts) the increment has
  // E|dz|^2 = gamma^2 dt, and the stationary E|z|^2 = gamma^2 dt / (2 gamma dt
  // - gamma^2 dt^2) -> gamma/2 as dt -> 0.
  const double decay = 1.0 - p.gamma * p.dt;
  const double kick = std::sqrt(p.dt / 2.0) * p.gamma;
  for (std::size_t k = 0; k < p.n_steps; ++k) {
    const double re = normal(engine);
    const double im = normal(engine);
    path.values[k + 1] = decay * path.values[k] + kick * std::complex<double>(re, im);
  }
  return path;
}

double ou_correlation(double gamma, double lag) {
  return 0.5 * gamma * std::exp(-gamma * std::abs(lag));
}

bool OUStatistics::mean_consistent_with_zero(double n_sigma) const {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(std::abs(mean[i]) < n_sigma * mean_stderr[i])) return false;
  }
  return true;
}

bool OUStatistics::stationary_within(double rel_tol) const {
  const double target_m2 = params.gamma / 2.0;
  for (double m2 : second_moment) {
    if (std::abs(m2 - target_m2) > rel_tol * target_m2) return false;
  }
  return true;
}

namespace {

struct OUAccumulator {
  std::vector<std::complex<double>> corr;
  std::vector<std::complex<double>> z_sum;
  std::vector<double> m2_sum;
  std::vector<double> m4_sum;

  OUAccumulator(std::size_t n_lags, std::size_t n_probes)
      : corr(n_lags), z_sum(n_probes), m2_sum(n_probes), m4_sum(n_probes) {}

  void add(const OUAccumulator& o) {
    for (std::size_t i = 0; i < corr.size(); ++i) corr[i] += o.corr[i];
    for (std::size_t i = 0; i < z_sum.size(); ++i) {
      z_sum[i] += o.z_sum[i];
      m2_sum[i] += o.m2_sum[i];
      m4_sum[i] += o.m4_sum[i];
    }
  }
};

}  // namespace

OUStatistics ou_statistics(const OUParams& p, std::size_t n_paths,
                           double max_lag, std::size_t n_lags,
                           const RngStream& rng, std::size_t threads) {
  p.validate();
  if (n_paths < 2) throw UsageError("ou_statistics needs at least 2 paths");
  if (n_lags < 2) throw UsageError("ou_statistics needs at least 2 lags");

  std::vector<std::size_t> lag_steps(n_lags);
  for (std::size_t i = 0; i < n_lags; ++i) {
    const double lag = max_lag * static_cast<double>(i) / static_cast<double>(n_lags - 1);
    lag_steps[i] = static_cast<std::size_t>(std::llround(lag / p.dt));
  }
  const std::size_t max_lag_steps = lag_steps.back();
  if (max_lag_steps > p.n_steps)
    throw UsageError("ou_statistics: max_lag exceeds the path length");

  // Reference origins s for E[z_{s+lag} z*_s]; stationarity makes them
  // interchangeable, and using several per path tightens the tail estimate.
  std::vector<std::size_t> origins;
  const std::size_t span = p.n_steps - max_lag_steps;
  const std::size_t stride = std::max<std::size_t>(1, std::max<std::size_t>(span / 16, max_lag_steps / 8));
  for (std::size_t s = 0; s <= span; s += stride) origins.push_back(s);

  const std::size_t n_probes = 9;
  std::vector<std::size_t> probe_steps(n_probes);
  for (std::size_t i = 0; i < n_probes; ++i)
    probe_steps[i] = (p.n_steps * i) / (n_probes - 1);

  const std::size_t n_blocks = (n_paths + kReductionBlock - 1) / kReductionBlock;
  std::vector<OUAccumulator> blocks(n_blocks, OUAccumulator(n_lags, n_probes));

  parallel_for(n_blocks, threads, [&](std::size_t b) {
    OUAccumulator& acc = blocks[b];
    const std::size_t begin = b * kReductionBlock;
    const std::size_t end = std::min(n_paths, begin + kReductionBlock);
    for (std::size_t i = begin; i < end; ++i) {
      const OUPath path = sample_ou_path(p, rng.substream(i));
      const auto& z = path.values;
      for (std::size_t l = 0; l < n_lags; ++l) {
        std::complex<double> sum = 0.0;
        for (std::size_t s : origins) sum += std::conj(z[s + lag_steps[l]]) * z[s];
        acc.corr[l] += sum;
      }
      for (std::size_t k = 0; k < n_probes; ++k) {
        const std::complex<double> v = z[probe_steps[k]];
        const double m2 = std::norm(v);
        acc.z_sum[k] += v;
        acc.m2_sum[k] += m2;
        acc.m4_sum[k] += m2 * m2;
      }
    }
  });

  OUAccumulator total(n_lags, n_probes);
  for (const OUAccumulator& b : blocks) total.add(b);

  OUStatistics st;
  st.params = p;
  st.n_paths = n_paths;
  const auto n = static_cast<double>(n_paths);
  const double norm = n * static_cast<double>(origins.size());

  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t l = 0; l < n_lags; ++l) {
    const double lag = static_cast<double>(lag_steps[l]) * p.dt;
    const std::complex<double> est = total.corr[l] / norm;
    const double target = ou_correlation(p.gamma, lag);
    st.lags.push_back(lag);
    st.autocorrelation.push_back(est);
    st.target.push_back(target);
    err2 += std::norm(est - target);
    ref2 += target * target;
  }
  st.relative_rms_error = std::sqrt(err2 / ref2);

  for (std::size_t k = 0; k < n_probes; ++k) {
    const std::complex<double> mean = total.z_sum[k] / n;
    const double m2 = total.m2_sum[k] / n;
    const double m4 = total.m4_sum[k] / n;
    st.probe_times.push_back(static_cast<double>(probe_steps[k]) * p.dt);
    st.mean.push_back(mean);
    st.mean_stderr.push_back(std::sqrt(std::max(0.0, m2 - std::norm(mean)) / (n - 1.0)));
    st.second_moment.push_back(m2);
    st.second_moment_stderr.push_back(std::sqrt(std::max(0.0, m4 - m2 * m2) / (n - 1.0)));
  }
  return st;
}

}  // namespace qsdnoise
