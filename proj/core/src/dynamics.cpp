#include "qsdnoise/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qsdnoise/errors.hpp"
#include "qsdnoise/parallel.hpp"
#include "steppers.hpp"

namespace qsdnoise {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_step(const SystemParams& sys, double dt, double horizon) {
  if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
  const double limit = max_riccati_step(sys);
  // Small slack so that dt = 0.01 passes when 0.01/omega rounds below it.
  if (dt > limit * (1.0 + 1e-12))
    throw ParameterError("dt=" + num(dt) + " exceeds min(0.01/omega, 0.1/gamma)=" + num(limit));
  if (!(horizon >= dt)) throw ParameterError("horizon must be >= dt");
}

}  // namespace

void SystemParams::validate() const {
  if (!(omega > 0.0)) throw ParameterError("omega must be > 0");
  if (!(g >= 0.0)) throw ParameterError("g must be >= 0");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be > 0");
  if (!(T > 0.0)) throw ParameterError("T must be > 0");
}

TimeGrid TimeGrid::covering(double dt, double horizon) {
  if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
  if (!(horizon >= 0.0)) throw ParameterError("horizon must be >= 0");
  TimeGrid grid;
  grid.dt = dt;
  grid.n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
  return grid;
}

std::size_t TimeGrid::nearest(double t) const {
  if (t <= 0.0) return 0;
  const auto k = static_cast<std::size_t>(std::llround(t / dt));
  return std::min(k, n_steps);
}

double max_riccati_step(const SystemParams& sys) {
  return std::min(0.01 / sys.omega, 0.1 / sys.gamma);
}

namespace detail {

KickSchedule schedule_kicks(const ShotTrain& train, const TimeGrid& grid) {
  KickSchedule s;
  s.steps.reserve(train.arrivals.size());
  s.times.reserve(train.arrivals.size());
  s.amplitudes.reserve(train.arrivals.size());
  const double end = grid.horizon() + 0.5 * grid.dt;
  for (const Kick& k : train.arrivals) {
    if (k.time >= end) break;
    const std::size_t step = grid.nearest(k.time);
    s.steps.push_back(step);
    s.times.push_back(k.time);
    s.amplitudes.push_back(k.amplitude);
    s.max_snap_error = std::max(s.max_snap_error, std::abs(k.time - grid.time(step)));
  }
  return s;
}

std::vector<std::size_t> strided_samples(const TimeGrid& grid, std::size_t stride) {
  if (stride == 0) stride = 1;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k <= grid.n_steps; k += stride) out.push_back(k);
  if (out.back() != grid.n_steps) out.push_back(grid.n_steps);
  return out;
}

std::vector<std::size_t> probe_samples(const TimeGrid& grid, const std::vector<double>& times) {
  std::vector<std::size_t> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t < 0.0 || t > grid.horizon() + 0.5 * grid.dt)
      throw UsageError("probe time " + num(t) + " outside [0, " + num(grid.horizon()) + "]");
    out.push_back(grid.nearest(t));
  }
  return out;
}

}  // namespace detail

QTrajectory QTrajectory::from_samples(TimeGrid grid, std::vector<cplx> values) {
  if (values.size() != grid.size())
    throw UsageError("QTrajectory::from_samples: value count does not match grid");
  QTrajectory q;
  q.grid = grid;
  q.values = std::move(values);
  q.re_integral.resize(q.values.size());
  q.re_integral[0] = 0.0;
  for (std::size_t k = 1; k < q.values.size(); ++k) {
    q.re_integral[k] = q.re_integral[k - 1] +
                       0.5 * grid.dt * (q.values[k - 1].real() + q.values[k].real());
  }
  return q;
}

QTrajectory integrate_q(const SystemParams& sys, const ShotTrain& train, double dt,
                        double horizon) {
  sys.validate();
  check_step(sys, dt, horizon);
  if (train.horizon < horizon * (1.0 - 1e-12))
    throw UsageError("shot train horizon " + num(train.horizon) +
                     " is shorter than the integration horizon " + num(horizon));

  const TimeGrid grid = TimeGrid::covering(dt, horizon);
  const detail::KickSchedule kicks = detail::schedule_kicks(train, grid);

  QTrajectory out;
  out.grid = grid;
  out.values.resize(grid.size());
  out.re_integral.resize(grid.size());
  out.kicks.reserve(kicks.size());
  out.max_snap_error = kicks.max_snap_error;

  detail::RiccatiStepper stepper(sys, dt);
  std::size_t next = 0;
  for (std::size_t k = 0;; ++k) {
    while (next < kicks.size() && kicks.steps[next] == k) {
      const cplx before = stepper.q();
      stepper.kick(kicks.amplitudes[next]);
      out.kicks.push_back({k, kicks.times[next], kicks.amplitudes[next], before, stepper.q()});
      ++next;
    }
    out.values[k] = stepper.q();
    out.re_integral[k] = stepper.integral();
    if (k == grid.n_steps) break;
    stepper.step();
    if (stepper.diverged()) throw DivergenceError(grid.time(k + 1), std::abs(stepper.q()));
  }
  return out;
}

std::string_view to_string(FidelityConvention c) {
  return c == FidelityConvention::riccati ? "riccati" : "amplitude";
}

FidelityConvention fidelity_convention_from_string(std::string_view name) {
  if (name == "riccati") return FidelityConvention::riccati;
  if (name == "amplitude") return FidelityConvention::amplitude;
  throw ParameterError("unknown fidelity convention '" + std::string(name) +
                       "' (expected riccati or amplitude)");
}

std::string_view to_string(TrainPolicy p) {
  return p == TrainPolicy::shared ? "shared" : "fresh";
}

TrainPolicy train_policy_from_string(std::string_view name) {
  if (name == "shared") return TrainPolicy::shared;
  if (name == "fresh") return TrainPolicy::fresh;
  throw ParameterError("unknown train policy '" + std::string(name) +
                       "' (expected shared or fresh)");
}

FidelityCurve fidelity_from_q(const QTrajectory& q, FidelityConvention convention, double g) {
  const double scale = convention == FidelityConvention::riccati ? 1.0 : g;
  FidelityCurve f;
  f.convention = convention;
  f.times.resize(q.values.size());
  f.values.resize(q.values.size());
  for (std::size_t k = 0; k < q.values.size(); ++k) {
    f.times[k] = q.grid.time(k);
    f.values[k] = k == 0 ? 1.0 : std::exp(-scale * q.re_integral[k]);
  }
  f.provenance = {{"dt", num(q.grid.dt)}, {"convention", std::string(to_string(convention))}};
  return f;
}

StateTrajectory propagate_trajectory(const SystemParams& sys, const ShotTrain& train,
                                     const OUPath& ou, double dt) {
  sys.validate();
  if (std::abs(ou.params.dt - dt) > 1e-12 * dt)
    throw UsageError("environment path step " + num(ou.params.dt) +
                     " does not match integration step " + num(dt));
  if (ou.values.size() != ou.params.n_steps + 1)
    throw UsageError("environment path length does not match its n_steps");

  TimeGrid grid;
  grid.dt = dt;
  grid.n_steps = ou.params.n_steps;
  check_step(sys, dt, grid.horizon());
  if (train.horizon < grid.horizon() * (1.0 - 1e-12))
    throw UsageError("shot train is shorter than the environment path");

  const detail::KickSchedule kicks = detail::schedule_kicks(train, grid);

  StateTrajectory out;
  out.grid = grid;
  out.a.resize(grid.size());
  out.b.resize(grid.size());

  detail::StateStepper stepper(sys, dt);
  std::size_t next = 0;
  for (std::size_t k = 0;; ++k) {
    detail::apply_kicks_at(stepper, kicks, k, next);
    if (k == 0) {
      out.a[0] = {1.0, 0.0};
      out.b[0] = {0.0, 0.0};
    } else {
      out.a[k] = stepper.lab_a(k);
      out.b[k] = stepper.lab_b(k);
    }
    if (k == grid.n_steps) break;
    stepper.step(k, ou.values[k], ou.values[k + 1]);
    if (stepper.diverged()) throw DivergenceError(grid.time(k + 1), std::abs(stepper.q()));
  }
  return out;
}

RngStream train_stream(const RngStream& rng, std::size_t trajectory) {
  return rng.substream({static_cast<std::uint64_t>(trajectory), 0});
}

RngStream environment_stream(const RngStream& rng, std::size_t trajectory) {
  return rng.substream({static_cast<std::uint64_t>(trajectory), 1});
}

namespace {

struct DensityAccumulator {
  std::vector<Matrix2> sum;
  std::vector<std::array<double, 4>> sum_sq;
  std::size_t count = 0;
  std::size_t excluded = 0;

  explicit DensityAccumulator(std::size_t n) : sum(n, Matrix2{}), sum_sq(n, {0, 0, 0, 0}) {}
};

struct ScalarAccumulator {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::size_t count = 0;
  std::size_t excluded = 0;

  explicit ScalarAccumulator(std::size_t n) : sum(n, 0.0), sum_sq(n, 0.0) {}
};

void check_budget(std::size_t excluded, std::size_t total) {
  if (static_cast<double>(excluded) > 0.01 * static_cast<double>(total))
    throw DivergenceBudgetError(excluded, total);
}

double stderr_from(double sum, double sum_sq, std::size_t n) {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0));
  return std::sqrt(var / nn);
}

}  // namespace

DensityCurve ensemble_density(const SystemParams& sys, const ShotNoiseParams& noise,
                              const EnsembleOptions& opts, const RngStream& rng) {
  sys.validate();
  noise.validate();
  if (opts.n_traj < 1) throw UsageError("ensemble_density needs n_traj >= 1");
  check_step(sys, opts.dt, opts.horizon);

  const TimeGrid grid = TimeGrid::covering(opts.dt, opts.horizon);
  const std::vector<std::size_t> samples = detail::strided_samples(grid, opts.output_stride);
  const std::size_t n_out = samples.size();

  OUParams ou_params;
  ou_params.gamma = sys.gamma;
  ou_params.dt = opts.dt;
  ou_params.n_steps = grid.n_steps;
  ou_params.stability_bound = opts.ou_stability_bound;
  if (!opts.zero_environment) ou_params.validate();

  ShotTrain shared;
  if (opts.policy == TrainPolicy::shared)
    shared = sample_shot_train(noise, grid.horizon() + opts.dt, rng.substream(kSharedTrainStream));

  const std::size_t n_blocks = (opts.n_traj + kReductionBlock - 1) / kReductionBlock;
  std::vector<DensityAccumulator> blocks(n_blocks, DensityAccumulator(n_out));

  parallel_for(n_blocks, opts.threads, [&](std::size_t blk) {
    DensityAccumulator& acc = blocks[blk];
    const std::size_t begin = blk * kReductionBlock;
    const std::size_t end = std::min(opts.n_traj, begin + kReductionBlock);
    std::vector<Matrix2> rho(n_out);
    for (std::size_t i = begin; i < end; ++i) {
      ShotTrain fresh;
      if (opts.policy == TrainPolicy::fresh)
        fresh = sample_shot_train(noise, grid.horizon() + opts.dt, train_stream(rng, i));
      const ShotTrain& train = opts.policy == TrainPolicy::fresh ? fresh : shared;
      const detail::KickSchedule kicks = detail::schedule_kicks(train, grid);

      std::vector<cplx> z;
      if (!opts.zero_environment) z = sample_ou_path(ou_params, environment_stream(rng, i)).values;
      auto z_at = [&](std::size_t k) { return z.empty() ? cplx{} : z[k]; };

      detail::StateStepper stepper(sys, opts.dt);
      std::size_t next = 0;
      std::size_t s = 0;
      bool diverged = false;
      for (std::size_t k = 0;; ++k) {
        detail::apply_kicks_at(stepper, kicks, k, next);
        if (s < n_out && samples[s] == k) {
          // Populations and the coherence are frame-independent up to the
          // rotor e^{-i theta}, applied only to the off-diagonal element.
          const cplx a = stepper.a_frame();
          const cplx b = stepper.b_frame();
          const cplx coherence = k == 0 ? cplx{} : a * std::conj(b) * stepper.rotor(k);
          rho[s] = {cplx(std::norm(a)), coherence, std::conj(coherence), cplx(std::norm(b))};
          ++s;
        }
        if (k == grid.n_steps) break;
        stepper.step(k, z_at(k), z_at(k + 1));
        if (stepper.diverged()) {
          diverged = true;
          break;
        }
      }
      if (diverged) {
        ++acc.excluded;
        continue;
      }
      ++acc.count;
      for (std::size_t j = 0; j < n_out; ++j) {
        for (std::size_t e = 0; e < 4; ++e) {
          acc.sum[j][e] += rho[j][e];
          acc.sum_sq[j][e] += std::norm(rho[j][e]);
        }
      }
    }
  });

  DensityAccumulator total(n_out);
  for (const DensityAccumulator& b : blocks) {
    total.count += b.count;
    total.excluded += b.excluded;
    for (std::size_t j = 0; j < n_out; ++j) {
      for (std::size_t e = 0; e < 4; ++e) {
        total.sum[j][e] += b.sum[j][e];
        total.sum_sq[j][e] += b.sum_sq[j][e];
      }
    }
  }
  check_budget(total.excluded, opts.n_traj);

  DensityCurve out;
  out.n_traj = total.count;
  out.excluded = total.excluded;
  out.times.reserve(n_out);
  out.rho.resize(n_out);
  out.stderr.resize(n_out);
  const double n = static_cast<double>(total.count);
  for (std::size_t j = 0; j < n_out; ++j) {
    out.times.push_back(grid.time(samples[j]));
    for (std::size_t e = 0; e < 4; ++e) {
      const cplx mean = total.sum[j][e] / n;
      out.rho[j][e] = mean;
      const double var = total.count > 1
                             ? std::max(0.0, (total.sum_sq[j][e] - n * std::norm(mean)) / (n - 1.0))
                             : 0.0;
      out.stderr[j][e] = std::sqrt(var / n);
    }
  }
  out.provenance = {
      {"omega", num(sys.omega)},         {"g", num(sys.g)},
      {"gamma", num(sys.gamma)},         {"T", num(sys.T)},
      {"J", num(noise.J)},               {"W", num(noise.W)},
      {"amplitude_law", std::string(to_string(noise.law))},
      {"dt", num(opts.dt)},              {"horizon", num(grid.horizon())},
      {"n_traj", std::to_string(opts.n_traj)},
      {"train_policy", std::string(to_string(opts.policy))},
      {"zero_environment", opts.zero_environment ? "true" : "false"},
      {"master_seed", std::to_string(rng.master_seed())},
      {"excluded", std::to_string(out.excluded)},
  };
  return out;
}

FidelityCurve fidelity_ensemble(const SystemParams& sys, const ShotNoiseParams& noise,
                                const FidelityOptions& opts, const RngStream& rng) {
  sys.validate();
  noise.validate();
  if (opts.n_trains < 1) throw UsageError("fidelity_ensemble needs n_trains >= 1");
  check_step(sys, opts.dt, opts.horizon);

  const TimeGrid grid = TimeGrid::covering(opts.dt, opts.horizon);
  const std::vector<std::size_t> samples =
      opts.probe_times.empty() ? detail::strided_samples(grid, opts.output_stride)
                               : detail::probe_samples(grid, opts.probe_times);
  // Probe times need not be sorted; integrate once and read in step order.
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return samples[x] < samples[y]; });
  const std::size_t n_out = samples.size();
  const double scale = opts.convention == FidelityConvention::riccati ? 1.0 : sys.g;
  const bool deterministic = noise.J == 0.0 || noise.W == 0.0;
  const std::size_t n_runs = deterministic ? 1 : opts.n_trains;

  const std::size_t n_blocks = (n_runs + kReductionBlock - 1) / kReductionBlock;
  std::vector<ScalarAccumulator> blocks(n_blocks, ScalarAccumulator(n_out));

  parallel_for(n_blocks, opts.threads, [&](std::size_t blk) {
    ScalarAccumulator& acc = blocks[blk];
    const std::size_t begin = blk * kReductionBlock;
    const std::size_t end = std::min(n_runs, begin + kReductionBlock);
    std::vector<double> f(n_out);
    for (std::size_t i = begin; i < end; ++i) {
      const ShotTrain train =
          sample_shot_train(noise, grid.horizon() + opts.dt, train_stream(rng, i));
      const detail::KickSchedule kicks = detail::schedule_kicks(train, grid);
      detail::RiccatiStepper stepper(sys, opts.dt);
      std::size_t next = 0;
      std::size_t s = 0;
      bool diverged = false;
      for (std::size_t k = 0;; ++k) {
        detail::apply_kicks_at(stepper, kicks, k, next);
        while (s < n_out && samples[order[s]] == k) {
          f[order[s]] = k == 0 ? 1.0 : std::exp(-scale * stepper.integral());
          ++s;
        }
        if (s == n_out || k == grid.n_steps) break;
        stepper.step();
        if (stepper.diverged()) {
          diverged = true;
          break;
        }
      }
      if (diverged) {
        ++acc.excluded;
        continue;
      }
      ++acc.count;
      for (std::size_t j = 0; j < n_out; ++j) {
        acc.sum[j] += f[j];
        acc.sum_sq[j] += f[j] * f[j];
      }
    }
  });

  ScalarAccumulator total(n_out);
  for (const ScalarAccumulator& b : blocks) {
    total.count += b.count;
    total.excluded += b.excluded;
    for (std::size_t j = 0; j < n_out; ++j) {
      total.sum[j] += b.sum[j];
      total.sum_sq[j] += b.sum_sq[j];
    }
  }
  check_budget(total.excluded, n_runs);
  if (total.count == 0) throw DivergenceBudgetError(total.excluded, n_runs);

  FidelityCurve out;
  out.convention = opts.convention;
  out.n_samples = total.count;
  out.excluded = total.excluded;
  for (std::size_t j = 0; j < n_out; ++j) {
    out.times.push_back(grid.time(samples[j]));
    out.values.push_back(total.sum[j] / static_cast<double>(total.count));
    out.stderr.push_back(stderr_from(total.sum[j], total.sum_sq[j], total.count));
  }
  out.provenance = {
      {"omega", num(sys.omega)},  {"g", num(sys.g)},         {"gamma", num(sys.gamma)},
      {"T", num(sys.T)},          {"J", num(noise.J)},       {"W", num(noise.W)},
      {"amplitude_law", std::string(to_string(noise.law))},
      {"dt", num(opts.dt)},       {"horizon", num(grid.horizon())},
      {"n_trains", std::to_string(n_runs)},
      {"convention", std::string(to_string(opts.convention))},
      {"master_seed", std::to_string(rng.master_seed())},
      {"excluded", std::to_string(out.excluded)},
  };
  return out;
}

ConventionReport crosscheck_conventions(const SystemParams& sys, const ShotTrain& train,
                                        double dt, double horizon, std::size_t output_stride,
                                        double tolerance) {
  const QTrajectory q = integrate_q(sys, train, dt, horizon);

  // |A| is frame-independent, so read it in the rotating frame where the
  // free and kick phases never touch it.
  const detail::KickSchedule kicks = detail::schedule_kicks(train, q.grid);
  std::vector<double> amp(q.grid.size());
  detail::StateStepper stepper(sys, dt);
  std::size_t next = 0;
  for (std::size_t k = 0;; ++k) {
    detail::apply_kicks_at(stepper, kicks, k, next);
    amp[k] = std::abs(stepper.a_frame());
    if (k == q.grid.n_steps) break;
    stepper.step(k, cplx{}, cplx{});
    if (stepper.diverged()) throw DivergenceError(q.grid.time(k + 1), std::abs(stepper.q()));
  }

  ConventionReport r;
  r.g = sys.g;
  r.tolerance = tolerance;
  double ratio_sum = 0.0;
  std::size_t ratio_count = 0;
  double max_fid_gap = 0.0;
  for (std::size_t k : detail::strided_samples(q.grid, output_stride)) {
    const double lr = -q.re_integral[k];
    const double la = k == 0 ? 0.0 : std::log(amp[k]);
    r.times.push_back(q.grid.time(k));
    r.log_f_riccati.push_back(lr);
    r.log_f_amplitude.push_back(la);
    max_fid_gap = std::max(max_fid_gap, std::abs(std::exp(lr) - std::exp(la)));
    if (lr != 0.0) {
      const double ratio = la / lr;
      r.ratio.push_back(ratio);
      ratio_sum += ratio;
      ++ratio_count;
      r.max_deviation = std::max(r.max_deviation, std::abs(ratio - sys.g));
    } else {
      r.ratio.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  r.mean_ratio = ratio_count > 0 ? ratio_sum / static_cast<double>(ratio_count) : sys.g;
  r.ratio_equals_g = r.max_deviation <= tolerance;
  r.conventions_coincide = max_fid_gap <= tolerance;
  return r;
}

}  // namespace qsdnoise
