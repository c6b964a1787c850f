#include "qsdnoise/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsdnoise/errors.hpp"
#include "qsdnoise/parallel.hpp"
#include "steppers.hpp"

namespace qsdnoise {

namespace {

void require_increasing(const std::vector<double>& v, const char* name) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1]))
      throw UsageError(std::string(name) + " must be strictly increasing");
  }
}

}  // namespace

std::vector<FidelityStudyCurve> fidelity_study(const FidelityStudyConfig& cfg,
                                               const RngStream& rng) {
  FidelityOptions opts;
  opts.n_trains = cfg.n_trains;
  opts.dt = cfg.dt;
  opts.horizon = cfg.horizon;
  opts.output_stride = cfg.output_stride;
  opts.convention = cfg.convention;
  opts.threads = cfg.threads;

  std::vector<FidelityStudyCurve> out;
  std::uint64_t cell = 0;
  for (double gamma : cfg.gamma_values) {
    SystemParams sys = cfg.system;
    sys.gamma = gamma;

    FidelityStudyCurve free_curve;
    free_curve.gamma = gamma;
    free_curve.free = true;
    free_curve.curve = fidelity_ensemble(sys, ShotNoiseParams{0.0, 0.0, cfg.law}, opts,
                                         rng.substream(cell++));
    out.push_back(std::move(free_curve));

    for (double J : cfg.J_values) {
      for (double W : cfg.W_values) {
        FidelityStudyCurve c;
        c.gamma = gamma;
        c.J = J;
        c.W = W;
        c.curve = fidelity_ensemble(sys, ShotNoiseParams{J, W, cfg.law}, opts,
                                    rng.substream(cell++));
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

SweepConfig SweepConfig::defaults(const SystemParams& sys) {
  SweepConfig cfg;
  cfg.system = sys;
  const std::size_t n = 16;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
    cfg.J_values.push_back(20.0 * f);
    cfg.W_values.push_back((50.0 + (1200.0 - 50.0) * f) / sys.T);
  }
  cfg.probe_times = {50.0 * sys.T, 100.0 * sys.T};
  return cfg;
}

std::optional<double> SweepGrid::plateau_onset(std::size_t j, std::size_t t) const {
  if (W_values.empty()) return std::nullopt;
  const double plateau = F(j, W_values.size() - 1, t);
  std::size_t onset = W_values.size() - 1;
  for (std::size_t w = W_values.size(); w-- > 0;) {
    if (std::abs(F(j, w, t) - plateau) > plateau_tolerance) break;
    onset = w;
  }
  return W_values[onset];
}

SweepGrid fidelity_sweep(const SweepConfig& cfg, const RngStream& rng) {
  cfg.system.validate();
  if (cfg.J_values.empty() || cfg.W_values.empty() || cfg.probe_times.empty())
    throw UsageError("fidelity_sweep needs non-empty J, W and probe-time axes");
  require_increasing(cfg.J_values, "J_values");
  require_increasing(cfg.W_values, "W_values");
  require_increasing(cfg.probe_times, "probe_times");

  SweepGrid grid;
  grid.J_values = cfg.J_values;
  grid.W_values = cfg.W_values;
  grid.probe_times = cfg.probe_times;
  grid.threshold = cfg.threshold;
  grid.plateau_tolerance = cfg.plateau_tolerance;
  const std::size_t nJ = cfg.J_values.size(), nW = cfg.W_values.size(),
                    nt = cfg.probe_times.size();
  grid.fidelity.assign(nJ * nW * nt, 0.0);
  grid.stderr.assign(nJ * nW * nt, 0.0);
  grid.n_traj.assign(nJ * nW, 0);
  grid.excluded.assign(nJ * nW, 0);

  FidelityOptions opts;
  opts.n_trains = cfg.n_traj;
  opts.dt = cfg.dt;
  opts.horizon = cfg.probe_times.back();
  opts.probe_times = cfg.probe_times;
  opts.convention = cfg.convention;
  opts.threads = 1;

  parallel_for(nJ * nW, cfg.threads, [&](std::size_t cell) {
    const std::size_t j = cell / nW, w = cell % nW;
    const ShotNoiseParams noise{cfg.J_values[j], cfg.W_values[w], cfg.law};
    // Divergent cells are flagged by their exclusion count, not fatal.
    FidelityCurve curve;
    try {
      curve = fidelity_ensemble(cfg.system, noise, opts, rng.substream(cell));
    } catch (const DivergenceBudgetError& e) {
      grid.excluded[cell] = e.excluded();
      for (std::size_t t = 0; t < nt; ++t) {
        grid.fidelity[grid.index(j, w, t)] = std::nan("");
        grid.stderr[grid.index(j, w, t)] = std::nan("");
      }
      return;
    }
    grid.n_traj[cell] = curve.n_samples;
    grid.excluded[cell] = curve.excluded;
    for (std::size_t t = 0; t < nt; ++t) {
      grid.fidelity[grid.index(j, w, t)] = curve.values[t];
      grid.stderr[grid.index(j, w, t)] = curve.stderr[t];
    }
  });
  return grid;
}

bool MarkovScan::monotone_degradation() const {
  for (std::size_t i = 1; i < gain.size(); ++i) {
    if (!(gain[i] < gain[i - 1])) return false;
  }
  return true;
}

std::string MarkovScan::trend_summary() const {
  std::ostringstream os;
  os.precision(4);
  os << "suppression gain at t=" << t_probe << ":";
  for (std::size_t i = 0; i < gain.size(); ++i)
    os << " gamma=" << gamma_values[i] << " -> " << gain[i];
  os << (monotone_degradation() ? "; decreasing with gamma"
                                : "; not monotonically decreasing with gamma");
  return os.str();
}

MarkovScan markov_scan(const MarkovScanConfig& cfg, const RngStream& rng) {
  if (cfg.gamma_values.size() < 2) throw UsageError("markov_scan needs at least two gammas");
  require_increasing(cfg.gamma_values, "gamma_values");
  if (cfg.gamma_values.back() < 10.0 * cfg.gamma_values.front() * (1.0 - 1e-12))
    throw UsageError("markov_scan gamma_values must span at least one decade");

  FidelityOptions opts;
  opts.n_trains = cfg.n_traj;
  opts.dt = cfg.dt;
  opts.horizon = cfg.t_probe;
  opts.probe_times = {cfg.t_probe};
  opts.convention = cfg.convention;
  opts.threads = cfg.threads;

  MarkovScan scan;
  scan.t_probe = cfg.t_probe;
  for (std::size_t i = 0; i < cfg.gamma_values.size(); ++i) {
    SystemParams sys = cfg.system;
    sys.gamma = cfg.gamma_values[i];
    // The step bound depends on gamma; shrink dt for the fast-memory end.
    FidelityOptions o = opts;
    o.dt = std::min(cfg.dt, max_riccati_step(sys));
    const FidelityCurve noisy =
        fidelity_ensemble(sys, ShotNoiseParams{cfg.J, cfg.W, cfg.law}, o, rng.substream(i));
    const FidelityCurve free =
        fidelity_ensemble(sys, ShotNoiseParams{0.0, 0.0, cfg.law}, o, rng.substream(i));
    scan.gamma_values.push_back(sys.gamma);
    scan.F_noise.push_back(noisy.values[0]);
    scan.F_noise_stderr.push_back(noisy.stderr[0]);
    scan.F_free.push_back(free.values[0]);
    scan.gain.push_back(noisy.values[0] - free.values[0]);
    scan.gain_stderr.push_back(noisy.stderr[0]);  // free dynamics is deterministic
  }
  return scan;
}

double IntegrandSeries::final_magnitude() const {
  return partial_integral.empty() ? 0.0 : std::abs(partial_integral.back());
}

IntegrandSeries washout_diagnostic(const SystemParams& sys, const ShotTrain& train, double dt,
                                   double horizon, std::size_t output_stride) {
  sys.validate();
  if (!(dt > 0.0) || dt > max_riccati_step(sys) * (1.0 + 1e-12))
    throw ParameterError("washout_diagnostic: dt outside (0, min(0.01/omega, 0.1/gamma)]");
  if (train.horizon < horizon * (1.0 - 1e-12))
    throw UsageError("shot train is shorter than the diagnostic horizon");

  const TimeGrid grid = TimeGrid::covering(dt, horizon);
  const detail::KickSchedule kicks = detail::schedule_kicks(train, grid);
  const std::vector<std::size_t> samples = detail::strided_samples(grid, output_stride);

  IntegrandSeries out;
  out.times.reserve(samples.size());
  out.N.reserve(samples.size());
  out.h.reserve(samples.size());
  out.partial_integral.reserve(samples.size());

  detail::StateStepper stepper(sys, dt);
  std::size_t next = 0, s = 0;
  cplx integral{0.0, 0.0};
  cplx prev_integrand{0.0, 0.0};
  for (std::size_t k = 0;; ++k) {
    detail::apply_kicks_at(stepper, kicks, k, next);
    const cplx N = stepper.rotor(k);
    const cplx overlap = k == 0 ? cplx{1.0, 0.0} : stepper.lab_a(k);
    const cplx h = -stepper.q() * overlap;
    const cplx integrand = std::conj(N) * h;
    if (k > 0) integral += 0.5 * dt * (prev_integrand + integrand);
    prev_integrand = integrand;
    if (s < samples.size() && samples[s] == k) {
      out.times.push_back(grid.time(k));
      out.N.push_back(N);
      out.h.push_back(h);
      out.partial_integral.push_back(k == 0 ? cplx{} : integral);
      ++s;
    }
    if (k == grid.n_steps) break;
    stepper.step(k, cplx{}, cplx{});
    if (stepper.diverged()) throw DivergenceError(grid.time(k + 1), std::abs(stepper.q()));
  }
  return out;
}

std::vector<double> phase_running_average(const SystemParams& sys, const ShotTrain& train,
                                          double dt, double horizon,
                                          std::size_t output_stride) {
  sys.validate();
  if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
  const TimeGrid grid = TimeGrid::covering(dt, horizon);
  const detail::KickSchedule kicks = detail::schedule_kicks(train, grid);
  const std::vector<std::size_t> samples = detail::strided_samples(grid, output_stride);

  std::vector<double> out;
  out.reserve(samples.size());
  double phase = 0.0;
  std::size_t next = 0, s = 0;
  cplx integral{0.0, 0.0};
  cplx prev{1.0, 0.0};
  for (std::size_t k = 0; k <= grid.n_steps; ++k) {
    while (next < kicks.size() && kicks.steps[next] == k) phase += kicks.amplitudes[next++];
    const cplx N = std::polar(1.0, -(sys.omega * grid.time(k) + phase));
    if (k > 0) integral += 0.5 * dt * (prev + N);
    prev = N;
    if (s < samples.size() && samples[s] == k) {
      out.push_back(k == 0 ? 0.0 : std::abs(integral) / grid.time(k));
      ++s;
    }
  }
  return out;
}

}  // namespace qsdnoise
