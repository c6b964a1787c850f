#include "qsdnoise/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>

#include <json.hpp>

#include "qsdnoise/analysis.hpp"
#include "qsdnoise/errors.hpp"
#include "qsdnoise/io.hpp"
#include "qsdnoise/parallel.hpp"
#include "qsdnoise/version.hpp"

namespace qsdnoise {

namespace {

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

class Session {
 public:
  Session(const ExperimentConfig& cfg, OutputSet& out, std::ostream& log)
      : cfg_(cfg), out_(out), log_(log), rng_(cfg.master_seed) {
    // Thread count is an execution detail; leaving it out keeps data files
    // identical across worker counts.
    ExperimentConfig recorded = cfg;
    recorded.threads = 0;
    config_text_ = serialize_config(recorded);
  }

  std::size_t excluded() const { return excluded_; }

  void dispatch() {
    switch (*cfg_.mode) {
      case Mode::simulate: return simulate();
      case Mode::sweep: return sweep();
      case Mode::markov_scan: return markov();
      case Mode::washout: return washout();
      case Mode::noise_test: return noise_test();
      case Mode::crosscheck: return crosscheck();
    }
  }

 private:
  ProvenanceHeader header(std::size_t excluded, Provenance extra = {}) const {
    ProvenanceHeader h;
    h.code_version = version_string;
    h.config_text = config_text_;
    h.master_seed = cfg_.master_seed;
    h.excluded = excluded;
    h.extra = {{"mode", std::string(to_string(*cfg_.mode))},
               {"units", "omega = " + format_number(cfg_.omega) + ", T = " +
                             format_number(cfg_.T()) + "; times and rates in simulator units"}};
    for (auto& kv : extra) h.extra.push_back(std::move(kv));
    return h;
  }

  void stage(const std::string& name, const std::string& content) {
    out_.stage(name, content);
    log_ << "  wrote " << name << "\n";
  }

  std::vector<double> rates(const std::vector<double>& per_T) const {
    std::vector<double> out;
    for (double w : per_T) out.push_back(cfg_.rate(w));
    return out;
  }

  void simulate() {
    FidelityStudyConfig study;
    study.system = cfg_.system();
    study.gamma_values = cfg_.gamma_values.empty() ? std::vector<double>{cfg_.gamma} : cfg_.gamma_values;
    study.J_values = cfg_.J_values.empty() ? std::vector<double>{*cfg_.J} : cfg_.J_values;
    study.W_values = rates(cfg_.W_values.empty() ? std::vector<double>{*cfg_.W} : cfg_.W_values);
    study.law = cfg_.amplitude_law;
    study.n_trains = cfg_.n_trains;
    study.dt = cfg_.dt;
    study.horizon = cfg_.time(cfg_.horizon);
    study.output_stride = cfg_.output_stride;
    study.convention = cfg_.fidelity_convention;
    study.threads = cfg_.threads;

    const auto curves = fidelity_study(study, rng_);
    for (const FidelityStudyCurve& c : curves) {
      excluded_ += c.curve.excluded;
      const std::string name =
          c.free ? "fidelity_free_gamma" + label(c.gamma) + ".csv"
                 : "fidelity_gamma" + label(c.gamma) + "_J" + label(c.J) + "_W" +
                       label(c.W * cfg_.T()) + "perT.csv";
      stage(name, render_csv(c.curve, header(c.curve.excluded, c.curve.provenance)));
    }

    if (!cfg_.density) return;
    EnsembleOptions opts;
    opts.n_traj = cfg_.n_traj;
    opts.dt = cfg_.dt;
    opts.horizon = cfg_.time(cfg_.horizon);
    opts.policy = cfg_.train_policy;
    opts.output_stride = cfg_.output_stride;
    opts.threads = cfg_.threads;
    opts.ou_stability_bound = cfg_.dt_gamma_bound;
    std::uint64_t cell = 0;
    for (double gamma : study.gamma_values) {
      SystemParams sys = study.system;
      sys.gamma = gamma;
      for (double J : study.J_values) {
        for (double W : study.W_values) {
          const DensityCurve rho = ensemble_density(sys, ShotNoiseParams{J, W, cfg_.amplitude_law},
                                                    opts, rng_.substream({1, cell++}));
          excluded_ += rho.excluded;
          stage("density_gamma" + label(gamma) + "_J" + label(J) + "_W" + label(W * cfg_.T()) +
                    "perT.csv",
                render_csv(rho, header(rho.excluded, rho.provenance)));
        }
      }
    }
  }

  void sweep() {
    SweepConfig sc = SweepConfig::defaults(cfg_.system());
    if (!cfg_.J_values.empty()) sc.J_values = cfg_.J_values;
    if (!cfg_.W_values.empty()) sc.W_values = rates(cfg_.W_values);
    if (!cfg_.probe_times.empty()) {
      sc.probe_times.clear();
      for (double t : cfg_.probe_times) sc.probe_times.push_back(cfg_.time(t));
    }
    sc.law = cfg_.amplitude_law;
    sc.n_traj = cfg_.n_traj;
    sc.dt = cfg_.dt;
    sc.convention = cfg_.fidelity_convention;
    sc.threads = cfg_.threads;

    const SweepGrid grid = fidelity_sweep(sc, rng_);
    std::size_t excluded = 0;
    for (std::size_t e : grid.excluded) excluded += e;
    excluded_ += excluded;
    const Provenance extra = {{"convention", std::string(to_string(sc.convention))},
                              {"gamma", format_number(sc.system.gamma)}};
    for (std::size_t t = 0; t < grid.probe_times.size(); ++t) {
      stage("sweep_t" + label(grid.probe_times[t] / cfg_.T()) + "T.csv",
            render_csv(grid, t, header(excluded, extra)));
    }
    stage("plateau.csv", render_plateau_csv(grid, header(excluded, extra)));
  }

  void markov() {
    MarkovScanConfig mc;
    mc.system = cfg_.system();
    if (!cfg_.gamma_values.empty()) mc.gamma_values = cfg_.gamma_values;
    mc.J = *cfg_.J;
    mc.W = cfg_.rate(*cfg_.W);
    mc.t_probe = cfg_.time(cfg_.t_probe);
    mc.law = cfg_.amplitude_law;
    mc.n_traj = cfg_.n_trains;
    mc.dt = cfg_.dt;
    mc.convention = cfg_.fidelity_convention;
    mc.threads = cfg_.threads;

    const MarkovScan scan = markov_scan(mc, rng_);
    log_ << "  " << scan.trend_summary() << "\n";
    stage("markov_scan.csv", render_csv(scan, header(0, {{"trend", scan.trend_summary()}})));
  }

  void washout() {
    const SystemParams sys = cfg_.system();
    const std::vector<double> Js =
        !cfg_.J_values.empty() ? cfg_.J_values
                               : (cfg_.J ? std::vector<double>{*cfg_.J} : std::vector<double>{3, 8, 15});
    const double horizon = cfg_.time(cfg_.horizon);
    std::string summary = "J,abs_I_final\n";
    for (std::size_t i = 0; i < Js.size(); ++i) {
      const ShotTrain train = sample_shot_train(
          ShotNoiseParams{Js[i], cfg_.rate(*cfg_.W), cfg_.amplitude_law}, horizon + cfg_.dt,
          train_stream(rng_, i));
      const IntegrandSeries s = washout_diagnostic(sys, train, cfg_.dt, horizon, cfg_.output_stride);
      summary += format_number(Js[i]) + "," + format_number(s.final_magnitude()) + "\n";
      stage("washout_J" + label(Js[i]) + ".csv",
            render_csv(s, header(0, {{"overlap", "<psi_0|psi_t> from the z* = 0 amplitude"}})));
    }
    stage("washout_summary.csv", provenance_block(header(0)) + summary);
  }

  void noise_test() {
    const ShotNoiseParams shots{*cfg_.J, cfg_.rate(*cfg_.W), cfg_.amplitude_law};
    const double horizon = cfg_.time(cfg_.horizon);
    std::vector<ShotTrain> trains(cfg_.n_paths);
    const RngStream shot_rng = rng_.substream(0);
    parallel_for(trains.size(), cfg_.threads, [&](std::size_t i) {
      trains[i] = sample_shot_train(shots, horizon, shot_rng.substream(i));
    });
    const MomentsReport moments = shot_train_moments(trains, shots);
    trains.clear();

    OUParams ou;
    ou.gamma = cfg_.gamma;
    ou.dt = cfg_.ou_dt;
    ou.n_steps = static_cast<std::size_t>(std::llround(cfg_.ou_length / cfg_.ou_dt));
    ou.stability_bound = cfg_.dt_gamma_bound;
    const OUStatistics stats =
        ou_statistics(ou, cfg_.n_paths, cfg_.max_lag, cfg_.n_lags, rng_.substream(1), cfg_.threads);
    stage("moments.json", render_json(moments, stats, header(0)));
  }

  void crosscheck() {
    const SystemParams sys = cfg_.system();
    const double horizon = cfg_.time(cfg_.horizon);
    ShotTrain train{horizon + cfg_.dt, {}};
    if (cfg_.J && cfg_.W) {
      train = sample_shot_train(ShotNoiseParams{*cfg_.J, cfg_.rate(*cfg_.W), cfg_.amplitude_law},
                                horizon + cfg_.dt, train_stream(rng_, 0));
    }
    ConventionReport report =
        crosscheck_conventions(sys, train, cfg_.dt, horizon, cfg_.output_stride);
    report.selected = cfg_.fidelity_convention;
    log_ << "  log-fidelity ratio " << report.mean_ratio << " (g = " << sys.g << "), "
         << (report.ratio_equals_g ? "equals g" : "differs from g") << "\n";
    stage("convention.csv", render_csv(report, header(0)));
    stage("convention.json", render_json(report, header(0)));
  }

  const ExperimentConfig& cfg_;
  OutputSet& out_;
  std::ostream& log_;
  RngStream rng_;
  std::string config_text_;
  std::size_t excluded_ = 0;
};

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunReport run(ExperimentConfig config, const RunOptions& options, std::ostream& log) {
  RunReport report;
  if (options.seed) config.master_seed = *options.seed;
  if (options.threads) config.threads = *options.threads;

  const auto issues = validate_config(config);
  if (!issues.empty()) {
    report.code = ExitCode::validation;
    for (const ConfigIssue& i : issues) report.message += i.message + "\n";
    return report;
  }

  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  try {
    OutputSet out(options.out_dir);
    Session session(config, out, log);
    log << "qsdnoise " << version_string << ": " << to_string(*config.mode) << " -> "
        << options.out_dir.string() << "\n";
    session.dispatch();

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    ExperimentConfig recorded = config;
    recorded.threads = 0;
    nlohmann::ordered_json manifest;
    manifest["code_version"] = version_string;
    manifest["mode"] = std::string(to_string(*config.mode));
    manifest["master_seed"] = config.master_seed;
    manifest["excluded_trajectories"] = session.excluded();
    manifest["config"] = serialize_config(recorded);
    manifest["files"] = nlohmann::ordered_json::array();
    for (const OutputSet::Entry& e : out.entries())
      manifest["files"].push_back({{"name", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    manifest["execution"] = {
        {"threads", config.threads == 0 ? default_thread_count() : config.threads},
        {"started_at_utc", started_at},
        {"wall_clock_seconds", seconds}};
    out.stage("manifest.json", manifest.dump(2) + "\n");
    out.commit();
    for (const OutputSet::Entry& e : out.entries()) report.files.push_back(e.name);
    report.message = "ok";
  } catch (const DivergenceBudgetError& e) {
    report.code = ExitCode::divergence;
    report.message = e.what();
  } catch (const DivergenceError& e) {
    report.code = ExitCode::divergence;
    report.message = e.what();
  } catch (const IoError& e) {
    report.code = ExitCode::io;
    report.message = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    report.code = ExitCode::io;
    report.message = e.what();
  } catch (const ParameterError& e) {
    report.code = ExitCode::validation;
    report.message = e.what();
  } catch (const UsageError& e) {
    report.code = ExitCode::validation;
    report.message = e.what();
  } catch (const std::exception& e) {
    report.code = ExitCode::failure;
    report.message = e.what();
  }
  return report;
}

}  // namespace qsdnoise
