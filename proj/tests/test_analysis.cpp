#include <doctest.h>

#include <cmath>

#include "qsdnoise/analysis.hpp"
#include "qsdnoise/errors.hpp"

using namespace qsdnoise;

TEST_CASE("fidelity study lays out free curves first for each gamma") {
  FidelityStudyConfig cfg;
  cfg.gamma_values = {0.2, 0.5};
  cfg.J_values = {3.0};
  cfg.W_values = {10.0, 20.0};
  cfg.n_trains = 4;
  cfg.horizon = 10.0;
  const auto curves = fidelity_study(cfg, RngStream(1));
  REQUIRE(curves.size() == 6);
  CHECK(curves[0].free);
  CHECK(curves[0].gamma == 0.2);
  CHECK_FALSE(curves[1].free);
  CHECK(curves[2].W == 20.0);
  CHECK(curves[3].free);
  CHECK(curves[3].gamma == 0.5);

  SystemParams sys = cfg.system;
  sys.gamma = 0.5;
  const FidelityCurve direct = fidelity_from_q(integrate_q(sys, ShotTrain{10.0, {}}, cfg.dt, 10.0));
  CHECK(curves[3].curve.values.back() == doctest::Approx(direct.values.back()).epsilon(1e-12));
}

TEST_CASE("sweep grid layout and free-dynamics cells") {
  SweepConfig cfg;
  cfg.J_values = {0.0, 5.0};
  cfg.W_values = {10.0, 40.0, 80.0};
  cfg.probe_times = {10.0, 20.0};
  cfg.n_traj = 8;
  const SweepGrid g = fidelity_sweep(cfg, RngStream(2));
  REQUIRE(g.fidelity.size() == 12);
  CHECK(g.index(1, 2, 1) == 11);
  const FidelityCurve free = fidelity_from_q(integrate_q(cfg.system, ShotTrain{20.0, {}}, cfg.dt, 20.0));
  for (std::size_t w = 0; w < 3; ++w) {
    CHECK(g.F(0, w, 0) == doctest::Approx(free.values[10000]).epsilon(1e-12));
    CHECK(g.F(0, w, 1) == doctest::Approx(free.values[20000]).epsilon(1e-12));
  }
  for (std::size_t w = 0; w < 3; ++w) CHECK(g.F(1, w, 1) > g.F(0, w, 1));

  cfg.threads = 1;
  const SweepGrid g1 = fidelity_sweep(cfg, RngStream(2));
  cfg.threads = 3;
  const SweepGrid g3 = fidelity_sweep(cfg, RngStream(2));
  CHECK(g1.fidelity == g3.fidelity);
  CHECK(g1.stderr == g3.stderr);

  const SweepConfig d = SweepConfig::defaults(SystemParams{});
  CHECK(d.J_values.size() == 16);
  CHECK(d.W_values.front() == doctest::Approx(10.0));
  CHECK(d.W_values.back() == doctest::Approx(240.0));
  CHECK(d.probe_times == std::vector<double>{250.0, 500.0});
}

TEST_CASE("plateau onset") {
  SweepGrid g;
  g.J_values = {1.0};
  g.W_values = {1, 2, 3, 4, 5};
  g.probe_times = {1.0};
  g.plateau_tolerance = 0.005;
  g.fidelity = {0.5, 0.9, 0.996, 0.999, 1.0};
  CHECK(g.plateau_onset(0, 0).value() == 3.0);
  g.fidelity = {0.5, 0.999, 0.98, 0.999, 1.0};
  CHECK(g.plateau_onset(0, 0).value() == 4.0);
  g.W_values.clear();
  CHECK_FALSE(g.plateau_onset(0, 0).has_value());
}

TEST_CASE("markov scan") {
  MarkovScanConfig cfg;
  cfg.system.g = 0.0;
  cfg.gamma_values = {0.2, 2.0};
  cfg.t_probe = 10.0;
  cfg.n_traj = 4;
  const MarkovScan s = markov_scan(cfg, RngStream(3));
  for (double gain : s.gain) CHECK(gain == 0.0);

  cfg.gamma_values = {0.2, 0.5};
  CHECK_THROWS_AS(markov_scan(cfg, RngStream(3)), UsageError);
  cfg.gamma_values = {2.0, 0.2};
  CHECK_THROWS_AS(markov_scan(cfg, RngStream(3)), UsageError);

  MarkovScan m;
  m.gamma_values = {0.2, 0.5, 5.0};
  m.gain = {0.8, 0.5, 0.1};
  CHECK(m.monotone_degradation());
  m.gain = {0.8, 0.9, 0.1};
  CHECK_FALSE(m.monotone_degradation());
  CHECK(m.trend_summary().find("not monotonically") != std::string::npos);
}

TEST_CASE("washout diagnostic without kicks") {
  const SystemParams sys;
  const IntegrandSeries s = washout_diagnostic(sys, ShotTrain{50.0, {}}, 1e-3, 50.0, 100);
  CHECK(s.partial_integral.front() == cplx{});
  for (std::size_t j = 0; j < s.times.size(); ++j)
    REQUIRE(std::abs(s.N[j] - std::polar(1.0, -s.times[j])) < 1e-12);
}

TEST_CASE("washout phase factor stays on the unit circle") {
  const SystemParams sys;
  const ShotTrain tr = sample_shot_train({8.0, 200.0}, 50.0, RngStream(4));
  const IntegrandSeries s = washout_diagnostic(sys, tr, 1e-3, 50.0, 1);
  CHECK(s.partial_integral.front() == cplx{});
  for (const cplx& n : s.N) REQUIRE(std::abs(std::abs(n) - 1.0) < 1e-12);
  CHECK_THROWS_AS(washout_diagnostic(sys, tr, 1e-3, 60.0), UsageError);
  CHECK_THROWS_AS(washout_diagnostic(sys, tr, 0.05, 50.0), ParameterError);
}

TEST_CASE("running average of the phase factor decays") {
  const SystemParams sys;
  SUBCASE("empty train: bounded by 2/(omega t)") {
    const auto avg = phase_running_average(sys, ShotTrain{100.0, {}}, 1e-3, 100.0, 1000);
    CHECK(avg.front() == 0.0);
    for (std::size_t j = 1; j < avg.size(); ++j) CHECK(avg[j] <= 2.0 / double(j) + 1e-9);
  }
  SUBCASE("white shot noise") {
    const ShotTrain tr = sample_shot_train({3.0, 200.0}, 500.0, RngStream(9));
    const auto avg = phase_running_average(sys, tr, 1e-3, 500.0, 50000);
    REQUIRE(avg.size() == 11);
    CHECK(avg.back() < avg[1]);
    CHECK(avg.back() < 0.05);
  }
}
