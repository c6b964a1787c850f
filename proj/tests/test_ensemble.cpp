#include <doctest.h>

#include <cmath>
#include <cstring>

#include "qsdnoise/dynamics.hpp"
#include "qsdnoise/errors.hpp"

using namespace qsdnoise;

namespace {

bool bit_identical(const DensityCurve& x, const DensityCurve& y) {
  if (x.times != y.times || x.rho.size() != y.rho.size()) return false;
  return std::memcmp(x.rho.data(), y.rho.data(), x.rho.size() * sizeof(Matrix2)) == 0 &&
         std::memcmp(x.stderr.data(), y.stderr.data(), x.stderr.size() * sizeof(x.stderr[0])) == 0;
}

}  // namespace

TEST_CASE("ensemble of one trajectory without environment is its projector") {
  const SystemParams sys;
  const ShotNoiseParams noise{3.0, 2.0};
  EnsembleOptions opts;
  opts.n_traj = 1;
  opts.dt = 1e-3;
  opts.horizon = 20.0;
  opts.output_stride = 500;
  opts.zero_environment = true;
  const RngStream rng(17);
  const DensityCurve d = ensemble_density(sys, noise, opts, rng);

  const ShotTrain train = sample_shot_train(noise, 20.0 + opts.dt, train_stream(rng, 0));
  OUPath zero;
  zero.params = OUParams{sys.gamma, opts.dt, 20000};
  zero.values.assign(20001, cplx{});
  const StateTrajectory s = propagate_trajectory(sys, train, zero, opts.dt);
  REQUIRE(d.times.size() == 41);
  for (std::size_t j = 0; j < d.times.size(); ++j) {
    const std::size_t k = j * 500;
    const cplx a = s.a[k], b = s.b[k];
    CHECK(std::abs(d.rho[j][0] - std::norm(a)) < 1e-12);
    CHECK(std::abs(d.rho[j][3] - std::norm(b)) < 1e-12);
    CHECK(std::abs(d.rho[j][1] - a * std::conj(b)) < 1e-12);
  }
  CHECK(d.n_traj == 1);
}

TEST_CASE("single stochastic trajectory matches propagate_trajectory") {
  const SystemParams sys;
  const ShotNoiseParams noise{3.0, 2.0};
  EnsembleOptions opts;
  opts.n_traj = 1;
  opts.horizon = 10.0;
  opts.output_stride = 250;
  const RngStream rng(5);
  const DensityCurve d = ensemble_density(sys, noise, opts, rng);
  const ShotTrain train = sample_shot_train(noise, 10.0 + opts.dt, train_stream(rng, 0));
  const OUPath ou = sample_ou_path({sys.gamma, opts.dt, 10000}, environment_stream(rng, 0));
  const StateTrajectory s = propagate_trajectory(sys, train, ou, opts.dt);
  for (std::size_t j = 0; j < d.times.size(); ++j) {
    const std::size_t k = j * 250;
    CHECK(std::abs(d.rho[j][1] - s.a[k] * std::conj(s.b[k])) < 1e-12);
    CHECK(std::abs(d.rho[j][3] - std::norm(s.b[k])) < 1e-12);
  }
}

TEST_CASE("zero coupling leaves the excited state untouched") {
  const SystemParams sys{1.0, 0.0, 0.2, 5.0};
  for (std::size_t n : {1u, 7u, 40u}) {
    EnsembleOptions opts;
    opts.n_traj = n;
    opts.horizon = 10.0;
    opts.output_stride = 100;
    const DensityCurve d = ensemble_density(sys, {15.0, 40.0}, opts, RngStream(n));
    for (const Matrix2& r : d.rho) {
      REQUIRE(r[0] == cplx{1.0, 0.0});
      REQUIRE(r[1] == cplx{});
      REQUIRE(r[2] == cplx{});
      REQUIRE(r[3] == cplx{});
    }
  }
}

TEST_CASE("density matrices are Hermitian with exact initial state") {
  const SystemParams sys;
  EnsembleOptions opts;
  opts.n_traj = 64;
  opts.horizon = 20.0;
  opts.output_stride = 200;
  for (auto policy : {TrainPolicy::fresh, TrainPolicy::shared}) {
    opts.policy = policy;
    const DensityCurve d = ensemble_density(sys, {8.0, 20.0}, opts, RngStream(3));
    CHECK(d.rho.front()[0] == cplx{1.0, 0.0});
    CHECK(d.rho.front()[1] == cplx{});
    CHECK(d.rho.front()[3] == cplx{});
    for (const Matrix2& r : d.rho) {
      REQUIRE(r[0].imag() == 0.0);
      REQUIRE(r[3].imag() == 0.0);
      REQUIRE(r[2] == std::conj(r[1]));
      REQUIRE(r[0].real() >= 0.0);
      REQUIRE(r[3].real() >= 0.0);
    }
  }
}

TEST_CASE("ensemble results do not depend on the thread count") {
  const SystemParams sys;
  EnsembleOptions opts;
  opts.n_traj = 100;
  opts.horizon = 10.0;
  opts.output_stride = 100;
  opts.threads = 1;
  const DensityCurve one = ensemble_density(sys, {15.0, 40.0}, opts, RngStream(21));
  opts.threads = 4;
  const DensityCurve four = ensemble_density(sys, {15.0, 40.0}, opts, RngStream(21));
  CHECK(bit_identical(one, four));

  FidelityOptions fo;
  fo.n_trains = 50;
  fo.horizon = 20.0;
  fo.threads = 1;
  const FidelityCurve f1 = fidelity_ensemble(sys, {15.0, 40.0}, fo, RngStream(22));
  fo.threads = 4;
  const FidelityCurve f4 = fidelity_ensemble(sys, {15.0, 40.0}, fo, RngStream(22));
  CHECK(f1.values == f4.values);
  CHECK(f1.stderr == f4.stderr);
}

TEST_CASE("standard error of rho_11 scales as n^-1/2") {
  const SystemParams sys;
  EnsembleOptions opts;
  opts.dt = 1e-2;
  opts.horizon = 10.0;
  opts.output_stride = 1000;
  double se[3];
  const std::size_t ns[3] = {100, 1000, 10000};
  for (int i = 0; i < 3; ++i) {
    opts.n_traj = ns[i];
    const DensityCurve d = ensemble_density(sys, {3.0, 2.0}, opts, RngStream(100 + i));
    se[i] = d.stderr.back()[0];
    REQUIRE(se[i] > 0.0);
  }
  for (int i = 0; i < 2; ++i) CHECK(se[i] / se[i + 1] == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
}

TEST_CASE("free ensemble population follows the Riccati fidelity with exponent ratio g") {
  const SystemParams sys;
  EnsembleOptions opts;
  opts.n_traj = 10000;
  opts.dt = 1e-2;
  opts.horizon = 100.0;
  opts.output_stride = 500;
  const DensityCurve d = ensemble_density(sys, {0.0, 0.0}, opts, RngStream(31));
  const QTrajectory q = integrate_q(sys, ShotTrain{100.0, {}}, opts.dt, 100.0);
  const FidelityCurve f = fidelity_from_q(q);
  for (std::size_t j = 1; j < d.times.size(); ++j) {
    const double log_amp = 0.5 * std::log(d.rho[j][0].real());
    const double log_f = std::log(f.values[j * 500]);
    CHECK(log_amp / log_f == doctest::Approx(sys.g).epsilon(2.5e-4));
  }
}

TEST_CASE("ensemble trace stays one within Monte Carlo error") {
  const SystemParams sys;
  EnsembleOptions opts;
  opts.n_traj = 4000;
  opts.dt = 1e-2;
  opts.horizon = 50.0;
  opts.output_stride = 500;
  const DensityCurve d = ensemble_density(sys, {0.0, 0.0}, opts, RngStream(41));
  for (std::size_t j = 0; j < d.times.size(); ++j) {
    const double tr = (d.rho[j][0] + d.rho[j][3]).real();
    const double se = d.stderr[j][0] + d.stderr[j][3];
    CHECK(std::abs(tr - 1.0) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("fidelity ensemble without control noise is a single deterministic run") {
  const SystemParams sys;
  FidelityOptions fo;
  fo.n_trains = 32;
  fo.horizon = 50.0;
  fo.probe_times = {50.0, 10.0};
  for (const ShotNoiseParams noise : {ShotNoiseParams{0.0, 200.0}, ShotNoiseParams{15.0, 0.0}}) {
    const FidelityCurve f = fidelity_ensemble(sys, noise, fo, RngStream(1));
    const QTrajectory q = integrate_q(sys, ShotTrain{50.0, {}}, fo.dt, 50.0);
    CHECK(f.n_samples == 1);
    CHECK(f.times == std::vector<double>{50.0, 10.0});
    CHECK(f.values[0] == doctest::Approx(std::exp(-q.re_integral[50000])).epsilon(1e-12));
    CHECK(f.values[1] == doctest::Approx(std::exp(-q.re_integral[10000])).epsilon(1e-12));
  }
  fo.n_trains = 0;
  CHECK_THROWS_AS(fidelity_ensemble(sys, {1.0, 1.0}, fo, RngStream(1)), UsageError);
}

TEST_CASE("divergent ensembles exceed the exclusion budget") {
  const SystemParams wild{1e-3, 50.0, 0.1, 5.0};
  FidelityOptions fo;
  fo.n_trains = 16;
  fo.horizon = 5.0;
  CHECK_THROWS_AS(fidelity_ensemble(wild, {3.0, 2.0}, fo, RngStream(1)), DivergenceBudgetError);
}
