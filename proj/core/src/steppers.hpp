#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "qsdnoise/dynamics.hpp"
#include "qsdnoise/errors.hpp"

namespace qsdnoise::detail {

/// Shots snapped to grid indices, in time order.
struct KickSchedule {
  std::vector<std::size_t> steps;
  std::vector<double> times;
  std::vector<double> amplitudes;
  double max_snap_error = 0.0;

  std::size_t size() const noexcept { return steps.size(); }
};

KickSchedule schedule_kicks(const ShotTrain& train, const TimeGrid& grid);

/// RK4 for the Riccati equation with int Re Q as a quadrature state.
class RiccatiStepper {
 public:
  RiccatiStepper(const SystemParams& sys, double dt)
      : source_(0.5 * sys.g * sys.gamma), linear_(-sys.gamma, sys.omega), g_(sys.g), dt_(dt) {}

  cplx q() const noexcept { return q_; }
  double integral() const noexcept { return integral_; }

  void kick(double x) { q_ *= std::polar(1.0, x); }

  void step() {
    const cplx q1 = q_;
    const cplx k1 = rhs(q1);
    const cplx q2 = q_ + 0.5 * dt_ * k1;
    const cplx k2 = rhs(q2);
    const cplx q3 = q_ + 0.5 * dt_ * k2;
    const cplx k3 = rhs(q3);
    const cplx q4 = q_ + dt_ * k3;
    const cplx k4 = rhs(q4);
    q_ += (dt_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    integral_ += (dt_ / 6.0) * (q1.real() + 2.0 * q2.real() + 2.0 * q3.real() + q4.real());
  }

  /// True when |Q| left the guard (or became NaN).
  bool diverged() const noexcept {
    return !(std::norm(q_) <= kDivergenceGuard * kDivergenceGuard);
  }

 private:
  cplx rhs(cplx q) const { return source_ + linear_ * q + g_ * q * q; }

  cplx q_{0.0, 0.0};
  double integral_ = 0.0;
  cplx source_;
  cplx linear_;
  double g_;
  double dt_;
};

/// RK4 for (Q, a, b) in the frame rotating with theta(t) = omega t + sum x_j,
/// where the lab amplitudes are A = a e^{-i theta/2}, B = b e^{+i theta/2}:
///   a' = -g Q a,   b' = g z*(t) e^{-i theta} a.
class StateStepper {
 public:
  StateStepper(const SystemParams& sys, double dt)
      : riccati_source_(0.5 * sys.g * sys.gamma),
        riccati_linear_(-sys.gamma, sys.omega),
        omega_(sys.omega),
        g_(sys.g),
        dt_(dt),
        half_rotor_(std::polar(1.0, -0.5 * sys.omega * dt)) {}

  cplx q() const noexcept { return q_; }
  cplx a_frame() const noexcept { return a_; }
  cplx b_frame() const noexcept { return b_; }
  double kick_phase() const noexcept { return kick_phase_; }

  double theta(std::size_t k) const {
    return omega_ * static_cast<double>(k) * dt_ + kick_phase_;
  }
  /// N(t_k) = e^{-i theta(t_k)}.
  cplx rotor(std::size_t k) const { return std::polar(1.0, -theta(k)); }
  cplx lab_a(std::size_t k) const { return a_ * std::polar(1.0, -0.5 * theta(k)); }
  cplx lab_b(std::size_t k) const { return b_ * std::polar(1.0, 0.5 * theta(k)); }

  void kick(double x) {
    q_ *= std::polar(1.0, x);
    kick_phase_ += x;
  }

  /// Advances from grid point k to k+1 with z* = z0 at t_k and z1 at t_{k+1}.
  void step(std::size_t k, cplx z0, cplx z1) {
    const cplx rot0 = rotor(k);
    const cplx rot_mid = rot0 * half_rotor_;
    const cplx rot1 = rot_mid * half_rotor_;
    const cplx zm = 0.5 * (z0 + z1);
    const cplx drive0 = g_ * z0 * rot0;
    const cplx drive_mid = g_ * zm * rot_mid;
    const cplx drive1 = g_ * z1 * rot1;

    const cplx kq1 = rq(q_);
    const cplx ka1 = -g_ * q_ * a_;
    const cplx kb1 = drive0 * a_;

    const cplx q2 = q_ + 0.5 * dt_ * kq1;
    const cplx a2 = a_ + 0.5 * dt_ * ka1;
    const cplx kq2 = rq(q2);
    const cplx ka2 = -g_ * q2 * a2;
    const cplx kb2 = drive_mid * a2;

    const cplx q3 = q_ + 0.5 * dt_ * kq2;
    const cplx a3 = a_ + 0.5 * dt_ * ka2;
    const cplx kq3 = rq(q3);
    const cplx ka3 = -g_ * q3 * a3;
    const cplx kb3 = drive_mid * a3;

    const cplx q4 = q_ + dt_ * kq3;
    const cplx a4 = a_ + dt_ * ka3;
    const cplx kq4 = rq(q4);
    const cplx ka4 = -g_ * q4 * a4;
    const cplx kb4 = drive1 * a4;

    const double w = dt_ / 6.0;
    q_ += w * (kq1 + 2.0 * kq2 + 2.0 * kq3 + kq4);
    a_ += w * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
    b_ += w * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
  }

  bool diverged() const noexcept {
    return !(std::norm(q_) <= kDivergenceGuard * kDivergenceGuard);
  }

 private:
  cplx rq(cplx q) const { return riccati_source_ + riccati_linear_ * q + g_ * q * q; }

  cplx q_{0.0, 0.0};
  cplx a_{1.0, 0.0};
  cplx b_{0.0, 0.0};
  double kick_phase_ = 0.0;
  cplx riccati_source_;
  cplx riccati_linear_;
  double omega_;
  double g_;
  double dt_;
  cplx half_rotor_;
};

/// Applies every scheduled kick at grid index k; `next` is the cursor into
/// the schedule.
template <typename Stepper>
inline void apply_kicks_at(Stepper& s, const KickSchedule& kicks, std::size_t k,
                           std::size_t& next) {
  while (next < kicks.size() && kicks.steps[next] == k) {
    s.kick(kicks.amplitudes[next]);
    ++next;
  }
}

/// Grid indices to sample: every stride-th point plus the last one.
std::vector<std::size_t> strided_samples(const TimeGrid& grid, std::size_t stride);
/// Grid indices nearest to each probe time (must lie inside the grid).
std::vector<std::size_t> probe_samples(const TimeGrid& grid, const std::vector<double>& times);

}  // namespace qsdnoise::detail
