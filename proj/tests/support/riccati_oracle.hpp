#pragma once

// Closed-form solution of the constant-coefficient Riccati equation
//   Q' = g gamma/2 + b Q + g Q^2,  b = -gamma + i omega,  Q(0) = 0,
// via Q = -u'/(g u), which turns it into u'' - b u' + (g^2 gamma/2) u = 0
// with u(0) = 1, u'(0) = 0. Then int_0^t Q = -(1/g) ln u(t), so
// exp(-int Re Q) = |u|^{1/g} and exp(-g int Re Q) = |u|.
//
// Test-only: shares nothing with the library integrator.

#include <cmath>
#include <complex>

namespace qsdnoise::testing {

class RiccatiOracle {
 public:
  using cplx = std::complex<double>;

  RiccatiOracle(double g, double gamma, double omega) : g_(g) {
    const cplx b(-gamma, omega);
    const cplx disc = std::sqrt(b * b - 2.0 * g * g * gamma);
    cplx r1 = 0.5 * (b + disc);
    cplx r2 = 0.5 * (b - disc);
    if (r2.real() > r1.real()) std::swap(r1, r2);
    dominant_ = r1;
    other_ = r2;
    // u = c1 e^{r1 t} + c2 e^{r2 t}, c1 + c2 = 1, r1 c1 + r2 c2 = 0.
    c_dom_ = -r2 / (r1 - r2);
    c_oth_ = r1 / (r1 - r2);
  }

  cplx q(double t) const {
    const cplx e = std::exp((other_ - dominant_) * t);
    return -(dominant_ * c_dom_ + other_ * c_oth_ * e) / (g_ * (c_dom_ + c_oth_ * e));
  }

  /// ln u(t), written to stay finite for long times.
  cplx log_u(double t) const {
    const cplx e = std::exp((other_ - dominant_) * t);
    return dominant_ * t + std::log(c_dom_ + c_oth_ * e);
  }

  double re_integral(double t) const { return -log_u(t).real() / g_; }
  double fidelity_riccati(double t) const { return std::exp(-re_integral(t)); }
  double fidelity_amplitude(double t) const { return std::exp(log_u(t).real()); }

  /// Long-time limit of Q.
  cplx fixed_point() const { return -dominant_ / g_; }

 private:
  double g_;
  cplx dominant_, other_, c_dom_, c_oth_;
};

}  // namespace qsdnoise::testing
