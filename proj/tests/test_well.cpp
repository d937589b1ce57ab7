#include "doctest.h"

#include <cmath>

#include "fchlab/well.hpp"

using namespace fchlab;

namespace {

// Independent closed form of the homoclinic for a cubic W': with a < b the
// roots of W(u)/(u − b₋)², X(z) = 2ab / ((a+b) + (b−a) cosh(κz)).
struct ClosedForm {
  double a, b, kappa;
  double x(double z) const { return 2 * a * b / ((a + b) + (b - a) * std::cosh(kappa * z)); }
  double dx(double z) const {
    const double den = (a + b) + (b - a) * std::cosh(kappa * z);
    return -2 * a * b * (b - a) * kappa * std::sinh(kappa * z) / (den * den);
  }
};

ClosedForm closed_form(double tau) {
  // Expand W(u)/(u+1)² for the default well by hand: q(X) = X²/4 − (A+B)X/3 + AB/2
  // with A = τ + 1, B = 2; bisection for the smaller root.
  const double A = tau + 1, B = 2;
  auto q = [&](double x) { return x * x / 4 - (A + B) * x / 3 + A * B / 2; };
  double lo = 0, hi = B;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (q(mid) > 0 ? lo : hi) = mid;
  }
  const double a = 0.5 * (lo + hi);
  const double b = 2 * A * B / a;
  return {a, b, std::sqrt(A * B)};
}

}  // namespace

TEST_CASE("default well values") {
  const DoubleWell w = default_well(-0.3);
  CHECK(w.W(1.0) == doctest::Approx(-0.4).epsilon(1e-14));
  CHECK(w.W(-1.0) == doctest::Approx(0.0));
  CHECK(w.alpha_minus() == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(w.alpha_plus() == doctest::Approx(2.6).epsilon(1e-14));
  for (double u : {-1.0, 1.0, -0.3}) CHECK(std::abs(w.dW(u)) < 1e-15);
  // stated polynomial, evaluated directly
  for (double u : {-0.7, 0.2, 1.3}) {
    const double poly = 0.25 * (u * u - 1) * (u * u - 1) - 0.3 * (u - u * u * u / 3 + 2.0 / 3);
    CHECK(w.W(u) == doctest::Approx(poly).epsilon(1e-13));
    const double h = 1e-5;
    CHECK(w.dW(u) == doctest::Approx((w.W(u + h) - w.W(u - h)) / (2 * h)).epsilon(1e-8));
    CHECK(w.d2W(u) == doctest::Approx((w.dW(u + h) - w.dW(u - h)) / (2 * h)).epsilon(1e-8));
    CHECK(w.d3W(u) == doctest::Approx((w.d2W(u + h) - w.d2W(u - h)) / (2 * h)).epsilon(1e-8));
  }
}

TEST_CASE("well rejects equal depths and bad tilt") {
  for (double tau : {0.0, 0.2, -1.0, -1.5}) {
    try {
      default_well(tau);
      FAIL("expected invalid-well");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidWell);
    }
  }
  CHECK_THROWS_AS(DoubleWell::three_root(0.0, 1.5, 2.0), Error);
  CHECK_NOTHROW(DoubleWell::three_root(0.0, 0.8, 2.0));
}

TEST_CASE("homoclinic matches the closed form and its invariants") {
  const DoubleWell w = default_well(-0.3);
  const PulseProfile p = solve_homoclinic(w);
  const ClosedForm cf = closed_form(-0.3);

  CHECK(p.amplitude() == doctest::Approx(cf.a).epsilon(1e-13));
  CHECK(p.turning_point() == doctest::Approx(0.8 - std::sqrt(0.64 - 0.2)).epsilon(1e-12));
  CHECK(p.residual() < 1e-8);

  double worst = 0, worst_d = 0, sym = 0, first_integral = 0;
  const double h = 1e-3;
  for (double z = -20.0; z <= 20.0; z += 0.0371) {
    worst = std::max(worst, std::abs(p.bar(z) - cf.x(z)));
    worst_d = std::max(worst_d, std::abs(p.derivatives(z)[1] - cf.dx(z)));
    sym = std::max(sym, std::abs(p.bar(z) - p.bar(-z)));
    // derivative by sixth-order differences of the interpolant, not the first integral
    const double d1 = (45 * (p.bar(z + h) - p.bar(z - h)) - 9 * (p.bar(z + 2 * h) - p.bar(z - 2 * h)) +
                       (p.bar(z + 3 * h) - p.bar(z - 3 * h))) /
                      (60 * h);
    first_integral = std::max(first_integral, std::abs(0.5 * d1 * d1 - w.W(p.value(z))));
  }
  CHECK(worst < 1e-11);
  CHECK(worst_d < 1e-10);
  CHECK(sym < 1e-10);
  CHECK(first_integral < 1e-8);

  CHECK(p.phi_max() == doctest::Approx(4 * cf.a * cf.b / (cf.b - cf.a)).epsilon(1e-10));

  // Pulse mass and kernel norm against fine trapezoid sums of the closed form.
  double mass = 0, kin = 0;
  const double dz = 1e-3;
  for (double z = -60; z <= 60; z += dz) {
    mass += cf.x(z) * dz;
    kin += cf.dx(z) * cf.dx(z) * dz;
  }
  CHECK(p.mass() == doctest::Approx(mass).epsilon(1e-10));
  CHECK(p.kernel_norm() == doctest::Approx(std::sqrt(kin)).epsilon(1e-10));

  // window enlargement leaves the integral data unchanged
  const PulseProfile wide = solve_homoclinic(w, 1e-8, 2 * p.half_width());
  CHECK(wide.mass() == doctest::Approx(p.mass()).epsilon(1e-8));
  CHECK(wide.phi_max() == doctest::Approx(p.phi_max()).epsilon(1e-8));
  CHECK(wide.kernel_norm() == doctest::Approx(p.kernel_norm()).epsilon(1e-8));
}

TEST_CASE("far-field fit") {
  const DoubleWell w = default_well(-0.3);
  const PulseProfile p = solve_homoclinic(w);
  const FarField ff = far_field_params(p);
  CHECK(std::abs(ff.decay_rate / std::sqrt(1.4) - 1.0) < 1e-4);
  CHECK(ff.phi_max > 0);
  CHECK(ff.max_log_deviation < 1e-3);
  CHECK(std::abs(ff.phi_max / p.phi_max() - 1.0) < 1e-3);
}

TEST_CASE("homoclinic for a custom three-root well") {
  const DoubleWell w = DoubleWell::three_root(0.0, 0.7, 2.0);
  const PulseProfile p = solve_homoclinic(w);
  CHECK(p.residual() < 1e-8);
  CHECK(std::abs(w.W(p.turning_point())) < 1e-14);
  for (double z : {0.3, 2.0, 7.5}) {
    const auto d = p.derivatives(z);
    CHECK(std::abs(0.5 * d[1] * d[1] - w.W(p.value(z))) < 1e-12);
  }
}

TEST_CASE("background corrections") {
  const DoubleWell w = default_well(-0.3);
  const PulseProfile p = solve_homoclinic(w);
  const BackgroundProfile b1 = solve_background(w, p, 1);
  const BackgroundProfile b2 = solve_background(w, p, 2);
  CHECK(b1.measured_constant() == doctest::Approx(-1.0 / 1.4).epsilon(1e-8));
  CHECK(b2.measured_constant() == doctest::Approx(1.0 / 1.96).epsilon(1e-8));
  CHECK(std::abs(b1.measured_constant() + 0.714286) < 1e-6);
  CHECK(std::abs(b2.measured_constant() - 0.510204) < 1e-6);
  CHECK(b1.residual() < 1e-8);
  CHECK(b2.residual() < 1e-8);

  // decay of B̄ and its evenness
  CHECK(std::abs(b2.bar(0.7 * b2.half_width())) < 1e-6);
  CHECK(b2.bar(1.3) == doctest::Approx(b2.bar(-1.3)));

  // Check L B₁ = 1 pointwise with the pulse profile and series derivatives.
  for (double z : {0.0, 0.9, 3.3, 8.0}) {
    const auto d = b1.bar_derivatives(z);
    const double lhs = d[2] - w.d2W(p.value(z)) * (d[0] + b1.constant());
    CHECK(lhs == doctest::Approx(1.0).epsilon(1e-8));
  }
  // far-field form: L B₁ = 1 and L²B₂ = 1 reduce to (∂² − α₋)B̄ relations in
  // the tail; check the B₁ one relative to the size of B̄
  for (double z : {b1.tail_start() + 0.5, 30.0, 45.0}) {
    const auto d = b1.bar_derivatives(z);
    const double lhs = d[2] - w.d2W(p.value(z)) * (d[0] + b1.constant()) - 1.0;
    CHECK(std::abs(lhs) <= 1e-5 * std::abs(d[0]));
  }
  for (const BackgroundProfile* b : {&b1, &b2}) {
    const double zt = b->tail_start();
    const auto in = b->bar_derivatives(zt - 1e-9), out = b->bar_derivatives(zt + 1e-9);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(in[k] - out[k]) <= 5e-5 * std::abs(in[0]) * std::pow(1.5, k));
    CHECK(b->bar(40.0) * b->bar(zt) > 0.0);  // no sign change out in the tail
  }
  // Hermite table and series agree
  for (double z : {0.05, 1.7, 4.4}) CHECK(b2.bar(z) == doctest::Approx(b2.bar_derivatives(z)[0]).epsilon(1e-10));

  // window enlargement leaves M_B̄ unchanged
  const BackgroundProfile wider =
      solve_background(w, p, 2, Grid::with_spacing(2.5 * p.half_width(), 0.1));
  CHECK(wider.decaying_mass() == doctest::Approx(b2.decaying_mass()).epsilon(1e-8));
}
