#pragma once

#include <cmath>
#include <random>

#include "fchlab/ansatz.hpp"

namespace fixtures {

inline const fchlab::DoubleWell& well() {
  static const fchlab::DoubleWell w = fchlab::default_well(-0.3);
  return w;
}

/// Default-well manifold on [0, length] with n pulses, spacing ell and
/// excess mass 10δ.  Profiles are computed once.
inline fchlab::ManifoldContext context(int n, double ell, double length = 160.0, double s = 0.0,
                                       double excess_per_delta = 10.0, double eps = 0.1) {
  static const fchlab::ManifoldContext base = [] {
    const double alpha = well().alpha_minus();
    const auto p = fchlab::make_system_params(0.1, 16.0, 1, 0.0, 8.0, 0.0, alpha);
    return fchlab::ManifoldContext::make(well(), p);
  }();
  const double delta = std::exp(-std::sqrt(well().alpha_minus()) * ell);
  const double mass = fchlab::total_mass_for(n, base.pulse, excess_per_delta * delta);
  const auto p = fchlab::make_system_params(eps, length * eps, n, mass, ell, s, well().alpha_minus());
  return base.with_params(p);
}

/// Random field with Gaussian cosine coefficients damped as e^{−k/kmax};
/// mode 0 dropped so the mass is zero.
inline fchlab::Field smooth_random(fchlab::GridPtr grid, unsigned seed, double kmax, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  fchlab::Vector a = fchlab::Vector::Zero(grid->size());
  for (fchlab::Index k = 1; k < a.size(); ++k) a(k) = amp * normal(rng) * std::exp(-k / kmax);
  return fchlab::Field(grid, grid->values(a));
}

/// n pulses centred in the domain at neighbour distance ℓ (slightly more, so
/// the finite-difference tangents stay admissible).
inline fchlab::PulseConfiguration packed(int n, double ell, double length) {
  fchlab::PulseConfiguration c;
  c.p.resize(n);
  for (int i = 0; i < n; ++i) c.p(i) = 0.5 * length + (i - 0.5 * (n - 1)) * ell * 1.001;
  return c;
}

}  // namespace fixtures
