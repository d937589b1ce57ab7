#pragma once

// Double-well potential, homoclinic pulse and background corrections.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fchlab/core.hpp"
#include "fchlab/interp.hpp"

namespace fchlab {

/// Quartic double well with W'(u) = (u − b₋)(u − c)(u − b₊), normalized so
/// W(b₋) = 0.  Stored through X = u − b₋ as W = X² q(X) so the tail keeps
/// relative precision.
class DoubleWell {
 public:
  static DoubleWell three_root(double b_minus, double c, double b_plus);

  double b_minus() const { return bm_; }
  double b_plus() const { return bp_; }
  double middle_root() const { return c_; }
  std::optional<double> tau() const { return tau_; }

  double alpha_minus() const { return A_ * B_; }
  double alpha_plus() const { return B_ * (B_ - A_); }

  double W(double u) const {
    const double x = u - bm_;
    return x * x * q(x);
  }
  double dW(double u) const {
    const double x = u - bm_;
    return x * (x - A_) * (x - B_);
  }
  double d2W(double u) const {
    const double x = u - bm_;
    return 3 * x * x - 2 * (A_ + B_) * x + A_ * B_;
  }
  double d3W(double u) const { return 6 * (u - bm_) - 2 * (A_ + B_); }
  double d4W(double) const { return 6.0; }

  /// W = X² q(X) with X = u − b₋.
  double q(double x) const { return x * x / 4 - (A_ + B_) * x / 3 + A_ * B_ / 2; }

  /// Roots 0 < a < b of q; a is the pulse amplitude φ_h(0) − b₋.
  std::pair<double, double> q_roots() const;

  std::string describe() const;

 private:
  friend DoubleWell default_well(double tau);
  double bm_ = -1, c_ = 0, bp_ = 1;
  double A_ = 1, B_ = 2;  // c − b₋, b₊ − b₋
  std::optional<double> tau_;
};

/// W(u) = ¼(u² − 1)² + τ(u − u³/3 + 2/3), wells at ±1, middle root τ.
DoubleWell default_well(double tau);

/// Even homoclinic φ_h of φ'' = W'(φ), centred at the origin.  Tabulated on
/// [0, Z] with a quintic Hermite table; beyond Z the exact exponential tail.
class PulseProfile {
 public:
  const DoubleWell& well() const { return well_; }
  double turning_point() const { return well_.b_minus() + amplitude_; }
  double amplitude() const { return amplitude_; }
  double phi_max() const { return phi_max_; }
  double decay_rate() const { return kappa_; }
  double mass() const { return mass_; }
  double kernel_norm() const { return kernel_norm_; }
  double half_width() const { return table_.back(); }
  double residual() const { return residual_; }
  const HermiteTable& table() const { return table_; }

  /// φ̄_h(z) = φ_h(z) − b₋.
  double bar(double z) const;
  double value(double z) const { return well_.b_minus() + bar(z); }
  /// Derivatives of φ̄_h of orders 0..4 at z.
  std::array<double, 5> derivatives(double z) const;
  /// Orders 0..8, continuing the ODE φ'' = W'(φ) as a Taylor recursion.
  std::array<double, 9> high_derivatives(double z) const;

  /// Symmetric samples (z, φ_h) on [−Z, Z] at the table spacing.
  std::pair<Vector, Vector> samples() const;

 private:
  friend PulseProfile solve_homoclinic(const DoubleWell&, double, double, double);
  DoubleWell well_;
  HermiteTable table_;
  double amplitude_ = 0, phi_max_ = 0, kappa_ = 0, mass_ = 0, kernel_norm_ = 0, residual_ = 0;
};

/// Quadrature inversion of z(φ) = ∫ dφ/√(2W(φ)).  half_width defaults to
/// 20/√α₋, spacing to 1/128.
PulseProfile solve_homoclinic(const DoubleWell& well, double tol = 1e-8, double half_width = 0.0,
                              double spacing = 1.0 / 128);

struct FarField {
  double phi_max = 0;
  double decay_rate = 0;
  double max_log_deviation = 0;
  double window_begin = 0;
  double window_end = 0;
};

/// Least-squares fit of log φ̄_h = log φ_max − k z over the tail window where
/// φ̄_h < threshold.
FarField far_field_params(const PulseProfile& profile, double threshold = 1e-5);

/// Even solution of L^j B_j = 1, L = ∂² − W''(φ_h), split as
/// B_j = B̄_j + (−α₋)^{−j}.
class BackgroundProfile {
 public:
  int order() const { return j_; }
  double constant() const { return constant_; }
  double measured_constant() const { return measured_constant_; }
  double decaying_mass() const { return mass_bar_; }
  double residual() const { return residual_; }
  double half_width() const { return grid_->length(); }
  const Grid& grid() const { return *grid_; }
  const Vector& solution() const { return values_; }

  /// B̄_j(z).  Beyond tail_start() the fitted far field P_j(|z|)e^{−√α₋|z|}
  /// (P_j of degree j) replaces the windowed solution, whose last few decay
  /// lengths are bent by the artificial Neumann end and reach rounding level.
  double bar(double z) const;
  /// Derivatives of B̄_j of orders 0..4 at z (cosine series inside, far-field form outside).
  std::array<double, 5> bar_derivatives(double z) const;
  std::array<double, 9> bar_high_derivatives(double z) const;
  double tail_start() const { return tail_start_; }
  const Vector& tail_polynomial() const { return tail_poly_; }

 private:
  friend BackgroundProfile solve_background(const DoubleWell&, const PulseProfile&, int, GridPtr);
  int j_ = 1;
  double constant_ = 0, measured_constant_ = 0, mass_bar_ = 0, residual_ = 0;
  GridPtr grid_;
  Vector values_;
  Vector coeffs_;  // cosine coefficients of B̄_j on the window
  double kappa_ = 1, tail_start_ = 0;
  Vector tail_poly_;  // ascending powers of |z|
  std::array<double, 9> series_derivatives(double az) const;
  std::array<double, 9> tail_derivatives(double az) const;
  HermiteTable table_;
};

/// Solves on the half window [0, Z_b] with cosine collocation; the even
/// basis excludes the odd kernel φ_h'.  Default window 2× the pulse window.
BackgroundProfile solve_background(const DoubleWell& well, const PulseProfile& profile, int j,
                                   GridPtr grid = nullptr);

/// Dense nodal matrix of ∂_z² on a cosine grid.
Matrix second_derivative_matrix(const Grid& grid);

}  // namespace fchlab
