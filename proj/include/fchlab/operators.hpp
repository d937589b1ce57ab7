#pragma once

// Energy, its derivatives and the linear operators built on them, plus the
// H^{-s} gradient family.  Everything acts on cosine-grid fields; derivatives
// are spectral.

#include <functional>
#include <string>

#include "fchlab/ansatz.hpp"
#include "fchlab/core.hpp"
#include "fchlab/well.hpp"

namespace fchlab {

/// A linear operator on fields of one grid.
class LinearMap {
 public:
  using Apply = std::function<Vector(const Vector&)>;

  LinearMap(GridPtr grid, Apply apply, bool self_adjoint, std::string name = {})
      : grid_(std::move(grid)), apply_(std::move(apply)), self_adjoint_(self_adjoint),
        name_(std::move(name)) {}

  const Grid& grid() const { return *grid_; }
  GridPtr grid_ptr() const { return grid_; }
  bool self_adjoint() const { return self_adjoint_; }
  const std::string& name() const { return name_; }

  Field apply(const Field& f) const;
  Field operator()(const Field& f) const { return apply(f); }
  Vector apply(const Vector& v) const { return apply_(v); }

  /// ⟨Au, v⟩ in the grid quadrature.
  double form(const Field& u, const Field& v) const { return inner_product_x(apply(u), v); }

  /// Nodal matrix, column j = A e_j.  Only for N ≤ 2048.
  Matrix dense() const;

 private:
  GridPtr grid_;
  Apply apply_;
  bool self_adjoint_;
  std::string name_;
};

/// A∘B on the same grid.
LinearMap compose(const LinearMap& a, const LinearMap& b, std::string name = {});

/// R(u) = ∂²u − W'(u).
Field chemical_residual(const Field& u, const DoubleWell& well);

/// J(u) = ∫ ½(∂²u − W'(u))².
double energy(const Field& u, const DoubleWell& well);

/// ∇J(u) = (∂² − W''(u))(∂²u − W'(u)).
Field variational_derivative(const Field& u, const DoubleWell& well);

/// L_u = ∂² − W''(u).  With u = u_n this is L_n, with u = φ_h(· − p) the local L_j.
LinearMap pulse_operator(const Field& u, const DoubleWell& well);

/// L_∞ = ∂² − α₋.
LinearMap far_field_operator(GridPtr grid, const DoubleWell& well);

/// 𝓛 = (∂² − W''(Φ))² − (∂²Φ − W'(Φ))W'''(Φ).
LinearMap second_variation(const Field& phi, const DoubleWell& well);

/// 𝕃 = −Π₀𝓛, applied as −Π₀𝓛Π₀ so constants map to zero; identical on zero-mass fields.
LinearMap linearization(const Field& phi, const DoubleWell& well);

/// Π₀f = f − ⟨f⟩.
Field zero_mass_projection(const Field& f);
LinearMap zero_mass_projector(GridPtr grid);

/// Derivatives 0..4 of ∇J(u) = (∂² − W''(u))(u'' − W'(u)) from u^{(0..8)} at a point.
std::array<double, 5> variational_derivative_jet(const std::array<double, 9>& u, const DoubleWell& well);

/// H⁴(0, L) norm of a function given by its derivatives 0..4 at any point,
/// by 16-point Gauss panels of width ≤ 1/4.  `center` subtracts the mean first.
double continuum_h4_norm(const std::function<std::array<double, 5>(double)>& f, double length,
                         bool center = false);

/// ‖Π₀∇J(Φ)‖_{H⁴(0,L)} for the continuous ansatz.  Spectral evaluation on the
/// cosine grid is unusable here: eight derivatives of rounding reach ~1e−3 at
/// N = 2049, and the even extension of Φ has an O(δ) jump in its fifth
/// derivative at a wall, so the cosine series of ∇J is not H⁴-convergent.
double residual_norm(const AnsatzProfile& a, const ManifoldContext& ctx);

/// F(u) = −Π₀∇J(u).
Field flow_field(const Field& u, const DoubleWell& well);

/// 𝓝(v) = F(Φ + v) − F(Φ) − 𝕃v.
Field nonlinear_remainder(const Field& phi, const Field& v, const DoubleWell& well);

enum class GradientOp { G, G1, G1Inv, GInv };

/// D = (−∂²)^{−1} on zero-mass fields has eigenvalues λ_k = (L/πk)² on cosine
/// mode k.  𝒢 = λ₁ˢD^{−s} multiplies mode k by k^{2s}, 𝒢₁ = λ₁^{s/2}D^{−s/2} by k^s;
/// both annihilate constants.
class GradientFamily {
 public:
  explicit GradientFamily(double s);

  double s() const { return s_; }
  /// Multiplier on cosine mode k ≥ 1 (mode 0 maps to 0).
  double factor(Index k, GradientOp op) const;
  Field apply(GradientOp op, const Field& f) const;
  LinearMap map(GradientOp op, GridPtr grid) const;

 private:
  double s_;
};

/// Raw row-major dump: int64 N, int64 M, 8-byte dtype tag "float64\0", data.
void write_dense_matrix(const std::string& path, const Matrix& m);
Matrix read_dense_matrix(const std::string& path);

}  // namespace fchlab
