#pragma once

// Problem constants, the Neumann cosine collocation grid, scalar fields and
// the norm family.  Grid and field types are templated on the scalar so the
// transform and quadrature machinery can be exercised in extended precision;
// the rest of the library works with the double aliases at the bottom.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "fchlab/error.hpp"

namespace fchlab {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
constexpr Scalar pi_v = Scalar(3.141592653589793238462643383279502884L);

// ---------------------------------------------------------------------------
// System parameters

/// Scalar problem constants.  The tail scale δ = exp(−√α₋ ℓ) is derived from
/// the spacing and the well, never supplied directly.
struct SystemParams {
  double epsilon = 0.1;
  double domain_d = 16.0;
  int n_pulses = 1;
  double total_mass = 0.0;
  double min_spacing = 8.0;
  double gradient_s = 0.0;
  double rho = 1.0;
  double alpha_minus = 1.0;
  double tail_scale = 0.0;

  /// Inner-variable domain length d/ε.
  double length() const { return domain_d / epsilon; }
  /// δ_𝒢 = δ ρ³.
  double delta_g() const { return tail_scale * rho * rho * rho; }
};

/// Validates and assembles a SystemParams record.  When rho is not given it
/// defaults to ε^{−s}.
inline SystemParams make_system_params(double epsilon, double domain_d, int n_pulses,
                                       double total_mass, double min_spacing, double gradient_s,
                                       double alpha_minus,
                                       std::optional<double> rho = std::nullopt) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw Error(ErrorKind::Validation, "epsilon must lie in (0,1)");
  if (!(domain_d > 0.0)) throw Error(ErrorKind::Validation, "domain length d must be positive");
  if (n_pulses < 1) throw Error(ErrorKind::Validation, "n_pulses must be at least 1");
  if (!(min_spacing > 0.0)) throw Error(ErrorKind::Validation, "min_spacing must be positive");
  if (!(gradient_s >= 0.0 && gradient_s <= 1.0))
    throw Error(ErrorKind::Validation, "gradient_s must lie in [0,1]");
  if (!(alpha_minus > 0.0)) throw Error(ErrorKind::Validation, "alpha_minus must be positive");
  if (domain_d / epsilon < (n_pulses + 1) * min_spacing)
    throw Error(ErrorKind::Validation,
                "admissible pulse set is empty: need d/epsilon >= (n+1)*min_spacing");
  SystemParams p;
  p.epsilon = epsilon;
  p.domain_d = domain_d;
  p.n_pulses = n_pulses;
  p.total_mass = total_mass;
  p.min_spacing = min_spacing;
  p.gradient_s = gradient_s;
  p.alpha_minus = alpha_minus;
  p.rho = rho.value_or(std::pow(epsilon, -gradient_s));
  if (!(p.rho >= 1.0)) throw Error(ErrorKind::Validation, "rho must be at least 1");
  p.tail_scale = std::exp(-std::sqrt(alpha_minus) * min_spacing);
  return p;
}

/// Throws unless δ_𝒢 = δρ³ < 1, the precondition of the symmetrized analysis.
inline void require_renormalizable(const SystemParams& p) {
  if (!(p.delta_g() < 1.0))
    throw Error(ErrorKind::Validation, "delta_G = delta*rho^3 must be < 1 for SRN diagnostics");
}

// ---------------------------------------------------------------------------
// Cosine transform

/// Type-I discrete cosine transform on n nodes z_j = jπ/(n−1):
///   x_j = Σ_k a_k cos(π j k / (n−1)).
/// Computed through a real FFT of the even extension (length 2(n−1)).
template <typename Scalar>
class CosineTransform {
 public:
  using Vector = VectorX<Scalar>;

  explicit CosineTransform(Index n) : n_(n) {
    if (n < 2) throw Error(ErrorKind::Domain, "cosine transform needs at least two nodes");
  }

  Index size() const { return n_; }

  Vector analyze(const Vector& x) const {
    Vector a = dct1(x);
    const Scalar m = Scalar(n_ - 1);
    a /= m;
    a(0) /= Scalar(2);
    a(n_ - 1) /= Scalar(2);
    return a;
  }

  Vector synthesize(const Vector& a) const {
    Vector b = a;
    b(0) *= Scalar(2);
    b(n_ - 1) *= Scalar(2);
    return dct1(b) / Scalar(2);
  }

 private:
  // Y_k = x_0 + (−1)^k x_{n−1} + 2 Σ_{j=1}^{n−2} x_j cos(πjk/(n−1))
  Vector dct1(const Vector& x) const {
    thread_local Eigen::FFT<Scalar> fft;
    const Index m = 2 * (n_ - 1);
    std::vector<Scalar> ext(static_cast<std::size_t>(m));
    for (Index j = 0; j < n_; ++j) ext[static_cast<std::size_t>(j)] = x(j);
    for (Index j = 1; j < n_ - 1; ++j) ext[static_cast<std::size_t>(m - j)] = x(j);
    std::vector<std::complex<Scalar>> spec;
    fft.fwd(spec, ext);
    Vector y(n_);
    for (Index k = 0; k < n_; ++k) y(k) = spec[static_cast<std::size_t>(k)].real();
    return y;
  }

  Index n_;
};

// ---------------------------------------------------------------------------
// Grid

/// Uniform collocation grid on [0, L] whose nodes carry the Neumann cosine
/// basis cos(kπz/L), k = 0..N−1.  Quadrature is the trapezoid rule, which is
/// exact on every cosine mode and therefore consistent with the transform.
template <typename Scalar>
class CosineGrid {
 public:
  using Vector = VectorX<Scalar>;

  static constexpr double kDefaultMaxSpacing = 0.1;

  CosineGrid(Scalar length, Index num_points, Scalar max_spacing = Scalar(kDefaultMaxSpacing))
      : length_(length), n_(num_points), transform_(num_points) {
    if (!(length > Scalar(0))) throw Error(ErrorKind::Domain, "grid length must be positive");
    if (num_points < 16) throw Error(ErrorKind::Domain, "grid needs at least 16 points");
    h_ = length / Scalar(num_points - 1);
    if (h_ > max_spacing * Scalar(1 + 1e-12))
      throw Error(ErrorKind::Domain, "grid spacing exceeds the resolution limit");
    nodes_.resize(n_);
    weights_.setConstant(n_, h_);
    for (Index j = 0; j < n_; ++j) nodes_(j) = h_ * Scalar(j);
    weights_(0) = weights_(n_ - 1) = h_ / Scalar(2);
  }

  static std::shared_ptr<const CosineGrid> make(Scalar length, Index num_points,
                                                Scalar max_spacing = Scalar(kDefaultMaxSpacing)) {
    return std::make_shared<const CosineGrid>(length, num_points, max_spacing);
  }

  /// Smallest grid of the form 2^m + 1 points with spacing ≤ max_spacing.
  static std::shared_ptr<const CosineGrid> with_spacing(
      Scalar length, Scalar max_spacing = Scalar(kDefaultMaxSpacing)) {
    Index intervals = 16;
    while (length / Scalar(intervals) > max_spacing) intervals *= 2;
    return make(length, intervals + 1, max_spacing);
  }

  Scalar length() const { return length_; }
  Index size() const { return n_; }
  Scalar spacing() const { return h_; }
  Scalar node(Index j) const { return nodes_(j); }
  const Vector& nodes() const { return nodes_; }
  const Vector& weights() const { return weights_; }

  /// κ_k = kπ/L.
  Scalar wavenumber(Index k) const { return pi_v<Scalar> * Scalar(k) / length_; }

  /// Discrete (trapezoid) squared norm of cos(κ_k z).
  Scalar mode_norm_sq(Index k) const {
    return (k == 0 || k == n_ - 1) ? length_ : length_ / Scalar(2);
  }

  /// Continuous squared L² norm of cos(κ_k z) on [0, L].
  Scalar continuous_mode_norm_sq(Index k) const {
    return k == 0 ? length_ : length_ / Scalar(2);
  }

  Vector coefficients(const Vector& values) const { return transform_.analyze(values); }
  Vector values(const Vector& coeffs) const { return transform_.synthesize(coeffs); }

  /// Multiplies cosine coefficient k by symbol(k, κ_k).
  template <typename Symbol>
  Vector apply_symbol(const Vector& values, Symbol&& symbol) const {
    Vector a = coefficients(values);
    for (Index k = 0; k < n_; ++k) a(k) *= symbol(k, wavenumber(k));
    return this->values(a);
  }

  Vector second_derivative(const Vector& values) const {
    return apply_symbol(values, [](Index, Scalar kappa) { return -kappa * kappa; });
  }

  Scalar integrate(const Vector& values) const { return weights_.dot(values); }

  bool same_as(const CosineGrid& other) const {
    return this == &other || (n_ == other.n_ && length_ == other.length_);
  }

 private:
  Scalar length_;
  Index n_;
  Scalar h_ = Scalar(0);
  Vector nodes_;
  Vector weights_;
  CosineTransform<Scalar> transform_;
};

// ---------------------------------------------------------------------------
// Fields

template <typename Scalar>
class BasicField {
 public:
  using Grid = CosineGrid<Scalar>;
  using GridPtr = std::shared_ptr<const Grid>;
  using Vector = VectorX<Scalar>;

  BasicField(GridPtr grid, Vector values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw Error(ErrorKind::InvalidField, "field without grid");
    if (values_.size() != grid_->size())
      throw Error(ErrorKind::InvalidField, "field length does not match grid");
    if (!values_.allFinite()) throw Error(ErrorKind::InvalidField, "field has non-finite values");
  }

  static BasicField zeros(GridPtr grid) {
    const Index n = grid->size();
    return BasicField(std::move(grid), Vector::Zero(n));
  }
  static BasicField constant(GridPtr grid, Scalar c) {
    const Index n = grid->size();
    return BasicField(std::move(grid), Vector::Constant(n, c));
  }
  template <typename Fn>
  static BasicField from_function(GridPtr grid, Fn&& fn) {
    Vector v(grid->size());
    for (Index j = 0; j < v.size(); ++j) v(j) = fn(grid->node(j));
    return BasicField(std::move(grid), std::move(v));
  }

  const GridPtr& grid_ptr() const { return grid_; }
  const Grid& grid() const { return *grid_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  Scalar operator[](Index j) const { return values_(j); }

  BasicField with_values(Vector v) const { return BasicField(grid_, std::move(v)); }

  BasicField& operator+=(const BasicField& o) {
    require_same_grid(o);
    values_ += o.values_;
    return *this;
  }
  BasicField& operator-=(const BasicField& o) {
    require_same_grid(o);
    values_ -= o.values_;
    return *this;
  }
  BasicField& operator*=(Scalar c) {
    values_ *= c;
    return *this;
  }

  void require_same_grid(const BasicField& o) const {
    if (!grid_->same_as(*o.grid_)) throw Error(ErrorKind::GridMismatch, "fields live on different grids");
  }

 private:
  GridPtr grid_;
  Vector values_;
};

template <typename Scalar>
BasicField<Scalar> operator+(BasicField<Scalar> a, const BasicField<Scalar>& b) {
  return a += b;
}
template <typename Scalar>
BasicField<Scalar> operator-(BasicField<Scalar> a, const BasicField<Scalar>& b) {
  return a -= b;
}
template <typename Scalar>
BasicField<Scalar> operator*(Scalar c, BasicField<Scalar> a) {
  return a *= c;
}
template <typename Scalar>
BasicField<Scalar> operator-(BasicField<Scalar> a) {
  return a *= Scalar(-1);
}

// ---------------------------------------------------------------------------
// Inner products and norms

/// X = L²(0, L) inner product by trapezoid quadrature.
template <typename Scalar>
Scalar inner_product_x(const BasicField<Scalar>& u, const BasicField<Scalar>& v) {
  u.require_same_grid(v);
  return (u.grid().weights().array() * u.values().array() * v.values().array()).sum();
}

template <typename Scalar>
Scalar mean(const BasicField<Scalar>& f) {
  return f.grid().integrate(f.values()) / f.grid().length();
}

/// Σ_{m=0}^{4} κ^{2m}: the H⁴ weight of a cosine mode.
template <typename Scalar>
Scalar h4_symbol(Scalar kappa) {
  const Scalar k2 = kappa * kappa;
  return Scalar(1) + k2 * (Scalar(1) + k2 * (Scalar(1) + k2 * (Scalar(1) + k2)));
}

enum class NormKind { L2, H4, HG1 };

struct NormSpec {
  NormKind kind = NormKind::L2;
  double s = 0.0;
  Index max_mode = -1;  // cosine modes above this are dropped; −1 keeps all

  static NormSpec l2() { return {NormKind::L2, 0.0, -1}; }
  static NormSpec h4() { return {NormKind::H4, 0.0, -1}; }
  static NormSpec hg1(double s) { return {NormKind::HG1, s, -1}; }
  NormSpec band(Index k) const { return {kind, s, k}; }
};

namespace detail {

template <typename Scalar>
Scalar h4_from_coefficients(const CosineGrid<Scalar>& grid, const VectorX<Scalar>& a, Index max_mode = -1) {
  const Index top = max_mode < 0 ? a.size() : std::min(a.size(), max_mode + 1);
  Scalar sum(0);
  for (Index k = 0; k < top; ++k)
    sum += grid.continuous_mode_norm_sq(k) * a(k) * a(k) * h4_symbol(grid.wavenumber(k));
  return std::sqrt(sum);
}

template <typename Scalar>
void require_zero_mass_coefficients(const VectorX<Scalar>& a, const VectorX<Scalar>& values) {
  const Scalar scale = std::max(Scalar(1), values.cwiseAbs().maxCoeff());
  if (std::abs(a(0)) > Scalar(1e-9) * scale)
    throw Error(ErrorKind::Domain, "operation requires a zero-mass field");
}

}  // namespace detail

/// L2: trapezoid norm.  H4: root of the summed squared L² norms of
/// derivatives 0..4 of the cosine interpolant.  HG1(s): H4 norm of 𝒢₁ f, with
/// 𝒢₁ multiplying cosine mode k by k^s; the field must have zero mass.
/// A band limit switches L2 to the continuous mode norms as well.
template <typename Scalar>
Scalar norm(const BasicField<Scalar>& f, NormSpec spec) {
  const auto& grid = f.grid();
  switch (spec.kind) {
    case NormKind::L2: {
      if (spec.max_mode < 0)
        return std::sqrt((grid.weights().array() * f.values().array().square()).sum());
      const VectorX<Scalar> a = grid.coefficients(f.values());
      Scalar sum(0);
      for (Index k = 0; k <= std::min(spec.max_mode, a.size() - 1); ++k)
        sum += grid.continuous_mode_norm_sq(k) * a(k) * a(k);
      return std::sqrt(sum);
    }
    case NormKind::H4:
      return detail::h4_from_coefficients(grid, grid.coefficients(f.values()), spec.max_mode);
    case NormKind::HG1: {
      VectorX<Scalar> a = grid.coefficients(f.values());
      detail::require_zero_mass_coefficients(a, f.values());
      a(0) = Scalar(0);
      for (Index k = 1; k < a.size(); ++k) a(k) *= std::pow(Scalar(k), Scalar(spec.s));
      return detail::h4_from_coefficients(grid, a, spec.max_mode);
    }
  }
  return Scalar(0);
}

/// Largest cosine mode whose coefficient exceeds tol·max_k|a_k| (k ≥ 1).
/// Beyond it the field carries only rounding, so quantities built from
/// several derivatives of it are noise there.
template <typename Scalar>
Index resolved_bandwidth(const BasicField<Scalar>& f, Scalar tol = Scalar(1e-12)) {
  const VectorX<Scalar> a = f.grid().coefficients(f.values());
  if (a.size() < 2) return 0;
  const Scalar top = a.tail(a.size() - 1).cwiseAbs().maxCoeff();
  Index k = a.size() - 1;
  while (k > 1 && std::abs(a(k)) <= tol * top) --k;
  return k;
}

// ---------------------------------------------------------------------------
// Double-precision aliases used throughout the library.

using Grid = CosineGrid<double>;
using GridPtr = std::shared_ptr<const Grid>;
using Field = BasicField<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace fchlab
