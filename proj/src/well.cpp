#include "fchlab/well.hpp"

#include <cmath>
#include <sstream>

namespace fchlab {

DoubleWell DoubleWell::three_root(double b_minus, double c, double b_plus) {
  if (!(b_minus < c && c < b_plus))
    throw Error(ErrorKind::InvalidWell, "roots must satisfy b- < c < b+");
  DoubleWell w;
  w.bm_ = b_minus;
  w.c_ = c;
  w.bp_ = b_plus;
  w.A_ = c - b_minus;
  w.B_ = b_plus - b_minus;
  // W(b₊) < 0 is equivalent to c below the midpoint of the wells.
  if (!(w.W(b_plus) < 0.0))
    throw Error(ErrorKind::InvalidWell, "need W(b+) < 0 = W(b-); move c below (b- + b+)/2");
  return w;
}

DoubleWell default_well(double tau) {
  if (!(tau > -1.0 && tau < 0.0)) throw Error(ErrorKind::InvalidWell, "tau must lie in (-1, 0)");
  DoubleWell w = DoubleWell::three_root(-1.0, tau, 1.0);
  w.tau_ = tau;
  return w;
}

std::pair<double, double> DoubleWell::q_roots() const {
  // q(X) = 0  <=>  X² − (4/3)(A+B) X + 2AB = 0
  const double s = 2.0 * (A_ + B_) / 3.0;
  const double disc = s * s - 2.0 * A_ * B_;
  if (!(disc > 0.0)) throw Error(ErrorKind::NoHomoclinic, "W has no zero between the wells");
  const double r = std::sqrt(disc);
  const double b = s + r;
  const double a = 2.0 * A_ * B_ / b;
  if (!(a > 0.0 && a < B_)) throw Error(ErrorKind::NoHomoclinic, "W has no zero between the wells");
  return {a, b};
}

std::string DoubleWell::describe() const {
  std::ostringstream os;
  os << "W'(u) = (u - " << bm_ << ")(u - " << c_ << ")(u - " << bp_ << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Homoclinic

double PulseProfile::bar(double z) const {
  const double az = std::abs(z);
  const double zt = table_.back();
  if (az <= zt) return table_(az);
  return table_.values()(table_.values().size() - 1) * std::exp(-kappa_ * (az - zt));
}

std::array<double, 5> PulseProfile::derivatives(double z) const {
  const double x = bar(z);
  const auto [a, b] = well_.q_roots();
  const double gap = std::max(a - x, 0.0);
  const double slope = x * std::sqrt(gap * (b - x) / 2.0);
  const double u = well_.b_minus() + x;
  std::array<double, 5> d{};
  d[0] = x;
  d[1] = z > 0 ? -slope : slope;
  d[2] = well_.dW(u);
  d[3] = well_.d2W(u) * d[1];
  d[4] = well_.d3W(u) * d[1] * d[1] + well_.d2W(u) * d[2];
  return d;
}

std::array<double, 9> PulseProfile::high_derivatives(double z) const {
  const auto d = derivatives(z);
  const double A = well_.middle_root() - well_.b_minus(), B = well_.b_plus() - well_.b_minus();
  // Taylor coefficients x_k of φ̄ at z: x_{k+2} = [X(X−A)(X−B)]_k / ((k+1)(k+2))
  std::array<double, 9> x{};
  x[0] = d[0];
  x[1] = d[1];
  for (int k = 0; k <= 6; ++k) {
    double sq = 0, cube = 0;
    for (int i = 0; i <= k; ++i) sq += x[i] * x[k - i];
    for (int i = 0; i <= k; ++i) {
      double sq_i = 0;
      for (int j = 0; j <= i; ++j) sq_i += x[j] * x[i - j];
      cube += sq_i * x[k - i];
    }
    const double pk = cube - (A + B) * sq + A * B * x[k];
    x[k + 2] = pk / ((k + 1) * (k + 2));
  }
  std::array<double, 9> out{};
  double fact = 1.0;
  for (int k = 0; k <= 8; ++k) {
    if (k > 0) fact *= k;
    out[k] = x[k] * fact;
  }
  return out;
}

std::pair<Vector, Vector> PulseProfile::samples() const {
  const Index m = table_.values().size();
  Vector z(2 * m - 1), v(2 * m - 1);
  for (Index i = 0; i < m; ++i) {
    const double zi = table_.spacing() * static_cast<double>(i);
    const double vi = well_.b_minus() + table_.values()(i);
    z(m - 1 + i) = zi;
    z(m - 1 - i) = -zi;
    v(m - 1 + i) = v(m - 1 - i) = vi;
  }
  return {z, v};
}

namespace {

// Eighth-order central second difference on the even extension of f.
double max_fd_residual(const PulseProfile& p) {
  static const double c[5] = {-205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560};
  const double h = p.table().spacing();
  const Index m = p.table().values().size();
  double worst = 0.0;
  for (Index i = 0; i < m - 4; ++i) {
    const double zi = h * static_cast<double>(i);
    double d2 = c[0] * p.bar(zi);
    for (int k = 1; k <= 4; ++k) d2 += c[k] * (p.bar(zi + k * h) + p.bar(zi - k * h));
    d2 /= h * h;
    worst = std::max(worst, std::abs(d2 - p.well().dW(p.value(zi))));
  }
  return worst;
}

}  // namespace

PulseProfile solve_homoclinic(const DoubleWell& well, double tol, double half_width,
                              double spacing) {
  const auto [a, b] = well.q_roots();
  const double alpha = well.alpha_minus();
  const double kappa = std::sqrt(alpha);
  if (half_width <= 0.0) half_width = 20.0 / kappa;
  const Index m = static_cast<Index>(std::ceil(half_width / spacing)) + 1;
  const GaussRule rule = gauss_legendre(16);

  // Near the turning point X = a − t²: dz/dt is smooth.
  auto dz_dt = [a = a, b = b](double t) {
    return 2.0 / ((a - t * t) * std::sqrt((b - a + t * t) / 2.0));
  };
  // Below X = a/2 use σ = ln X: −dz/dσ = 1/√(2q(e^σ)).
  auto dz_dsigma = [a = a, b = b](double s) {
    const double x = std::exp(s);
    return -1.0 / std::sqrt((a - x) * (b - x) / 2.0);
  };

  const double t_mid = std::sqrt(a / 2.0);
  const double sigma_mid = std::log(a / 2.0);
  const double z_mid = integrate_panels(dz_dt, 0.0, t_mid, 0.1, rule);

  Vector f(m), df(m), d2f(m);
  auto newton = [&](auto&& deriv, double x0, double z0, double target) {
    // Solve z0 + ∫_{x0}^{x} deriv = target for x, starting from a tangent step.
    double x = x0 + (target - z0) / deriv(x0);
    for (int it = 0; it < 50; ++it) {
      const double r = z0 + integrate_panels(deriv, x0, x, 0.1, rule) - target;
      const double dx = r / deriv(x);
      x -= dx;
      if (std::abs(dx) <= 1e-15 * (1.0 + std::abs(x))) return x;
    }
    throw Error(ErrorKind::Tolerance, "homoclinic inversion did not converge");
  };

  double t_prev = 0.0, s_prev = sigma_mid, z_prev = 0.0;
  bool top = true;
  for (Index i = 0; i < m; ++i) {
    const double zi = spacing * static_cast<double>(i);
    double x;
    if (i == 0) {
      x = a;
    } else if (top && zi <= z_mid) {
      t_prev = newton(dz_dt, t_prev, z_prev, zi);
      z_prev = zi;
      x = a - t_prev * t_prev;
    } else {
      if (top) {
        top = false;
        z_prev = z_mid;
      }
      s_prev = newton(dz_dsigma, s_prev, z_prev, zi);
      z_prev = zi;
      x = std::exp(s_prev);
    }
    f(i) = x;
    df(i) = -x * std::sqrt(std::max(a - x, 0.0) * (b - x) / 2.0);
    d2f(i) = well.dW(well.b_minus() + x);
  }

  PulseProfile p;
  p.well_ = well;
  p.table_ = HermiteTable(0.0, spacing, f, df, d2f);
  p.amplitude_ = a;
  p.kappa_ = kappa;

  // M_h = 2∫_0^a dX/√(2q), ‖φ'‖² = 2∫_0^a X√(2q) dX, both with X = a − t².
  const double ta = std::sqrt(a);
  p.mass_ = 2.0 * integrate_panels(
                      [a = a, b = b](double t) { return 2.0 / std::sqrt((b - a + t * t) / 2.0); },
                      0.0, ta, 0.05, rule);
  const double kin = 2.0 * integrate_panels(
                               [a = a, b = b](double t) {
                                 return 2.0 * (a - t * t) * t * t * std::sqrt((b - a + t * t) / 2.0);
                               },
                               0.0, ta, 0.05, rule);
  p.kernel_norm_ = std::sqrt(kin);

  // z(X) = −ln X/κ + C + o(1); φ_max = e^{κC}.
  const double excess = integrate_panels(
      [&](double s) { return -dz_dsigma(s) - 1.0 / kappa; }, sigma_mid - 60.0, sigma_mid, 0.25, rule);
  p.phi_max_ = (a / 2.0) * std::exp(kappa * (z_mid + excess));

  p.residual_ = max_fd_residual(p);
  if (!(p.residual_ <= tol))
    throw Error(ErrorKind::Tolerance, "homoclinic residual " + std::to_string(p.residual_) +
                                          " exceeds tolerance");
  return p;
}

FarField far_field_params(const PulseProfile& profile, double threshold) {
  const auto& tab = profile.table();
  const Index m = tab.values().size();
  std::vector<double> zs, ls;
  for (Index i = 0; i < m; ++i) {
    const double v = tab.values()(i);
    if (v >= threshold) continue;
    if (!(v > 0.0)) throw Error(ErrorKind::Window, "fit window contains non-positive tail values");
    zs.push_back(tab.spacing() * static_cast<double>(i));
    ls.push_back(std::log(v));
  }
  if (zs.size() < 8) throw Error(ErrorKind::Window, "tail fit window too short; widen the profile");
  const Index k = static_cast<Index>(zs.size());
  Matrix design(k, 2);
  Vector rhs(k);
  for (Index i = 0; i < k; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = -zs[static_cast<std::size_t>(i)];
    rhs(i) = ls[static_cast<std::size_t>(i)];
  }
  const Vector coef = design.colPivHouseholderQr().solve(rhs);
  FarField ff;
  ff.phi_max = std::exp(coef(0));
  ff.decay_rate = coef(1);
  ff.max_log_deviation = (design * coef - rhs).cwiseAbs().maxCoeff();
  ff.window_begin = zs.front();
  ff.window_end = zs.back();
  return ff;
}

// ---------------------------------------------------------------------------
// Background

Matrix second_derivative_matrix(const Grid& grid) {
  const Index n = grid.size();
  Matrix d2(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e(j) = 1.0;
    d2.col(j) = grid.second_derivative(e);
    e(j) = 0.0;
  }
  return d2;
}

double BackgroundProfile::bar(double z) const {
  const double az = std::abs(z);
  if (az >= tail_start_) return tail_derivatives(az)[0];
  return table_(az);
}

std::array<double, 9> BackgroundProfile::series_derivatives(double az) const {
  std::array<double, 9> d{};
  for (Index k = 0; k < coeffs_.size(); ++k) {
    const double kap = grid_->wavenumber(k);
    const double c = std::cos(kap * az), s = std::sin(kap * az);
    // d^m cos(κz): cos, −κ sin, −κ² cos, κ³ sin, repeating with period 4
    double pw = coeffs_(k);
    for (int m = 0; m < 9; ++m) {
      const double t = (m % 4 == 0) ? c : (m % 4 == 1) ? -s : (m % 4 == 2) ? -c : s;
      d[static_cast<std::size_t>(m)] += pw * t;
      pw *= kap;
    }
  }
  return d;
}

std::array<double, 9> BackgroundProfile::tail_derivatives(double az) const {
  // (P e^{−κz})^{(m)} = e^{−κz} Σ_r C(m,r) P^{(r)} (−κ)^{m−r}
  std::array<double, 9> dp{};  // derivatives of P
  for (Index r = 0; r < tail_poly_.size(); ++r) {
    double v = 0.0;
    for (Index m = r; m < tail_poly_.size(); ++m) {
      double fall = 1.0;
      for (Index t = 0; t < r; ++t) fall *= static_cast<double>(m - t);
      v += tail_poly_(m) * fall * std::pow(az, static_cast<double>(m - r));
    }
    dp[static_cast<std::size_t>(r)] = v;
  }
  const double e = std::exp(-kappa_ * az);
  std::array<double, 9> d{};
  for (int m = 0; m < 9; ++m) {
    double v = 0.0, binom = 1.0;
    for (int r = 0; r <= m; ++r) {
      v += binom * dp[static_cast<std::size_t>(r)] * std::pow(-kappa_, m - r);
      binom = binom * (m - r) / (r + 1);
    }
    d[static_cast<std::size_t>(m)] = e * v;
  }
  return d;
}

std::array<double, 9> BackgroundProfile::bar_high_derivatives(double z) const {
  const double az = std::abs(z);
  std::array<double, 9> d = az >= tail_start_ ? tail_derivatives(az) : series_derivatives(az);
  if (z < 0)
    for (int m = 1; m < 9; m += 2) d[static_cast<std::size_t>(m)] = -d[static_cast<std::size_t>(m)];
  return d;
}

std::array<double, 5> BackgroundProfile::bar_derivatives(double z) const {
  const auto h = bar_high_derivatives(z);
  return {h[0], h[1], h[2], h[3], h[4]};
}

BackgroundProfile solve_background(const DoubleWell& well, const PulseProfile& profile, int j,
                                   GridPtr grid) {
  if (j != 1 && j != 2) throw Error(ErrorKind::Domain, "background order must be 1 or 2");
  if (!grid) grid = Grid::with_spacing(2.0 * profile.half_width(), 0.1);
  const Index n = grid->size();

  Matrix op = second_derivative_matrix(*grid);
  for (Index i = 0; i < n; ++i) op(i, i) -= well.d2W(profile.value(grid->node(i)));

  // L² B₂ = 1 as two solves with L; forming L² squares the condition number
  // and leaves rounding noise in the tail.
  Eigen::PartialPivLU<Matrix> lu(op);
  if (!(lu.rcond() > 1e-12))
    throw Error(ErrorKind::Conditioning, "background operator is near singular");
  const Vector ones = Vector::Ones(n);
  Vector sol = lu.solve(ones);
  if (j == 2) {
    sol = lu.solve(sol).eval();
    op = (op * op).eval();
  }

  BackgroundProfile bp;
  bp.j_ = j;
  bp.grid_ = grid;
  bp.values_ = sol;
  bp.constant_ = std::pow(-well.alpha_minus(), -j);
  bp.measured_constant_ = sol(n - 1);
  const Vector res = op * sol - ones;
  bp.residual_ = std::sqrt(grid->integrate(res.cwiseAbs2()));

  const Vector bbar = sol.array() - bp.constant_;
  bp.coeffs_ = grid->coefficients(bbar);
  bp.kappa_ = std::sqrt(well.alpha_minus());

  // Far field: least squares for P_j on [Z_b/2 − 4/κ, Z_b/2], where the
  // subleading e^{−2κz} terms are ~1e−7 relative and B̄ is far above rounding.
  const double zb = grid->length();
  bp.tail_start_ = 0.5 * zb;
  {
    const double z_lo = std::max(0.0, bp.tail_start_ - 4.0 / bp.kappa_);
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i)
      if (grid->node(i) >= z_lo && grid->node(i) <= bp.tail_start_) rows.push_back(i);
    Matrix design(static_cast<Index>(rows.size()), j + 1);
    Vector rhs(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double z = grid->node(rows[r]);
      for (int m = 0; m <= j; ++m) design(static_cast<Index>(r), m) = std::pow(z, m) * std::exp(-bp.kappa_ * z);
      rhs(static_cast<Index>(r)) = bbar(rows[r]);
    }
    // column scaling keeps the normal equations tame
    Vector scale = design.colwise().norm().transpose();
    for (int m = 0; m <= j; ++m) design.col(m) /= scale(m);
    bp.tail_poly_ = design.colPivHouseholderQr().solve(rhs).cwiseQuotient(scale);
  }

  // M_B̄ = 2∫_0^∞ B̄: windowed quadrature up to the tail start, far field beyond
  {
    const GaussRule rule = gauss_legendre(16);
    const double inner = integrate_panels([&](double z) { return bp.series_derivatives(z)[0]; }, 0.0,
                                          bp.tail_start_, 0.5, rule);
    const double outer = integrate_panels([&](double z) { return bp.tail_derivatives(z)[0]; },
                                          bp.tail_start_, bp.tail_start_ + 60.0 / bp.kappa_, 0.5, rule);
    bp.mass_bar_ = 2.0 * (inner + outer);
  }

  // Fine Hermite table of B̄ for fast evaluation inside the tail start.
  const Index fine = 8 * (n - 1) + 1;
  const double hf = zb / static_cast<double>(fine - 1);
  Vector f(fine), df(fine), d2f(fine);
  for (Index i = 0; i < fine; ++i) {
    const double z = hf * static_cast<double>(i);
    const auto d = z >= bp.tail_start_ ? bp.tail_derivatives(z) : bp.series_derivatives(z);
    f(i) = d[0];
    df(i) = d[1];
    d2f(i) = d[2];
  }
  bp.table_ = HermiteTable(0.0, hf, f, df, d2f);
  return bp;
}

}  // namespace fchlab
