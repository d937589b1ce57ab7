#include "fchlab/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fchlab {

ManifoldContext ManifoldContext::make(const DoubleWell& well, const SystemParams& params,
                                      GridPtr grid) {
  if (!grid) grid = Grid::with_spacing(params.length());
  if (std::abs(grid->length() - params.length()) > 1e-9 * params.length())
    throw Error(ErrorKind::GridMismatch, "grid length differs from d/epsilon");
  PulseProfile pulse = solve_homoclinic(well);
  BackgroundProfile b2 = solve_background(well, pulse, 2);
  return ManifoldContext{well, std::move(pulse), std::move(b2), std::move(grid), params};
}

ManifoldContext ManifoldContext::with_params(const SystemParams& p) const {
  ManifoldContext c = *this;
  c.params = p;
  if (std::abs(grid->length() - p.length()) > 1e-9 * p.length()) c.grid = Grid::with_spacing(p.length());
  return c;
}

ManifoldContext ManifoldContext::with_grid(GridPtr g) const {
  ManifoldContext c = *this;
  c.grid = std::move(g);
  return c;
}

double total_mass_for(int n, const PulseProfile& pulse, double excess) {
  return n * pulse.mass() + excess;
}

double PulseConfiguration::min_gap() const {
  double g = std::numeric_limits<double>::infinity();
  for (Index i = 0; i + 1 < p.size(); ++i) g = std::min(g, p(i + 1) - p(i));
  return g;
}

PulseConfiguration PulseConfiguration::equispaced(int n, double length) {
  PulseConfiguration c;
  c.p.resize(n);
  for (int i = 0; i < n; ++i) c.p(i) = (i + 0.5) * length / n;
  return c;
}

bool is_admissible(const PulseConfiguration& config, double length, double ell) {
  const Vector& p = config.p;
  if (p.size() < 1 || !p.allFinite()) return false;
  if (2.0 * p(0) < ell || 2.0 * (length - p(p.size() - 1)) < ell) return false;
  for (Index i = 0; i + 1 < p.size(); ++i)
    if (p(i + 1) - p(i) < ell) return false;
  return true;
}

void require_admissible(const PulseConfiguration& config, double length, double ell) {
  if (!is_admissible(config, length, ell))
    throw Error(ErrorKind::Admissibility,
                "pulse configuration violates ordering or minimum spacing (shadow gaps included)");
}

double mass(const Field& u, double b_minus) {
  return u.grid().integrate(u.values().array() - b_minus);
}

Field build_n_pulse(const PulseConfiguration& config, const PulseProfile& profile, GridPtr grid,
                    double ell) {
  require_admissible(config, grid->length(), ell);
  Vector v = Vector::Constant(grid->size(), profile.well().b_minus());
  for (Index j = 0; j < grid->size(); ++j)
    for (Index i = 0; i < config.size(); ++i) v(j) += profile.bar(grid->node(j) - config.p(i));
  return Field(std::move(grid), std::move(v));
}

namespace {

// Φ = u_n + λB_{2,n} + (A₀ + A₁z)e^{−κz} + (C₀ + C₁(z−L))e^{κ(z−L)} is linear in
// c = (λ, A₀, A₁, C₀, C₁); the four boundary conditions and the mass
// constraint form a 5×5 linear system.  In terms of the internal parameters,
// A₀ = e^{κp₀}, A₁ = A₀e₀, and the right term is (1 + e_{n+1}(z−L))e^{κ(z−p_{n+1})},
// the mirror image of the left one.
struct Closure {
  Vector coeffs;        // c
  Vector u_n, b2n;      // nodal values
  std::array<double, 4> raw_bc{};   // u_n', u_n''' at 0, then at L
  std::array<double, 4> b2n_bc{};
  Eigen::Matrix<double, 5, 5> system;
  Eigen::Matrix<double, 5, 1> rhs;
};

// derivatives 1 and 3 of (c₀ + c₁w)e^{sκw} at w = 0
std::array<double, 2> exp_poly_odd(double c0, double c1, double s, double kappa) {
  const double k = s * kappa;
  // d/dw maps (c₀, c₁) to (c₁ + k c₀, k c₁)
  double a0 = c0, a1 = c1;
  std::array<double, 2> out{};
  for (int m = 1; m <= 3; ++m) {
    const double n0 = a1 + k * a0, n1 = k * a1;
    a0 = n0;
    a1 = n1;
    if (m == 1) out[0] = a0;
    if (m == 3) out[1] = a0;
  }
  return out;
}

Closure solve_closure(const PulseConfiguration& config, const ManifoldContext& ctx) {
  const Grid& g = *ctx.grid;
  const double L = g.length(), kappa = ctx.kappa(), bm = ctx.well.b_minus();
  const Index n = g.size();
  Closure cl;
  cl.u_n = Vector::Constant(n, bm);
  cl.b2n = Vector::Constant(n, ctx.background.constant());
  for (Index j = 0; j < n; ++j) {
    const double z = g.node(j);
    for (Index i = 0; i < config.size(); ++i) {
      cl.u_n(j) += ctx.pulse.bar(z - config.p(i));
      cl.b2n(j) += ctx.background.bar(z - config.p(i));
    }
  }
  for (Index i = 0; i < config.size(); ++i) {
    for (int side = 0; side < 2; ++side) {
      const double z = side == 0 ? 0.0 : L;
      const auto dp = ctx.pulse.derivatives(z - config.p(i));
      const auto db = ctx.background.bar_derivatives(z - config.p(i));
      cl.raw_bc[2 * side] += dp[1];
      cl.raw_bc[2 * side + 1] += dp[3];
      cl.b2n_bc[2 * side] += db[1];
      cl.b2n_bc[2 * side + 1] += db[3];
    }
  }

  Vector el(n), zel(n), er(n), zer(n);
  for (Index j = 0; j < n; ++j) {
    const double z = g.node(j);
    el(j) = std::exp(-kappa * z);
    zel(j) = z * el(j);
    er(j) = std::exp(kappa * (z - L));
    zer(j) = (z - L) * er(j);
  }

  auto& S = cl.system;
  S.setZero();
  // rows: Φ'(0), Φ'''(0), Φ'(L), Φ'''(L), mass
  for (int side = 0; side < 2; ++side) {
    S(2 * side, 0) = cl.b2n_bc[2 * side];
    S(2 * side + 1, 0) = cl.b2n_bc[2 * side + 1];
  }
  const double shift = std::exp(-kappa * L);  // left modes seen from z = L and vice versa
  {
    // left modes at z = 0
    const auto a0 = exp_poly_odd(1, 0, -1, kappa);
    const auto a1 = exp_poly_odd(0, 1, -1, kappa);
    S(0, 1) = a0[0];
    S(1, 1) = a0[1];
    S(0, 2) = a1[0];
    S(1, 2) = a1[1];
  }
  {
    // left modes at z = L: (A₀ + A₁z)e^{−κz} = e^{−κL}((A₀ + A₁L) + A₁w)e^{−κw}, w = z − L
    const auto a0 = exp_poly_odd(1, 0, -1, kappa);
    const auto a1 = exp_poly_odd(L, 1, -1, kappa);
    S(2, 1) = shift * a0[0];
    S(3, 1) = shift * a0[1];
    S(2, 2) = shift * a1[0];
    S(3, 2) = shift * a1[1];
    // right modes at z = L
    const auto c0 = exp_poly_odd(1, 0, 1, kappa);
    const auto c1 = exp_poly_odd(0, 1, 1, kappa);
    S(2, 3) = c0[0];
    S(3, 3) = c0[1];
    S(2, 4) = c1[0];
    S(3, 4) = c1[1];
    // right modes at z = 0: (C₀ + C₁(z−L))e^{κ(z−L)} = e^{−κL}((C₀ − C₁L) + C₁z)e^{κz}
    const auto r0 = exp_poly_odd(1, 0, 1, kappa);
    const auto r1 = exp_poly_odd(-L, 1, 1, kappa);
    S(0, 3) = shift * r0[0];
    S(1, 3) = shift * r0[1];
    S(0, 4) = shift * r1[0];
    S(1, 4) = shift * r1[1];
  }
  S(4, 0) = g.integrate(cl.b2n);
  S(4, 1) = g.integrate(el);
  S(4, 2) = g.integrate(zel);
  S(4, 3) = g.integrate(er);
  S(4, 4) = g.integrate(zer);

  cl.rhs << -cl.raw_bc[0], -cl.raw_bc[1], -cl.raw_bc[2], -cl.raw_bc[3],
      ctx.params.total_mass - g.integrate(cl.u_n.array() - bm);

  Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(S);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw Error(ErrorKind::Refinement, "boundary/mass closure is singular");
  cl.coeffs = lu.solve(cl.rhs);
  return cl;
}

Closure solve_internal(const PulseConfiguration& config, const ManifoldContext& ctx,
                       InternalParams& ip) {
  const double L = ctx.length(), kappa = ctx.kappa();
  require_admissible(config, L, ctx.params.min_spacing);
  const double M = ctx.params.total_mass;
  const double M1 = M - config.size() * ctx.pulse.mass();
  if (!(M1 > 0.0 && M1 < ctx.pulse.mass()))
    throw Error(ErrorKind::MassSplit, "need M = n*M_h + M1 with 0 < M1 < M_h");

  Closure cl = solve_closure(config, ctx);
  const double lambda = cl.coeffs(0), A0 = cl.coeffs(1), A1 = cl.coeffs(2);
  const double C0 = cl.coeffs(3), C1 = cl.coeffs(4);
  if (!(A0 > 0.0) || !(C0 > 0.0))
    throw Error(ErrorKind::Refinement, "boundary correction has no real shadow-pulse location");

  ip.lambda = lambda;
  ip.p0 = std::log(A0) / kappa;
  ip.e0 = A1 / A0;
  ip.p_np1 = L - std::log(C0) / kappa;
  ip.e_np1 = C1 / C0;
  ip.lambda_seed = M1 / (L * ctx.background.constant() + config.size() * ctx.background.decaying_mass());
  ip.d1 = cl.raw_bc[0] + lambda * cl.b2n_bc[0];
  ip.d3 = cl.raw_bc[1] + lambda * cl.b2n_bc[1];
  const double a = kappa * kappa;
  ip.e0_seed = kappa * (ip.d3 - a * ip.d1) / (ip.d3 - 3 * a * ip.d1);

  const Eigen::Matrix<double, 5, 1> r = cl.system * cl.coeffs - cl.rhs;
  for (int k = 0; k < 4; ++k) ip.bc_residuals[static_cast<std::size_t>(k)] = r(k);
  ip.mass_error = r(4) / M;
  return cl;
}

}  // namespace

InternalParams internal_parameters(const PulseConfiguration& config, const ManifoldContext& ctx) {
  InternalParams ip;
  solve_internal(config, ctx, ip);
  return ip;
}

AnsatzProfile build_ansatz(const PulseConfiguration& config, const ManifoldContext& ctx) {
  InternalParams ip;
  const Closure cl = solve_internal(config, ctx, ip);
  const Grid& g = *ctx.grid;
  const double L = g.length(), kappa = ctx.kappa(), bm = ctx.well.b_minus();
  const Index n = g.size();

  Vector e(n);
  for (Index j = 0; j < n; ++j) {
    const double z = g.node(j);
    e(j) = (cl.coeffs(1) + cl.coeffs(2) * z) * std::exp(-kappa * z) +
           (cl.coeffs(3) + cl.coeffs(4) * (z - L)) * std::exp(kappa * (z - L));
  }
  const Vector bg = ip.lambda * cl.b2n;
  Field phi(ctx.grid, cl.u_n + bg + e);

  // recompute the mass on the assembled field so the recorded error is what
  // a caller would measure
  ip.mass_error = (mass(phi, bm) - ctx.params.total_mass) / ctx.params.total_mass;
  if (!(std::abs(ip.mass_error) < 1e-10))
    throw Error(ErrorKind::Refinement, "ansatz mass constraint not met");
  for (double r : ip.bc_residuals)
    if (!(std::abs(r) < 1e-8)) throw Error(ErrorKind::Refinement, "ansatz boundary conditions not met");

  return AnsatzProfile{config, ip, std::move(phi), Field(ctx.grid, cl.u_n), Field(ctx.grid, bg),
                       Field(ctx.grid, e)};
}

std::array<double, 9> AnsatzDerivatives::total() const {
  std::array<double, 9> t{};
  for (std::size_t m = 0; m < 9; ++m) t[m] = raw[m] + background[m] + boundary[m];
  return t;
}

AnsatzDerivatives ansatz_derivatives(const AnsatzProfile& a, const ManifoldContext& ctx, double z) {
  AnsatzDerivatives d;
  const auto& ip = a.internal;
  d.raw[0] = ctx.well.b_minus();
  d.background[0] = ip.lambda * ctx.background.constant();
  for (Index i = 0; i < a.config.size(); ++i) {
    const auto dp = ctx.pulse.high_derivatives(z - a.config.p(i));
    const auto db = ctx.background.bar_high_derivatives(z - a.config.p(i));
    for (std::size_t m = 0; m < 9; ++m) {
      d.raw[m] += dp[m];
      d.background[m] += ip.lambda * db[m];
    }
  }
  // (1 + e₀z)e^{−κ(z−p₀)} and (1 + e_{n+1}(z−L))e^{κ(z−p_{n+1})}:
  // m-th derivative of (1 + e w)e^{sκ(…)} is e^{…}((sκ)^m(1 + e w) + m(sκ)^{m−1}e)
  const double k = ctx.kappa(), L = ctx.length();
  const double el = std::exp(-k * (z - ip.p0)), er = std::exp(k * (z - ip.p_np1));
  double pl = 1.0, pr = 1.0;  // (−κ)^m, κ^m
  double pl_prev = 0.0, pr_prev = 0.0;
  for (int m = 0; m < 9; ++m) {
    d.boundary[static_cast<std::size_t>(m)] = el * (pl * (1 + ip.e0 * z) + m * pl_prev * ip.e0) +
                                              er * (pr * (1 + ip.e_np1 * (z - L)) + m * pr_prev * ip.e_np1);
    pl_prev = pl;
    pr_prev = pr;
    pl *= -k;
    pr *= k;
  }
  return d;
}

std::vector<Field> tangent_basis(const PulseConfiguration& config, const ManifoldContext& ctx,
                                 double rel_step) {
  const double h = rel_step * ctx.params.min_spacing;
  std::vector<Field> out;
  for (Index i = 0; i < config.size(); ++i) {
    PulseConfiguration plus = config, minus = config;
    plus.p(i) += h;
    minus.p(i) -= h;
    const Field fp = build_ansatz(plus, ctx).phi;
    const Field fm = build_ansatz(minus, ctx).phi;
    out.push_back((1.0 / (2 * h)) * (fp - fm));
  }
  return out;
}

std::vector<Field> leading_tangents(const PulseConfiguration& config, const ManifoldContext& ctx) {
  std::vector<Field> out;
  for (Index i = 0; i < config.size(); ++i) {
    const double pi = config.p(i);
    out.push_back(Field::from_function(
        ctx.grid, [&](double z) { return -ctx.pulse.derivatives(z - pi)[1]; }));
  }
  return out;
}

std::vector<PulseConfiguration> sample_configurations(const ManifoldContext& ctx, int count,
                                                      std::uint64_t seed, bool include_equispaced) {
  const int n = ctx.params.n_pulses;
  const double L = ctx.length(), ell = ctx.params.min_spacing;
  const double slack = L - n * ell;
  std::vector<PulseConfiguration> out;
  if (include_equispaced) out.push_back(PulseConfiguration::equispaced(n, L));
  if (count <= 0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  // Latin hypercube in [0,1]^n: one point per stratum in each coordinate.
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(n));
  for (auto& col : cols) {
    std::vector<int> perm(static_cast<std::size_t>(count));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < count; ++k) col.push_back((perm[static_cast<std::size_t>(k)] + uni(rng)) / count);
  }
  for (int k = 0; k < count; ++k) {
    std::vector<double> u;
    for (int d = 0; d < n; ++d) u.push_back(cols[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)]);
    std::sort(u.begin(), u.end());
    PulseConfiguration c;
    c.p.resize(n);
    for (int i = 0; i < n; ++i) c.p(i) = 0.5 * ell + i * ell + slack * u[static_cast<std::size_t>(i)];
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace fchlab
