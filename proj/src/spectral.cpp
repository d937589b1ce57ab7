#include "fchlab/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

namespace fchlab {

namespace {

// X-orthonormal cosine modes q_k = cos(πkz/L)/√m_k, k = first .. first+M−1.
struct CosineBasis {
  GridPtr grid;
  Index first = 0, size = 0;

  CosineBasis(GridPtr g, bool zero_mass, Index modes) : grid(std::move(g)) {
    first = zero_mass ? 1 : 0;
    const Index avail = grid->size() - first;
    const Index dflt = static_cast<Index>(std::ceil(24.0 * grid->length() / pi_v<double>));
    size = std::min(avail, modes > 0 ? modes : dflt);
  }

  Vector synthesize(const Vector& c) const {
    Vector a = Vector::Zero(grid->size());
    for (Index j = 0; j < size; ++j) a(first + j) = c(j) / std::sqrt(grid->mode_norm_sq(first + j));
    return grid->values(a);
  }
  Vector coords(const Vector& v) const {
    const Vector a = grid->coefficients(v);
    Vector c(size);
    for (Index j = 0; j < size; ++j) c(j) = a(first + j) * std::sqrt(grid->mode_norm_sq(first + j));
    return c;
  }
  Matrix galerkin(const LinearMap& map) const {
    Matrix g(size, size);
    Vector e = Vector::Zero(size);
    for (Index j = 0; j < size; ++j) {
      e(j) = 1.0;
      g.col(j) = coords(map.apply(synthesize(e)));
      e(j) = 0.0;
    }
    return 0.5 * (g + g.transpose());
  }
  /// Diagonal of the H⁴ Gram matrix in this basis.
  Vector h4_gram() const {
    Vector d(size);
    for (Index j = 0; j < size; ++j) {
      const Index k = first + j;
      d(j) = h4_symbol(grid->wavenumber(k)) * grid->continuous_mode_norm_sq(k) / grid->mode_norm_sq(k);
    }
    return d;
  }
};

Vector remove_mean(const Grid& g, Vector v) {
  v.array() -= g.integrate(v) / g.length();
  return v;
}

// Orthonormal basis (columns) of the complement of span(T) in R^M.
Matrix complement(const Matrix& t) {
  Eigen::HouseholderQR<Matrix> qr(t);
  const Matrix q = qr.householderQ() * Matrix::Identity(t.rows(), t.rows());
  return q.rightCols(t.rows() - t.cols());
}

double min_generalized(const Matrix& a, const Matrix& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Iteration, "generalized eigensolve failed");
  return es.eigenvalues()(0);
}

Index count_negative(const Vector& ev) {
  return static_cast<Index>((ev.array() < 0.0).count());
}

void classify(SpectrumReport& r, Index n, double k_s, double delta) {
  r.expected_slow = n;
  r.stable_threshold = k_s;
  r.delta = delta;
  r.slow_dimension = 0;
  r.max_slow = 0;
  r.stable_edge = 0;
  // Slow means |λ| < k_s/2; an eigenvalue at or below −k_s/2 is a fast
  // unstable direction and breaks the dichotomy.
  Index unstable = 0;
  bool edge_found = false;
  for (Index i = 0; i < r.eigenvalues.size(); ++i) {
    const double lam = r.eigenvalues(i);
    if (std::abs(lam) < 0.5 * k_s) {
      ++r.slow_dimension;
      r.max_slow = std::max(r.max_slow, std::abs(lam));
    } else if (lam < 0) {
      ++unstable;
    } else if (!edge_found) {
      r.stable_edge = lam;
      edge_found = true;
    }
  }
  r.slow_constant = delta > 0 ? r.max_slow / delta : 0.0;
  r.pass = r.slow_dimension == n && unstable == 0 && edge_found;
  if (r.slow_dimension != n)
    r.note = "slow count " + std::to_string(r.slow_dimension) + " != " + std::to_string(n);
  if (unstable > 0)
    r.note += (r.note.empty() ? "" : "; ") + std::to_string(unstable) + " eigenvalue(s) <= -k_s/2";
}

}  // namespace

SpectrumReport eigs(const LinearMap& map, Index k, bool on_zero_mass, Index modes) {
  const Grid& g = map.grid();
  if (k < 1 || k > g.size() / 4) throw Error(ErrorKind::Domain, "eigs: need 1 <= k <= N/4");
  if (!map.self_adjoint()) throw Error(ErrorKind::Domain, "eigs: map is not self-adjoint");
  const CosineBasis basis(map.grid_ptr(), on_zero_mass, modes);
  if (basis.size < k) throw Error(ErrorKind::Domain, "eigs: Galerkin space smaller than k");
  Eigen::SelfAdjointEigenSolver<Matrix> es(basis.galerkin(map));
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Iteration, "eigs: eigensolver did not converge");

  SpectrumReport r;
  r.modes = basis.size;
  r.eigenvalues = es.eigenvalues().head(k);
  r.residuals.resize(k);
  for (Index i = 0; i < k; ++i) {
    Field psi(map.grid_ptr(), basis.synthesize(es.eigenvectors().col(i)));
    Vector a = map.apply(psi.values());
    if (on_zero_mass) a = remove_mean(g, a);
    r.residuals(i) = norm(psi.with_values(a - r.eigenvalues(i) * psi.values()), NormSpec::l2());
    r.eigenfields.push_back(std::move(psi));
  }
  return r;
}

Matrix galerkin_matrix(const LinearMap& map, bool on_zero_mass, Index modes) {
  return CosineBasis(map.grid_ptr(), on_zero_mass, modes).galerkin(map);
}

Vector galerkin_coordinates(const Field& f, bool on_zero_mass, Index modes) {
  return CosineBasis(f.grid_ptr(), on_zero_mass, modes).coords(f.values());
}

double PulseSpectrum::k_s() const {
  const double l2 = point.size() > 2 ? point[2] * point[2] : alpha_minus * alpha_minus;
  return std::min(l2, alpha_minus * alpha_minus);
}

double PulseSpectrum::k_s_full() const {
  double m = alpha_minus * alpha_minus;
  for (std::size_t i = 0; i < point.size(); ++i)
    if (i != 1) m = std::min(m, point[i] * point[i]);
  return m;
}

PulseSpectrum single_pulse_spectrum(const PulseProfile& pulse, double half_window) {
  const double z = half_window > 0 ? half_window : pulse.half_width();
  const GridPtr g = Grid::make(2 * z, 1025);
  const Field u = Field::from_function(g, [&](double x) { return pulse.value(x - z); });
  const LinearMap l = pulse_operator(u, pulse.well());
  const LinearMap minus_l(g, [l](const Vector& v) -> Vector { return -l.apply(v); }, true, "-L");
  const SpectrumReport r = eigs(minus_l, 16, false);
  PulseSpectrum s;
  s.alpha_minus = pulse.well().alpha_minus();
  for (Index i = 0; i < r.eigenvalues.size(); ++i)
    if (-r.eigenvalues(i) > -s.alpha_minus + 1e-6) s.point.push_back(-r.eigenvalues(i));
  return s;
}

SpectrumReport spectral_gap_report(const AnsatzProfile& a, const ManifoldContext& ctx,
                                   const PulseSpectrum& single, Index extra, Index modes) {
  const LinearMap lin = linearization(a.phi, ctx.well);
  const LinearMap minus_lin(ctx.grid, [lin](const Vector& v) -> Vector { return -lin.apply(v); }, true,
                            "-linearization");
  const Index n = a.config.size();
  SpectrumReport r = eigs(minus_lin, n + extra, true, modes);
  classify(r, n, single.k_s(), ctx.delta());
  return r;
}

ConstrainedIndex constrained_negative_index(const Matrix& L, const Matrix& S, double mu,
                                            const Vector& weights) {
  const Index m = L.rows();
  if (L.cols() != m || S.rows() != m) throw Error(ErrorKind::Domain, "constrained index: size mismatch");
  const Vector w = weights.size() == m ? weights : Vector::Ones(m);
  // Work in the unweighted frame x = W^{1/2}v where the operator is symmetric.
  const Vector sw = w.cwiseSqrt();
  Matrix a = sw.asDiagonal() * (L - mu * Matrix::Identity(m, m)) * sw.cwiseInverse().asDiagonal();
  a = (0.5 * (a + a.transpose())).eval();
  const Matrix s = sw.asDiagonal() * S;

  ConstrainedIndex out;
  Eigen::SelfAdjointEigenSolver<Matrix> full(a);
  const double scale = full.eigenvalues().cwiseAbs().maxCoeff();
  if (full.eigenvalues().cwiseAbs().minCoeff() <= 1e-12 * std::max(scale, 1.0))
    throw Error(ErrorKind::Shift, "L - mu is singular; choose another mu");
  out.n_L = count_negative(full.eigenvalues());

  out.D = s.transpose() * full.eigenvectors() * full.eigenvalues().cwiseInverse().asDiagonal() *
          full.eigenvectors().transpose() * s;
  out.D = (0.5 * (out.D + out.D.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> dsol(out.D, Eigen::EigenvaluesOnly);
  out.n_D = count_negative(dsol.eigenvalues());
  out.formula = out.n_L - out.n_D;

  const Matrix z = complement(s);
  Eigen::SelfAdjointEigenSolver<Matrix> con(z.transpose() * a * z, Eigen::EigenvaluesOnly);
  out.brute_force = count_negative(con.eigenvalues());
  return out;
}

Coercivity coercivity_constant(const AnsatzProfile& a, const ManifoldContext& ctx,
                               const std::vector<Field>& tangents, double k_s, Index modes) {
  const Index dflt = static_cast<Index>(std::ceil(12.0 * ctx.length() / pi_v<double>));
  const CosineBasis basis(ctx.grid, true, modes > 0 ? modes : dflt);
  const Matrix g = basis.galerkin(second_variation(a.phi, ctx.well));  // = −𝕃 on zero mass
  Matrix t(basis.size, static_cast<Index>(tangents.size()));
  for (std::size_t i = 0; i < tangents.size(); ++i) t.col(static_cast<Index>(i)) = basis.coords(tangents[i].values());
  const Matrix z = complement(t);
  const Matrix gz = z.transpose() * g * z;

  Coercivity c;
  c.modes = basis.size;
  c.mu_tilde = 0.75 * k_s;
  Eigen::SelfAdjointEigenSolver<Matrix> xs(gz, Eigen::EigenvaluesOnly);
  c.mu_x = xs.eigenvalues()(0);

  auto fill = [&](const Vector& h, Coercivity::Norm& out) {
    out.mu = min_generalized(gz, z.transpose() * h.asDiagonal() * z);
    // Diagonal Gram: scale to a standard problem.
    const Vector is = h.cwiseSqrt().cwiseInverse();
    const Matrix gs = is.asDiagonal() * g * is.asDiagonal();
    const Vector ih = h.cwiseInverse();
    auto min_eig = [](const Matrix& m) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
      return es.eigenvalues()(0);
    };
    out.mu_unconstrained = min_eig(gs);
    // ⟨𝓛v,v⟩ + γ‖v‖²_X ≥ μ_e(γ)‖v‖²_H on zero-mass fields; keep the γ that
    // maximizes the lemma bound.
    for (int i = 0; i <= 20; ++i) {
      const double gamma = std::pow(10.0, -2.0 + 0.2 * i);
      Matrix m = gs;
      m.diagonal() += gamma * ih;
      const double me = min_eig(m);
      if (me <= 0) continue;
      const double bound = c.mu_tilde * me / (c.mu_tilde + gamma);
      if (bound > out.bound) {
        out.bound = bound;
        out.mu_e = me;
        out.gamma_e = gamma;
      }
    }
    out.pass = out.mu > 0 && out.mu >= out.bound - 1e-8;
  };
  Vector h2(basis.size);
  for (Index j = 0; j < basis.size; ++j) {
    const double k2 = std::pow(ctx.grid->wavenumber(basis.first + j), 2);
    h2(j) = 1 + k2 + k2 * k2;
  }
  fill(basis.h4_gram(), c.h4);
  fill(h2, c.h2);
  return c;
}

Alignment tangent_alignment(const std::vector<Field>& slow, const std::vector<Field>& tangents) {
  const Index n = static_cast<Index>(slow.size());
  if (n != static_cast<Index>(tangents.size()))
    throw Error(ErrorKind::Domain, "slow space and tangent space differ in dimension");
  std::vector<Field> t;
  for (const auto& f : tangents) t.push_back((1.0 / norm(f, NormSpec::l2())) * f);
  Matrix m(n, n);  // m_ji = ⟨t_j, ψ_i⟩
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) m(j, i) = inner_product_x(t[static_cast<std::size_t>(j)], slow[static_cast<std::size_t>(i)]);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Alignment out;
  out.beta = svd.matrixU() * svd.matrixV().transpose();
  out.beta_defect = (m.transpose() * m - Matrix::Identity(n, n)).norm();
  const Index band = static_cast<Index>(std::ceil(24.0 * slow[0].grid().length() / pi_v<double>));
  for (Index i = 0; i < n; ++i) {
    Field d = slow[static_cast<std::size_t>(i)];
    for (Index j = 0; j < n; ++j) d -= out.beta(j, i) * t[static_cast<std::size_t>(j)];
    out.error = std::max(out.error, norm(d, NormSpec::h4().band(band)));
  }
  return out;
}

SymmetrizedGap symmetrized_gap(const AnsatzProfile& a, const ManifoldContext& ctx,
                               const GradientFamily& family, const std::vector<Field>& tangents,
                               Index modes) {
  const LinearMap g1 = family.map(GradientOp::G1, ctx.grid);
  const LinearMap second = second_variation(a.phi, ctx.well);
  const LinearMap sym(
      ctx.grid, [g1, second](const Vector& v) -> Vector { return g1.apply(second.apply(g1.apply(v))); }, true,
      "G1 L G1");
  const Index n = a.config.size();
  SymmetrizedGap out;
  out.spectrum = eigs(sym, n + 6, true, modes);
  const double rho = std::pow(ctx.params.epsilon, -family.s());
  out.delta_g = ctx.delta() * rho * rho * rho;

  std::vector<Field> w;
  for (const auto& t : tangents) w.push_back(family.apply(GradientOp::G1Inv, zero_mass_projection(t)));
  Matrix gram(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) gram(i, j) = inner_product_x(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
  const Eigen::LDLT<Matrix> ldlt(gram);
  const Index k = out.spectrum.eigenvalues.size();
  out.distance.resize(k);
  for (Index i = 0; i < k; ++i) {
    const Field& psi = out.spectrum.eigenfields[static_cast<std::size_t>(i)];
    Vector b(n);
    for (Index j = 0; j < n; ++j) b(j) = inner_product_x(w[static_cast<std::size_t>(j)], psi);
    out.distance(i) = std::sqrt(std::max(0.0, 1.0 - b.dot(ldlt.solve(b))));
  }

  auto& r = out.spectrum;
  r.expected_slow = n;
  r.delta = out.delta_g;
  r.max_slow = r.eigenvalues.head(n).cwiseAbs().maxCoeff();
  r.stable_edge = r.eigenvalues(n);
  out.mu_g = r.stable_edge;
  out.alignment = out.distance.head(n).maxCoeff();
  out.slow_constant = r.max_slow / out.delta_g;
  out.alignment_constant = out.alignment / out.delta_g;
  out.gap_ratio = r.eigenvalues(n) / r.eigenvalues(n - 1);
  // Slow means: among the n lowest, inside the span, and separated by a gap.
  r.slow_dimension = static_cast<Index>((out.distance.head(n).array() < 0.5).count());
  r.slow_constant = out.slow_constant;
  out.pass = r.slow_dimension == n && out.gap_ratio >= 2.0;
  r.pass = out.pass;
  if (!out.pass)
    r.note = "slow modes are not the n lowest or the gap is below 2 (ratio " + std::to_string(out.gap_ratio) + ")";
  return out;
}

double eta_lower(double delta0, double delta1, double delta2, double mu2) {
  const double q = delta2 / mu2;
  return q + std::sqrt(q * q + 2 * (delta0 + delta1) / mu2);
}

double eta_upper(double eta, double c1, double c2, double mu2, double r) {
  const double p = r + 1;
  if (!(p > 2)) throw Error(ErrorKind::Domain, "nonlinearity exponent must exceed 2");
  return std::min(eta, std::pow(mu2 / (2 * c2), 1.0 / (p - 2)) / c1);
}

bool DiagnosticsReport::all_pass() const {
  return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
}

DiagnosticsReport el_bounds(const std::vector<PulseConfiguration>& sample, const ManifoldContext& ctx,
                            const PulseSpectrum& single, const ElInputs& in) {
  DiagnosticsReport rep;
  rep.configs = sample;
  rep.delta1 = in.delta1;
  rep.substitution_note =
      "eta^* uses mu_2 for the undefined mu_1 and the exponent r+1 for the undefined s; c_1 = 1";
  const Index dflt = static_cast<Index>(std::ceil(12.0 * ctx.length() / pi_v<double>));
  const CosineBasis basis(ctx.grid, true, in.modes > 0 ? in.modes : dflt);
  Vector h2(basis.size);
  for (Index j = 0; j < basis.size; ++j) {
    const double k2 = std::pow(ctx.grid->wavenumber(basis.first + j), 2);
    h2(j) = 1 + k2 + k2 * k2;
  }
  const Vector h4 = basis.h4_gram();
  double jmin = INFINITY, jmax = -INFINITY;
  rep.h4.mu2 = rep.h2.mu2 = INFINITY;
  int id = 0;
  for (const auto& cfg : sample) {
    const AnsatzProfile a = build_ansatz(cfg, ctx);
    const double j = energy(a.phi, ctx.well);
    jmin = std::min(jmin, j);
    jmax = std::max(jmax, j);
    const std::vector<Field> tangents = tangent_basis(cfg, ctx);
    Matrix t(basis.size, static_cast<Index>(tangents.size()));
    for (std::size_t i = 0; i < tangents.size(); ++i) t.col(static_cast<Index>(i)) = basis.coords(tangents[i].values());
    const Matrix z = complement(t);
    const Vector zg = z.transpose() * basis.coords(variational_derivative(a.phi, ctx.well).values());
    const Coercivity c = coercivity_constant(a, ctx, tangents, single.k_s(), basis.size);

    // A normal direction of unit H⁴ norm for the nonlinearity fit.
    std::mt19937_64 rng(1234 + static_cast<std::uint64_t>(id));
    std::normal_distribution<double> normal;
    Vector y(z.cols());
    for (Index k = 0; k < y.size(); ++k) y(k) = normal(rng) * std::exp(-static_cast<double>(k) / 40.0);
    const Vector coef = z * y;
    const Field v(ctx.grid, basis.synthesize(coef));
    const double j0 = energy(a.phi, ctx.well);
    const Vector dj = basis.coords(variational_derivative(a.phi, ctx.well).values());
    const double quad = coef.dot(basis.galerkin(second_variation(a.phi, ctx.well)) * coef);

    for (auto* e : {&rep.h4, &rep.h2}) {
      const Vector& h = e == &rep.h4 ? h4 : h2;
      const Matrix hz = z.transpose() * h.asDiagonal() * z;
      e->delta2 = std::max(e->delta2, std::sqrt(std::max(0.0, zg.dot(hz.ldlt().solve(zg)))));
      e->mu2 = std::min(e->mu2, e == &rep.h4 ? c.h4.mu : c.h2.mu);
      const double vh = std::sqrt(coef.dot(h.asDiagonal() * coef));
      // 𝓝_E(v) = J(Φ + v) − J(Φ) − ⟨∇J, v⟩ − ½⟨𝓛v, v⟩ along the ray.
      for (double amp : {0.5, 1.0, 2.0}) {
        const double sc = amp * 0.05 / vh;
        const double ne = energy(a.phi + sc * v, ctx.well) - j0 - sc * dj.dot(coef) - 0.5 * sc * sc * quad;
        e->c2 = std::max(e->c2, std::abs(ne) / std::pow(sc * vh, in.r + 1));
      }
    }
    rep.records.push_back({"coercivity_h4", id, c.h4.mu, 0.0, c.h4.mu > 0, ""});
    ++id;
  }
  rep.delta0 = jmax - jmin;
  for (auto* e : {&rep.h4, &rep.h2}) {
    e->eta_lower = eta_lower(rep.delta0, rep.delta1, e->delta2, e->mu2);
    e->eta_upper = eta_upper(in.eta, 1.0, e->c2, e->mu2, in.r);
  }
  rep.records.push_back({"EL_h4", -1, rep.h4.eta_lower, rep.h4.eta_upper, rep.h4.eta_lower < rep.h4.eta_upper,
                         rep.substitution_note});
  return rep;
}

}  // namespace fchlab
