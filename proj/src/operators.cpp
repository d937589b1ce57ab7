#include "fchlab/operators.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fchlab/interp.hpp"
#include "fchlab/jet.hpp"

namespace fchlab {

namespace {

void require_grid(const Grid& g, const Grid& h) {
  if (!g.same_as(h)) throw Error(ErrorKind::GridMismatch, "operator and field live on different grids");
}

Vector map_values(const Field& u, double (DoubleWell::*fn)(double) const, const DoubleWell& well) {
  return u.values().unaryExpr([&](double x) { return (well.*fn)(x); });
}

}  // namespace

Field LinearMap::apply(const Field& f) const {
  require_grid(*grid_, f.grid());
  return Field(grid_, apply_(f.values()));
}

Matrix LinearMap::dense() const {
  const Index n = grid_->size();
  if (n > 2049) throw Error(ErrorKind::Domain, "dense realization limited to N <= 2049");
  Matrix m(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e(j) = 1.0;
    m.col(j) = apply_(e);
    e(j) = 0.0;
  }
  return m;
}

LinearMap compose(const LinearMap& a, const LinearMap& b, std::string name) {
  require_grid(a.grid(), b.grid());
  return LinearMap(
      a.grid_ptr(), [a, b](const Vector& v) { return a.apply(b.apply(v)); },
      false, std::move(name));
}

Field chemical_residual(const Field& u, const DoubleWell& well) {
  const Vector uzz = u.grid().second_derivative(u.values());
  return u.with_values(uzz - map_values(u, &DoubleWell::dW, well));
}

double energy(const Field& u, const DoubleWell& well) {
  const Vector r = chemical_residual(u, well).values();
  return 0.5 * u.grid().integrate(r.array().square().matrix());
}

Field variational_derivative(const Field& u, const DoubleWell& well) {
  return pulse_operator(u, well).apply(chemical_residual(u, well));
}

LinearMap pulse_operator(const Field& u, const DoubleWell& well) {
  const Vector pot = map_values(u, &DoubleWell::d2W, well);
  const GridPtr g = u.grid_ptr();
  return LinearMap(
      g, [g, pot](const Vector& v) -> Vector { return g->second_derivative(v) - pot.cwiseProduct(v); },
      true, "L");
}

LinearMap far_field_operator(GridPtr grid, const DoubleWell& well) {
  const double a = well.alpha_minus();
  const GridPtr g = grid;
  return LinearMap(
      g, [g, a](const Vector& v) -> Vector { return g->second_derivative(v) - a * v; }, true, "L_inf");
}

LinearMap second_variation(const Field& phi, const DoubleWell& well) {
  const GridPtr g = phi.grid_ptr();
  const Vector pot = map_values(phi, &DoubleWell::d2W, well);
  const Vector coupling =
      chemical_residual(phi, well).values().cwiseProduct(map_values(phi, &DoubleWell::d3W, well));
  return LinearMap(
      g,
      [g, pot, coupling](const Vector& v) -> Vector {
        const Vector lv = g->second_derivative(v) - pot.cwiseProduct(v);
        return g->second_derivative(lv) - pot.cwiseProduct(lv) - coupling.cwiseProduct(v);
      },
      true, "second_variation");
}

LinearMap linearization(const Field& phi, const DoubleWell& well) {
  const LinearMap second = second_variation(phi, well);
  const GridPtr g = phi.grid_ptr();
  return LinearMap(
      g,
      [g, second](const Vector& v) -> Vector {
        Vector w = second.apply(v.array() - g->integrate(v) / g->length());
        w.array() -= g->integrate(w) / g->length();
        return -w;
      },
      true, "linearization");
}

Field zero_mass_projection(const Field& f) {
  return f.with_values(f.values().array() - mean(f));
}

LinearMap zero_mass_projector(GridPtr grid) {
  const GridPtr g = grid;
  return LinearMap(
      g, [g](const Vector& v) -> Vector { return v.array() - g->integrate(v) / g->length(); }, true,
      "zero_mass_projection");
}

Field flow_field(const Field& u, const DoubleWell& well) {
  return -zero_mass_projection(variational_derivative(u, well));
}

std::array<double, 5> variational_derivative_jet(const std::array<double, 9>& u, const DoubleWell& well) {
  const Jet<8> U = Jet<8>::from_derivatives(u);
  // W'(u) = X(X − A)(X − B), X = u − b₋, and W'' = 3X² − 2(A+B)X + AB
  const double A = well.middle_root() - well.b_minus(), B = well.b_plus() - well.b_minus();
  const Jet<8> X = U + (-well.b_minus());
  const Jet<8> X2 = X * X;
  const Jet<8> dW = X2 * X - (A + B) * X2 + (A * B) * X;
  const Jet<8> d2W = 3.0 * X2 - (2 * (A + B)) * X + A * B;
  const Jet<6> R = second_derivative(U) - truncate<8, 6>(dW);
  const Jet<4> G = second_derivative(R) - truncate<6, 4>(truncate<8, 6>(d2W) * R);
  std::array<double, 5> out{};
  for (int m = 0; m <= 4; ++m) out[static_cast<std::size_t>(m)] = G.derivative(m);
  return out;
}

double continuum_h4_norm(const std::function<std::array<double, 5>(double)>& f, double length,
                         bool center) {
  static const GaussRule rule = gauss_legendre(16);
  const int panels = std::max(1, static_cast<int>(std::ceil(length / 0.25)));
  const double w = length / panels;
  std::array<double, 5> sq{};
  double sum0 = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * w;
    for (Index i = 0; i < rule.nodes.size(); ++i) {
      const auto d = f(mid + 0.5 * w * rule.nodes(i));
      const double wt = 0.5 * w * rule.weights(i);
      sum0 += wt * d[0];
      for (std::size_t m = 0; m < 5; ++m) sq[m] += wt * d[m] * d[m];
    }
  }
  if (center) sq[0] -= sum0 * sum0 / length;  // ∫(g − ḡ)² = ∫g² − (∫g)²/L
  double total = 0.0;
  for (double v : sq) total += v;
  return std::sqrt(std::max(total, 0.0));
}

double residual_norm(const AnsatzProfile& a, const ManifoldContext& ctx) {
  return continuum_h4_norm(
      [&](double z) { return variational_derivative_jet(ansatz_derivatives(a, ctx, z).total(), ctx.well); },
      ctx.length(), true);
}

Field nonlinear_remainder(const Field& phi, const Field& v, const DoubleWell& well) {
  return flow_field(phi + v, well) - flow_field(phi, well) - linearization(phi, well).apply(v);
}

GradientFamily::GradientFamily(double s) : s_(s) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::Domain, "gradient exponent s must lie in [0,1]");
}

double GradientFamily::factor(Index k, GradientOp op) const {
  if (k == 0) return 0.0;
  const double kk = static_cast<double>(k);
  switch (op) {
    case GradientOp::G: return std::pow(kk, 2 * s_);
    case GradientOp::G1: return std::pow(kk, s_);
    case GradientOp::G1Inv: return std::pow(kk, -s_);
    case GradientOp::GInv: return std::pow(kk, -2 * s_);
  }
  return 0.0;
}

Field GradientFamily::apply(GradientOp op, const Field& f) const {
  if (op == GradientOp::G1Inv || op == GradientOp::GInv) {
    const double m = mean(f);
    const double scale = f.values().cwiseAbs().maxCoeff() + 1.0;
    if (std::abs(m) > 1e-10 * scale)
      throw Error(ErrorKind::Domain, "inverse gradient operator needs a zero-mass field");
  }
  return f.with_values(
      f.grid().apply_symbol(f.values(), [&](Index k, double) { return factor(k, op); }));
}

LinearMap GradientFamily::map(GradientOp op, GridPtr grid) const {
  const GradientFamily fam = *this;
  const GridPtr g = grid;
  return LinearMap(
      g, [g, fam, op](const Vector& v) -> Vector {
        return g->apply_symbol(v, [&](Index k, double) { return fam.factor(k, op); });
      },
      true, "gradient");
}

void write_dense_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path);
  const std::int64_t rows = m.rows(), cols = m.cols();
  char tag[8] = "float64";
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(tag, sizeof tag);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

Matrix read_dense_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::int64_t rows = 0, cols = 0;
  char tag[8] = {};
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  in.read(tag, sizeof tag);
  if (!in || std::strncmp(tag, "float64", 8) != 0 || rows < 0 || cols < 0)
    throw Error(ErrorKind::Io, "bad matrix header in " + path);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw Error(ErrorKind::Io, "truncated matrix in " + path);
  return rm;
}

}  // namespace fchlab
