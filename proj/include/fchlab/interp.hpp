#pragma once

// Gauss–Legendre rules and quintic Hermite tables on uniform nodes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fchlab/error.hpp"

namespace fchlab {

struct GaussRule {
  Eigen::VectorXd nodes;    // on [-1, 1]
  Eigen::VectorXd weights;
};

/// Golub–Welsch: eigen-decomposition of the Jacobi matrix of the Legendre
/// recurrence.
inline GaussRule gauss_legendre(int n) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

/// Composite Gauss–Legendre integral of f over [a, b] with panels no wider
/// than max_panel.
template <typename Fn>
double integrate_panels(Fn&& f, double a, double b, double max_panel, const GaussRule& rule) {
  if (a == b) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / max_panel)));
  const double w = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * w;
    double s = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
      s += rule.weights(i) * f(mid + 0.5 * w * rule.nodes(i));
    sum += 0.5 * w * s;
  }
  return sum;
}

/// Piecewise quintic Hermite interpolant through (f, f', f'') on the nodes
/// z_i = z0 + i·h.  C² and sixth-order accurate.
class HermiteTable {
 public:
  HermiteTable() = default;
  HermiteTable(double z0, double h, Eigen::VectorXd f, Eigen::VectorXd df, Eigen::VectorXd d2f)
      : z0_(z0), h_(h), f_(std::move(f)), df_(std::move(df)), d2f_(std::move(d2f)) {
    if (f_.size() < 2 || df_.size() != f_.size() || d2f_.size() != f_.size())
      throw Error(ErrorKind::Domain, "Hermite table needs matching arrays of length >= 2");
  }

  double front() const { return z0_; }
  double back() const { return z0_ + h_ * static_cast<double>(f_.size() - 1); }
  double spacing() const { return h_; }
  const Eigen::VectorXd& values() const { return f_; }
  const Eigen::VectorXd& first() const { return df_; }
  const Eigen::VectorXd& second() const { return d2f_; }

  /// Value, first and second derivative at z (clamped into the table range).
  void eval(double z, double& f, double& df, double& d2f) const {
    const Eigen::Index last = f_.size() - 1;
    double x = (z - z0_) / h_;
    x = std::clamp(x, 0.0, static_cast<double>(last));
    Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(x), last - 1);
    const double t = x - static_cast<double>(i);
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;

    const double h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    const double h1 = t - 6 * t3 + 8 * t4 - 3 * t5;
    const double h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    const double h3 = 10 * t3 - 15 * t4 + 6 * t5;
    const double h4 = -4 * t3 + 7 * t4 - 3 * t5;
    const double h5 = 0.5 * t3 - t4 + 0.5 * t5;

    const double g0 = -30 * t2 + 60 * t3 - 30 * t4;
    const double g1 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
    const double g2 = t - 4.5 * t2 + 6 * t3 - 2.5 * t4;
    const double g4 = -12 * t2 + 28 * t3 - 15 * t4;
    const double g5 = 1.5 * t2 - 4 * t3 + 2.5 * t4;

    const double k0 = -60 * t + 180 * t2 - 120 * t3;
    const double k1 = -36 * t + 96 * t2 - 60 * t3;
    const double k2 = 1 - 9 * t + 18 * t2 - 10 * t3;
    const double k4 = -24 * t + 84 * t2 - 60 * t3;
    const double k5 = 3 * t - 12 * t2 + 10 * t3;

    const double a0 = f_(i), a1 = h_ * df_(i), a2 = h_ * h_ * d2f_(i);
    const double b0 = f_(i + 1), b1 = h_ * df_(i + 1), b2 = h_ * h_ * d2f_(i + 1);
    f = a0 * h0 + a1 * h1 + a2 * h2 + b0 * h3 + b1 * h4 + b2 * h5;
    df = (a0 * g0 + a1 * g1 + a2 * g2 - b0 * g0 + b1 * g4 + b2 * g5) / h_;
    d2f = (a0 * k0 + a1 * k1 + a2 * k2 - b0 * k0 + b1 * k4 + b2 * k5) / (h_ * h_);
  }

  double operator()(double z) const {
    double f, df, d2f;
    eval(z, f, df, d2f);
    return f;
  }

 private:
  double z0_ = 0.0;
  double h_ = 1.0;
  Eigen::VectorXd f_, df_, d2f_;
};

}  // namespace fchlab
