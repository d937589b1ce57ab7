#include "doctest.h"

#include <cmath>
#include <random>

#include "fchlab/core.hpp"

using namespace fchlab;

namespace {

const double kPi = 3.14159265358979323846;

// Direct O(N²) cosine synthesis, independent of the FFT path.
Vector direct_synthesis(const Vector& a) {
  const Index n = a.size();
  Vector x = Vector::Zero(n);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k) x(j) += a(k) * std::cos(kPi * double(j * k) / double(n - 1));
  return x;
}

Field random_smooth(const GridPtr& g, std::mt19937& rng, int modes = 12) {
  std::normal_distribution<double> nd;
  Vector a = Vector::Zero(g->size());
  for (int k = 0; k < modes; ++k) a(k) = nd(rng) / (1.0 + k * k);
  return Field(g, g->values(a));
}

}  // namespace

TEST_CASE("cosine transform agrees with direct summation and round-trips") {
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (Index n : {17, 33, 100}) {
    Vector a(n);
    for (Index k = 0; k < n; ++k) a(k) = nd(rng);
    CosineTransform<double> tr(n);
    const Vector x = tr.synthesize(a);
    CHECK((x - direct_synthesis(a)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tr.analyze(x) - a).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("long double transform round-trips") {
  CosineTransform<long double> tr(65);
  VectorX<long double> a = VectorX<long double>::LinSpaced(65, 0.0L, 1.0L);
  const auto back = tr.analyze(tr.synthesize(a));
  CHECK(double((back - a).cwiseAbs().maxCoeff()) < 1e-15);
}

TEST_CASE("grid invariants") {
  CHECK_THROWS_AS(Grid(10.0, 8), Error);
  CHECK_THROWS_AS(Grid(100.0, 100), Error);  // h > 0.1
  auto g = Grid::with_spacing(160.0);
  CHECK(g->size() == 2049);
  CHECK(g->spacing() <= 0.1);
  CHECK(g->weights().sum() == doctest::Approx(160.0).epsilon(1e-14));
}

TEST_CASE("norms of trivial fields") {
  auto g = Grid::make(40.0, 512);
  const Field zero = Field::zeros(g);
  CHECK(norm(zero, NormSpec::l2()) == 0.0);
  CHECK(norm(zero, NormSpec::h4()) == 0.0);
  CHECK(norm(zero, NormSpec::hg1(0.5)) == 0.0);
  const Field c = Field::constant(g, -2.5);
  CHECK(norm(c, NormSpec::l2()) == doctest::Approx(2.5 * std::sqrt(40.0)).epsilon(1e-13));
}

TEST_CASE("H4 norm of the first cosine mode matches the derivative series") {
  const double d = 4.0, eps = 0.1;
  auto g = Grid::make(d / eps, 512);
  const double k = kPi * eps / d;
  const Field f = Field::from_function(g, [&](double z) { return std::cos(k * z); });
  const double k2 = k * k;
  const double expected = std::sqrt(d / (2 * eps) * (1 + k2 + k2 * k2 + k2 * k2 * k2 + k2 * k2 * k2 * k2));
  CHECK(std::abs(norm(f, NormSpec::h4()) / expected - 1.0) < 1e-8);
}

TEST_CASE("HG1 rejects fields with mass and scales modes by k^s") {
  auto g = Grid::make(40.0, 512);
  CHECK_THROWS_AS(norm(Field::constant(g, 1.0), NormSpec::hg1(1.0)), Error);
  const Field f2 = Field::from_function(g, [&](double z) { return std::cos(2 * kPi * z / 40.0); });
  CHECK(norm(f2, NormSpec::hg1(1.0)) == doctest::Approx(2.0 * norm(f2, NormSpec::h4())).epsilon(1e-12));
  CHECK(norm(f2, NormSpec::hg1(0.0)) == doctest::Approx(norm(f2, NormSpec::h4())).epsilon(1e-12));
}

TEST_CASE("field validation and grid matching") {
  auto g = Grid::make(40.0, 512);
  auto h = Grid::make(40.0, 513);
  Vector bad = Vector::Zero(512);
  bad(3) = std::nan("");
  try {
    Field f(g, bad);
    FAIL("expected invalid-field");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidField);
  }
  try {
    inner_product_x(Field::zeros(g), Field::zeros(h));
    FAIL("expected grid mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
  // equal parameters count as the same grid
  CHECK_NOTHROW(Field::zeros(g) + Field::zeros(Grid::make(40.0, 512)));
}

TEST_CASE("X inner product") {
  const double d = 4.0, eps = 0.1;
  auto g = Grid::make(d / eps, 512);
  const Field one = Field::constant(g, 1.0);
  CHECK(inner_product_x(one, Field::zeros(g)) == 0.0);
  CHECK(inner_product_x(one, one) == doctest::Approx(d / eps).epsilon(1e-14));
  const Field c1 = Field::from_function(g, [&](double z) { return std::cos(kPi * eps * z / d); });
  const Field c2 = Field::from_function(g, [&](double z) { return std::cos(2 * kPi * eps * z / d); });
  CHECK(std::abs(inner_product_x(c1, c2)) < 1e-10);

  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Field u = random_smooth(g, rng), v = random_smooth(g, rng);
    const double lhs = std::abs(inner_product_x(u, v));
    CHECK(lhs <= norm(u, NormSpec::l2()) * norm(v, NormSpec::l2()) * (1 + 1e-12));
    CHECK(inner_product_x(u, v) == doctest::Approx(inner_product_x(v, u)).epsilon(1e-14));
    CHECK(norm(u, NormSpec::l2()) <= norm(u, NormSpec::h4()));
  }
}

TEST_CASE("H4 norm of a smooth bump converges under refinement") {
  auto bump = [](double z) { return std::exp(-0.5 * (z - 20.0) * (z - 20.0)); };
  auto coarse = Field::from_function(Grid::make(40.0, 401), bump);
  auto fine = Field::from_function(Grid::make(40.0, 801), bump);
  auto finer = Field::from_function(Grid::make(40.0, 1601), bump);
  const double e1 = std::abs(norm(coarse, NormSpec::h4()) - norm(finer, NormSpec::h4()));
  const double e2 = std::abs(norm(fine, NormSpec::h4()) - norm(finer, NormSpec::h4()));
  CHECK(e2 <= std::max(e1 / 10.0, 1e-12));
}

TEST_CASE("system parameters") {
  const SystemParams p = make_system_params(0.1, 16.0, 3, 13.0, 8.0, 1.0, 1.4);
  CHECK(p.length() == doctest::Approx(160.0));
  CHECK(p.tail_scale == doctest::Approx(std::exp(-std::sqrt(1.4) * 8.0)));
  CHECK(p.rho == doctest::Approx(10.0));
  CHECK_NOTHROW(require_renormalizable(p));
  CHECK_THROWS_AS(make_system_params(0.1, 16.0, 3, 13.0, 50.0, 1.0, 1.4), Error);
  CHECK_THROWS_AS(make_system_params(0.0, 16.0, 3, 13.0, 8.0, 1.0, 1.4), Error);
  CHECK_THROWS_AS(make_system_params(0.1, 16.0, 3, 13.0, 8.0, 1.5, 1.4), Error);
  const SystemParams big = make_system_params(0.1, 16.0, 3, 13.0, 8.0, 1.0, 1.4, 100.0);
  CHECK_THROWS_AS(require_renormalizable(big), Error);
}
