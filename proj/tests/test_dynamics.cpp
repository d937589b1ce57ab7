#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fchlab/dynamics.hpp"
#include "fixtures.hpp"

using namespace fchlab;

namespace {

double kappa() { return std::sqrt(fixtures::well().alpha_minus()); }

// Three pulses at spacing 8 on [0, 24]; the spacing floor is L/(n+1) = 6.
ManifoldContext ring_context() { return fixtures::context(3, 6.0, 24.0); }

Field perturbed(const Field& phi, unsigned seed, double kmax, double amp) {
  return phi + fixtures::smooth_random(phi.grid_ptr(), seed, kmax, amp);
}

std::filesystem::path scratch_dir() {
  const auto d = std::filesystem::temp_directory_path() / "fchlab_dynamics_test";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("constant states do not move") {
  const GridPtr g = Grid::make(24.0, 257);
  const Field u = Field::constant(g, fixtures::well().b_minus() + 0.3);
  FlowStepper st(fixtures::well(), GradientFamily(0.5));
  SimulationState s = st.start(u);
  for (int i = 0; i < 10; ++i) st.step(s);
  CHECK((s.u.values() - u.values()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mass and energy over 10^4 steps") {
  const ManifoldContext ctx = ring_context();
  const AnsatzProfile a = build_ansatz(PulseConfiguration::equispaced(3, 24.0), ctx);
  for (double s : {0.0, 1.0}) {
    CAPTURE(s);
    FlowStepper st(ctx.well, GradientFamily(s));
    SimulationState state = st.start(perturbed(a.phi, 3, 4.0, 1e-2));
    double e = state.energy;
    bool monotone = true;
    for (int i = 0; i < 10000; ++i) {
      st.step(state);
      monotone = monotone && state.energy <= e + 1e-10;
      e = state.energy;
    }
    CHECK(monotone);
    CHECK(std::abs(mass(state.u, 0.0) - state.mass0) <= 1e-9 * std::abs(state.mass0));
    CHECK(state.ring.size() == state.ring_capacity);
  }
}

TEST_CASE("energy dissipation identity on a resolved transient") {
  const ManifoldContext ctx = ring_context();
  const AnsatzProfile a = build_ansatz(PulseConfiguration::equispaced(3, 24.0), ctx);
  StepperOptions o;
  o.dt0 = 1e-4;
  o.adaptive = false;
  FlowStepper st(ctx.well, GradientFamily(0.0), o);
  SimulationState s = st.start(perturbed(a.phi, 5, 3.0, 5e-2));
  s.ring_capacity = 10000;
  for (int i = 0; i < 2000; ++i) st.step(s);
  const std::vector<FlowSample> r(s.ring.begin(), s.ring.end());
  REQUIRE(r.size() == 2001);

  double worst = 0, integral = 0;
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    const double dj = (r[i + 1].energy - r[i - 1].energy) / (r[i + 1].t - r[i - 1].t);
    worst = std::max(worst, std::abs(dj + r[i].dissipation) / r[i].dissipation);
  }
  for (std::size_t i = 1; i < r.size(); ++i)
    integral += 0.5 * (r[i].dissipation + r[i - 1].dissipation) * (r[i].t - r[i - 1].t);
  const double drop = r.front().energy - r.back().energy;
  CHECK(worst < 0.02);
  CHECK(std::abs(drop - integral) < 0.05 * integral);
  CHECK(drop > 0.5 * r.front().energy * 1e-3);  // the transient is not trivial
}

TEST_CASE("energy acceptance and step-size underflow") {
  const ManifoldContext ctx = ring_context();
  const AnsatzProfile a = build_ansatz(PulseConfiguration::equispaced(3, 24.0), ctx);
  const Field u0 = perturbed(a.phi, 7, 4.0, 1e-2);

  SUBCASE("too large a first step is halved") {
    StepperOptions o;
    o.dt0 = 50.0;
    o.dt_max = 50.0;
    FlowStepper st(ctx.well, GradientFamily(0.0), o);
    SimulationState s = st.start(u0);
    const double e0 = s.energy;
    for (int i = 0; i < 20; ++i) st.step(s);
    CHECK(s.energy <= e0);
  }
  SUBCASE("an impossible acceptance test underflows") {
    StepperOptions o;
    o.energy_slack = -1.0;
    o.dump_path = (scratch_dir() / "underflow.csv").string();
    std::filesystem::remove(o.dump_path);
    FlowStepper st(ctx.well, GradientFamily(0.0), o);
    SimulationState s = st.start(u0);
    try {
      st.step(s);
      FAIL("no underflow");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Stiffness);
    }
    CHECK(std::filesystem::exists(o.dump_path));
  }
}

TEST_CASE("pulse extraction") {
  const ManifoldContext ctx = fixtures::context(3, 8.0, 48.0);
  const double h = ctx.grid->spacing();
  PulseConfiguration c;
  c.p.resize(3);
  c.p << 15.0137, 24.3311, 32.7702;
  const Field u = build_n_pulse(c, ctx.pulse, ctx.grid, 8.0);
  const PulseConfiguration found = extract_pulse_positions(u, 3, ctx.pulse);
  CHECK((found.p - c.p).cwiseAbs().maxCoeff() < h * h);
  CHECK(found.p(0) < found.p(1));
  CHECK(found.p(1) < found.p(2));

  // High mode, no mass.
  const double k = ctx.grid->wavenumber(ctx.grid->size() / 2 + 3);
  const Field noisy = u + Field::from_function(ctx.grid, [&](double z) { return 1e-6 * std::cos(k * z); });
  CHECK((extract_pulse_positions(noisy, 3, ctx.pulse).p - found.p).cwiseAbs().maxCoeff() < 1e-4);

  try {
    extract_pulse_positions(u, 4, ctx.pulse);
    FAIL("count mismatch not reported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Extraction);
    CHECK(std::string(e.what()).find("found 3") != std::string::npos);
  }
}

TEST_CASE("closed-form pulse velocity") {
  const ManifoldContext ctx = fixtures::context(2, 8.0);
  const ReducedModel m = ReducedModel::make(ctx.pulse, 160.0, 8.0);
  const double delta = std::exp(-kappa() * 8.0);

  const PulseConfiguration eq = PulseConfiguration::equispaced(3, 160.0);
  CHECK(pulse_velocity(eq, m).cwiseAbs().maxCoeff() <= std::pow(delta, 1.5));

  PulseConfiguration pair;
  pair.p.resize(2);
  pair.p << 75.5, 84.5;
  const Vector v = pulse_velocity(pair, m);
  CHECK(v(0) == -v(1));
  CHECK(v(0) < 0);  // repulsive

  pair.p << 75.5, 80.0;
  CHECK_THROWS_AS(pulse_velocity(pair, m), Error);

  // Oracle: the second-order residual Φ'' − W'(Φ) projected on the tangents
  // is the quantity the closed form approximates.
  for (double ell : {8.0, 12.0}) {
    CAPTURE(ell);
    const ManifoldContext c = fixtures::context(2, ell);
    const PulseConfiguration cfg = fixtures::packed(2, ell, 160.0);
    const AnsatzProfile a = build_ansatz(cfg, c);
    const auto t = tangent_basis(cfg, c);
    const Field r0 = chemical_residual(a.phi, c.well);
    const double oracle = -inner_product_x(r0, t[0]) / inner_product_x(t[0], t[0]);
    const double closed = ReducedModel::make(c.pulse, 160.0, ell).velocity(cfg.p)(0);
    CHECK(std::abs(closed / oracle - 1) < (ell == 8.0 ? 0.1 : 0.02));
  }
}

TEST_CASE("tangent projection of the flow residual") {
  SUBCASE("symmetric triple") {
    const ManifoldContext ctx = fixtures::context(3, 10.0);
    const Vector v = pulse_velocity_projection(fixtures::packed(3, 10.0, 160.0), ctx);
    CHECK(std::abs(v(1)) < 1e-6 * std::abs(v(0)));
    CHECK(v(0) == doctest::Approx(-v(2)).epsilon(1e-6));
  }
  SUBCASE("the leading term cancels: decay is faster than delta") {
    const double v8 = pulse_velocity_projection(fixtures::packed(2, 8.0, 160.0), fixtures::context(2, 8.0))(0);
    const double v10 =
        pulse_velocity_projection(fixtures::packed(2, 10.0, 160.0), fixtures::context(2, 10.0))(0);
    const double step = std::exp(kappa() * 2.0 * 1.001);
    CHECK(v8 < 0);
    CHECK(v10 < 0);
    CHECK(v8 / v10 > 1.3 * step);
    CHECK(v8 / v10 < 1.3 * step * step);
  }
}

TEST_CASE("equispaced Jacobian") {
  const ReducedModel m = ReducedModel::make(ring_context().pulse, 24.0, 6.0);
  const JacobianReport one = jacobian_at_equispaced(m, 1);
  CHECK(one.eigenvalues(0) == doctest::Approx(-one.gamma).epsilon(1e-15));
  for (int n = 1; n <= 6; ++n) {
    const JacobianReport j = jacobian_at_equispaced(m, n);
    CHECK((j.eigenvalues - j.analytic).cwiseAbs().maxCoeff() <= 1e-12 * j.gamma);
    CHECK(j.eigenvalues.maxCoeff() < 0);
  }
  const JacobianReport three = jacobian_at_equispaced(m, 3);
  const double r = std::sqrt(0.5);
  Vector expected(3);
  expected << -three.gamma * (1 + r), -three.gamma, -three.gamma * (1 - r);
  CHECK((three.eigenvalues - expected).cwiseAbs().maxCoeff() <= 1e-12 * three.gamma);

  // Differentiating the closed form with mirror shadows gives γ̂√α₋δ times
  // tridiag(1, −2, 1) with −3 in the corners.
  const Matrix fd = jacobian_numeric(m, PulseConfiguration::equispaced(3, 24.0).p);
  Matrix exact(3, 3);
  exact << -3, 1, 0, 1, -2, 1, 0, 1, -3;
  exact *= m.gamma_hat * kappa() * std::exp(-kappa() * 8.0);
  CHECK((fd - exact).norm() < 1e-6 * exact.norm());
}

TEST_CASE("gradient scaling alpha(s)") {
  const ManifoldContext ctx = fixtures::context(1, 8.0);
  const double a0 = alpha_scaling(0.0, ctx.pulse, ctx.grid);
  CHECK(std::abs(a0 / ctx.pulse.kernel_norm() - 1) < 1e-4);
  double prev = a0;
  for (int i = 1; i <= 10; ++i) {
    const double a = alpha_scaling(0.1 * i, ctx.pulse, ctx.grid);
    CHECK(a < prev);
    prev = a;
  }
  const double c = 0.5 * ctx.length();
  const Field bar = Field::from_function(ctx.grid, [&](double z) { return ctx.pulse.bar(z - c); });
  const double a1 = pi_v<double> / ctx.length() * norm(zero_mass_projection(bar), NormSpec::l2());
  CHECK(std::abs(prev / a1 - 1) < 0.05);
  CHECK(rate_scale(0.0, ctx.pulse, ctx.grid) == 1.0);
  CHECK(rate_scale(1.0, ctx.pulse, ctx.grid) == doctest::Approx(std::pow(a0 / prev, 2)));
}

TEST_CASE("reduced integration") {
  const ManifoldContext ctx = fixtures::context(2, 8.0);
  const ReducedModel m = ReducedModel::make(ctx.pulse, 160.0, 8.0);
  const Vector p0 = fixtures::packed(2, 8.0, 160.0).p;

  SUBCASE("s = 0 is the unscaled flow bitwise") {
    const ReducedModel m0 = m.scaled(rate_scale(0.0, ctx.pulse, ctx.grid));
    const ReducedTrajectory a = integrate_reduced(p0, 300.0, m);
    const ReducedTrajectory b = integrate_reduced(p0, 300.0, m0);
    REQUIRE(a.p.size() == b.p.size());
    bool same = true;
    for (std::size_t i = 0; i < a.p.size(); ++i) same = same && a.t[i] == b.t[i] && a.p[i] == b.p[i];
    CHECK(same);
  }
  SUBCASE("time rescaling maps s-trajectories onto s = 0") {
    const double T = 600.0;
    std::vector<double> tau;
    for (int k = 1; k <= 30; ++k) tau.push_back(T * k / 30);
    ReducedOptions o;
    o.output_times = tau;
    const ReducedTrajectory base = integrate_reduced(p0, T, m, o);
    for (double s : {0.5, 1.0}) {
      const double r = rate_scale(s, ctx.pulse, ctx.grid);
      ReducedOptions os;
      for (double t : tau) os.output_times.push_back(t / r);
      const ReducedTrajectory tr = integrate_reduced(p0, T / r, m.scaled(r), os);
      REQUIRE(tr.p.size() == base.p.size());
      double defect = 0;
      for (std::size_t i = 0; i < tr.p.size(); ++i)
        defect = std::max(defect, (tr.p[i] - base.p[i]).cwiseAbs().maxCoeff());
      CHECK(defect < 0.01 * 8.0);
    }
    CHECK(base.p.back()(1) - base.p.back()(0) > p0(1) - p0(0));
  }
  SUBCASE("relaxation to the equispaced state at the slowest linear rate") {
    const ReducedModel mr = ReducedModel::make(ctx.pulse, 24.0, 6.0);
    const Vector peq = PulseConfiguration::equispaced(3, 24.0).p;
    Vector start = peq;
    start << peq(0) + 0.3, peq(1) - 0.1, peq(2) + 0.2;
    ReducedOptions o;
    o.output_times = {200.0, 300.0};
    const ReducedTrajectory tr = integrate_reduced(start, 300.0, mr, o);
    REQUIRE(tr.p.size() == 3);
    const double rate = std::log((tr.p[1] - peq).norm() / (tr.p[2] - peq).norm()) / 100.0;
    const Vector lam = Eigen::SelfAdjointEigenSolver<Matrix>(jacobian_numeric(mr, peq)).eigenvalues();
    CHECK(std::abs(rate / -lam.maxCoeff() - 1) < 0.2);
  }
  SUBCASE("leaving the admissible set stops the run") {
    // Reversed time turns repulsion into attraction.
    Vector start = p0;
    start << p0(0) - 1.0, p0(1) + 1.0;
    const ReducedTrajectory tr = integrate_reduced(start, 1e4, m.scaled(-1.0));
    REQUIRE(tr.t_exit.has_value());
    CHECK(*tr.t_exit < 1e4);
    CHECK(!is_admissible(PulseConfiguration{tr.p.back()}, 160.0, 8.0));
  }
}

TEST_CASE("flow runs, trajectories and checkpoints") {
  const ManifoldContext ctx = ring_context();
  const PulseConfiguration eq = PulseConfiguration::equispaced(3, 24.0);
  const AnsatzProfile a = build_ansatz(eq, ctx);
  FlowStepper st(ctx.well, GradientFamily(0.0));
  RunOptions o;
  o.output_every = 10.0;
  o.checkpoint_path = (scratch_dir() / "run.ckpt").string();
  const FlowRun run = run_flow(st, ctx, st.start(perturbed(a.phi, 9, 4.0, 1e-4)), 100.0, o);
  REQUIRE(run.rows.size() == 11);
  CHECK(!run.t_exit);
  const double sqrt_delta = std::exp(-0.5 * kappa() * 8.0);
  double drift = 0;
  for (std::size_t i = 0; i < run.rows.size(); ++i) {
    drift = std::max(drift, (run.rows[i].p - eq.p).cwiseAbs().maxCoeff());
    if (i > 0) CHECK(run.rows[i].energy <= run.rows[i - 1].energy + 1e-10);
    CHECK(std::isfinite(run.rows[i].w_norm));
  }
  CHECK(drift < sqrt_delta);
  // w relaxes within t ≈ 10 onto the offset between Φ and the nearby
  // equilibrium and then stays flat.
  const double w_end = run.rows.back().w_norm;
  CHECK(std::abs(run.rows[run.rows.size() - 2].w_norm / w_end - 1) < 1e-3);

  const std::string csv = (scratch_dir() / "traj.csv").string();
  write_trajectory_csv(csv, run.rows);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,p_1,p_2,p_3,energy,mass,w_norm");

  // Restart from the last checkpoint reproduces the continued run.
  Checkpoint ck = read_checkpoint(o.checkpoint_path);
  CHECK(ck.state.u.values() == run.final_state.u.values());
  CHECK(ck.state.t == run.final_state.t);
  SimulationState cont = run.final_state;
  SimulationState restored = st.resume(std::move(ck.state));
  st.advance(cont, 110.0);
  st.advance(restored, 110.0);
  CHECK(cont.u.values() == restored.u.values());
}

TEST_CASE("packed pair separates under the full flow") {
  const ManifoldContext ctx = fixtures::context(2, 8.0, 48.0);
  const PulseConfiguration c = fixtures::packed(2, 8.0, 48.0);
  FlowStepper st(ctx.well, GradientFamily(0.0));
  SimulationState s = st.start(build_ansatz(c, ctx).phi);
  st.advance(s, 40.0);
  const Vector p = extract_pulse_positions(s.u, 2, ctx.pulse).p;
  CHECK(p(0) < c.p(0));
  CHECK(p(1) > c.p(1));
}
