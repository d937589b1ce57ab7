#include "fchlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "json.hpp"

namespace fchlab {

namespace {

double max_abs_d2w(const Field& u, const DoubleWell& well) {
  double m = 0;
  for (Index j = 0; j < u.size(); ++j) m = std::max(m, std::abs(well.d2W(u[j])));
  return m;
}

void record(SimulationState& s) {
  s.ring.push_back({s.t, s.dt, s.energy, mass(s.u, 0.0), s.dissipation});
  while (s.ring.size() > s.ring_capacity) s.ring.pop_front();
}

}  // namespace

FlowStepper::FlowStepper(DoubleWell well, GradientFamily family, StepperOptions opts)
    : well_(std::move(well)), family_(family), opts_(std::move(opts)) {
  if (opts_.stabilization > 0) kappa_ = opts_.stabilization;
}

SimulationState FlowStepper::start(const Field& u0) const {
  if (kappa_ < 0) kappa_ = 2.0 * std::pow(max_abs_d2w(u0, well_), 2);
  SimulationState s(u0);
  const double h = u0.grid().spacing();
  s.dt = opts_.dt0 > 0 ? opts_.dt0 : 0.1 * h * h;
  s.mass0 = mass(u0, 0.0);
  s.energy = energy(u0, well_);
  s.dissipation = dissipation(u0);
  s.stabilization = kappa_;
  record(s);
  return s;
}

SimulationState FlowStepper::resume(SimulationState s) const {
  if (kappa_ < 0) kappa_ = s.stabilization > 0 ? s.stabilization : 2.0 * std::pow(max_abs_d2w(s.u, well_), 2);
  s.energy = energy(s.u, well_);
  s.dissipation = dissipation(s.u);
  s.stabilization = kappa_;
  s.ring.clear();
  record(s);
  return s;
}

double FlowStepper::dissipation(const Field& u) const {
  const Field g = family_.apply(GradientOp::G1, variational_derivative(u, well_));
  return inner_product_x(g, g);
}

Field FlowStepper::trial(const Field& u, const Field& grad, double dt) const {
  const Grid& grid = u.grid();
  Vector f = grid.coefficients(grad.values());
  f(0) = 0.0;
  for (Index k = 1; k < f.size(); ++k) {
    const double g = family_.factor(k, GradientOp::G);
    const double k4 = std::pow(grid.wavenumber(k), 4);
    f(k) *= -dt * g / (1.0 + dt * g * (k4 + kappa_));
  }
  // Only the increment goes through the transform, so mode 0 of u is untouched.
  return u.with_values(u.values() + grid.values(f));
}

void FlowStepper::step(SimulationState& s) const {
  if (kappa_ < 0) kappa_ = 2.0 * std::pow(max_abs_d2w(s.u, well_), 2);
  const Field grad = variational_derivative(s.u, well_);
  while (true) {
    if (s.dt < opts_.dt_min) {
      if (!opts_.dump_path.empty()) {
        std::ofstream out(opts_.dump_path);
        out.precision(17);
        out << "z,u\n";
        for (Index j = 0; j < s.u.size(); ++j) out << s.u.grid().node(j) << ',' << s.u[j] << '\n';
      }
      throw Error(ErrorKind::Stiffness, "step size underflow at t = " + std::to_string(s.t) +
                                            (opts_.dump_path.empty() ? "" : ", state in " + opts_.dump_path));
    }
    Field next = trial(s.u, grad, s.dt);
    const double e = energy(next, well_);
    if (e <= s.energy + opts_.energy_slack || !opts_.adaptive) {
      s.u = std::move(next);
      s.t += s.dt;
      s.energy = e;
      s.dissipation = dissipation(s.u);
      ++s.accepted;
      record(s);
      if (opts_.adaptive && opts_.grow_after > 0 && s.accepted % opts_.grow_after == 0)
        s.dt = std::min(2.0 * s.dt, opts_.dt_max);
      return;
    }
    ++s.rejected;
    s.dt *= 0.5;
  }
}

void FlowStepper::advance(SimulationState& s, double t_end) const {
  const double snap = 1e-10 * std::max(1.0, std::abs(t_end));
  while (s.t < t_end) {
    const double keep = s.dt;
    const double remaining = t_end - s.t;
    if (remaining <= snap) {
      s.t = t_end;
      break;
    }
    const bool clipped = remaining < s.dt;
    if (clipped) s.dt = remaining;
    step(s);
    if (clipped && s.dt == remaining) s.dt = keep;
  }
}

PulseConfiguration extract_pulse_positions(const Field& u, int n_expected, double b_minus, double threshold) {
  const Grid& g = u.grid();
  const Vector& v = u.values();
  const double h = g.spacing();
  std::vector<double> found;
  for (Index j = 1; j + 1 < v.size(); ++j) {
    if (v(j) - b_minus <= threshold || v(j) < v(j - 1) || v(j) <= v(j + 1)) continue;
    const double curv = v(j - 1) - 2 * v(j) + v(j + 1);
    const double off = curv < 0 ? 0.5 * (v(j - 1) - v(j + 1)) / curv : 0.0;
    found.push_back(g.node(j) + h * off);
  }
  if (static_cast<int>(found.size()) != n_expected)
    throw Error(ErrorKind::Extraction, "expected " + std::to_string(n_expected) + " pulses, found " +
                                           std::to_string(found.size()));
  PulseConfiguration c;
  c.p = Eigen::Map<const Vector>(found.data(), static_cast<Index>(found.size()));
  return c;
}

PulseConfiguration extract_pulse_positions(const Field& u, int n_expected, const PulseProfile& pulse) {
  return extract_pulse_positions(u, n_expected, pulse.well().b_minus(), 0.5 * pulse.amplitude());
}

FlowRun run_flow(const FlowStepper& stepper, const ManifoldContext& ctx, SimulationState state, double T,
                 const RunOptions& opts) {
  const int n = ctx.params.n_pulses;
  const double ell = ctx.params.min_spacing;
  // w is measured against the ansatz with the spacing floor relaxed to ℓ/2.
  SystemParams relaxed = ctx.params;
  relaxed.min_spacing = 0.5 * ell;
  relaxed.tail_scale = std::exp(-ctx.kappa() * relaxed.min_spacing);
  const ManifoldContext loose = ctx.with_params(relaxed);

  FlowRun run{{}, std::nullopt, state};
  auto observe = [&](const SimulationState& s) {
    TrajectoryRow row;
    row.t = s.t;
    row.p = extract_pulse_positions(s.u, n, ctx.pulse).p;
    row.energy = s.energy;
    row.mass = mass(s.u, 0.0);
    const PulseConfiguration c{row.p};
    const bool collided = !is_admissible(c, ctx.length(), 0.5 * ell);
    if (opts.w_norm && !collided)
      row.w_norm = norm(s.u - build_ansatz(c, loose).phi, NormSpec::h4());
    else
      row.w_norm = std::numeric_limits<double>::quiet_NaN();
    run.rows.push_back(std::move(row));
    if (!opts.checkpoint_path.empty()) write_checkpoint(opts.checkpoint_path, s, stepper.family().s());
    return collided;
  };
  if (observe(run.final_state)) {
    run.t_exit = run.final_state.t;
    return run;
  }
  const double every = opts.output_every > 0 ? opts.output_every : T;
  for (long k = 1; run.final_state.t < T; ++k) {
    stepper.advance(run.final_state, std::min(T, static_cast<double>(k) * every));
    if (observe(run.final_state)) {
      run.t_exit = run.final_state.t;
      break;
    }
  }
  return run;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path);
  out.precision(17);
  const Index n = rows.empty() ? 0 : rows.front().p.size();
  out << "t";
  for (Index i = 1; i <= n; ++i) out << ",p_" << i;
  out << ",energy,mass,w_norm\n";
  for (const auto& r : rows) {
    out << r.t;
    for (Index i = 0; i < r.p.size(); ++i) out << ',' << r.p(i);
    out << ',' << r.energy << ',' << r.mass << ',' << r.w_norm << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

void write_checkpoint(const std::string& path, const SimulationState& s, double gradient_s,
                      const std::string& extra_json) {
  nlohmann::json h;
  h["length"] = s.u.grid().length();
  h["points"] = s.u.size();
  h["t"] = s.t;
  h["dt"] = s.dt;
  h["mass0"] = s.mass0;
  h["s"] = gradient_s;
  h["stabilization"] = s.stabilization;
  h["accepted"] = s.accepted;
  h["extra"] = nlohmann::json::parse(extra_json);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp);
    out << h.dump() << '\n';
    out.write(reinterpret_cast<const char*>(s.u.values().data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(s.u.size())));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error(ErrorKind::Io, "cannot rename " + tmp);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "bad checkpoint header in " + path + ": " + e.what());
  }
  const Index n = h.at("points").get<Index>();
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
  if (!in) throw Error(ErrorKind::Io, "truncated checkpoint " + path);
  const GridPtr g = Grid::make(h.at("length").get<double>(), n);
  Checkpoint c{SimulationState(Field(g, std::move(v))), h.at("s").get<double>(), line};
  c.state.t = h.at("t").get<double>();
  c.state.dt = h.at("dt").get<double>();
  c.state.mass0 = h.at("mass0").get<double>();
  c.state.stabilization = h.value("stabilization", 0.0);
  c.state.accepted = h.value("accepted", 0L);
  return c;
}

ReducedModel ReducedModel::make(const PulseProfile& pulse, double length, double ell) {
  ReducedModel m;
  const double a = pulse.well().alpha_minus();
  m.gamma_hat = 2 * a * pulse.phi_max() * pulse.phi_max() / std::pow(pulse.kernel_norm(), 2);
  m.kappa = pulse.decay_rate();
  m.length = length;
  m.ell = ell;
  return m;
}

ReducedModel ReducedModel::scaled(double s_rate) const {
  ReducedModel m = *this;
  m.rate_scale = s_rate;
  return m;
}

Vector ReducedModel::velocity(const Vector& p) const {
  const Index n = p.size();
  Vector v(n);
  // Mirror shadows: the outer gaps are 2p₁ and 2(L − p_n).
  auto gap = [&](Index i) { return i == 0 ? 2 * p(0) : i == n ? 2 * (length - p(n - 1)) : p(i) - p(i - 1); };
  for (Index i = 0; i < n; ++i)
    v(i) = -rate_scale * gamma_hat * (std::exp(-kappa * gap(i + 1)) - std::exp(-kappa * gap(i)));
  return v;
}

Vector pulse_velocity(const PulseConfiguration& p, const ReducedModel& m) {
  require_admissible(p, m.length, m.ell);
  return m.velocity(p.p);
}

Vector pulse_velocity_projection(const PulseConfiguration& p, const ManifoldContext& ctx,
                                 const GradientFamily& family) {
  const AnsatzProfile a = build_ansatz(p, ctx);
  const Field r = flow_field(a.phi, ctx.well);
  const std::vector<Field> t = tangent_basis(p, ctx);
  const Index n = p.size();
  std::vector<Field> w;
  for (const Field& ti : t)
    w.push_back(family.s() == 0.0 ? ti : family.apply(GradientOp::G1Inv, zero_mass_projection(ti)));
  Matrix gram(n, n);
  Vector rhs(n);
  for (Index i = 0; i < n; ++i) {
    rhs(i) = inner_product_x(r, t[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < n; ++j)
      gram(i, j) = inner_product_x(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(j)]);
  }
  return gram.ldlt().solve(rhs);
}

JacobianReport jacobian_at_equispaced(const ReducedModel& m, int n) {
  JacobianReport r;
  const double delta = std::exp(-m.kappa * m.length / n);
  r.gamma = m.rate_scale * m.gamma_hat * delta;
  r.matrix = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    r.matrix(i, i) = -r.gamma;
    if (i + 1 < n) r.matrix(i, i + 1) = r.matrix(i + 1, i) = 0.5 * r.gamma;
  }
  r.eigenvalues = Eigen::SelfAdjointEigenSolver<Matrix>(r.matrix, Eigen::EigenvaluesOnly).eigenvalues();
  r.analytic.resize(n);
  for (int k = 1; k <= n; ++k) r.analytic(k - 1) = -r.gamma * (1 + std::cos(k * pi_v<double> / (n + 1)));
  std::sort(r.analytic.begin(), r.analytic.end());
  return r;
}

Matrix jacobian_numeric(const ReducedModel& m, const Vector& p, double step) {
  const Index n = p.size();
  Matrix jac(n, n);
  for (Index j = 0; j < n; ++j) {
    Vector a = p, b = p;
    a(j) += step;
    b(j) -= step;
    jac.col(j) = (m.velocity(a) - m.velocity(b)) / (2 * step);
  }
  return jac;
}

double alpha_scaling(double s, const PulseProfile& pulse, GridPtr grid) {
  const double c = 0.5 * grid->length();
  const Field d = Field::from_function(grid, [&](double z) { return pulse.derivatives(z - c)[1]; });
  return norm(GradientFamily(s).apply(GradientOp::G1Inv, zero_mass_projection(d)), NormSpec::l2());
}

double rate_scale(double s, const PulseProfile& pulse, GridPtr grid) {
  if (s == 0.0) return 1.0;
  return std::pow(alpha_scaling(0.0, pulse, grid) / alpha_scaling(s, pulse, grid), 2);
}

namespace {

// Dormand–Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

ReducedTrajectory integrate_reduced(const Vector& p0, double T, const ReducedModel& m,
                                    const ReducedOptions& opts) {
  PulseConfiguration cfg{p0};
  require_admissible(cfg, m.length, m.ell);
  ReducedTrajectory out;
  out.t.push_back(0.0);
  out.p.push_back(p0);

  std::vector<double> marks = opts.output_times;
  std::sort(marks.begin(), marks.end());
  marks.erase(std::remove_if(marks.begin(), marks.end(), [&](double x) { return x <= 0 || x > T; }),
              marks.end());
  if (marks.empty() || marks.back() < T) marks.push_back(T);
  const bool every = opts.output_times.empty();
  std::size_t next = 0;

  auto f = [&](const Vector& y) { return m.velocity(y); };
  Vector y = p0;
  Vector k1 = f(y);
  double t = 0;
  double h = opts.h0;
  if (!(h > 0)) {
    const double vmax = k1.cwiseAbs().maxCoeff();
    h = vmax > 0 ? std::min(T, 1e-3 * m.ell / vmax) : T;
  }
  while (next < marks.size()) {
    const double target = marks[next];
    bool hit = false;
    double step = h;
    if (t + step >= target) {
      step = target - t;
      hit = true;
    }
    const Vector k2 = f(y + step * a21 * k1);
    const Vector k3 = f(y + step * (a31 * k1 + a32 * k2));
    const Vector k4 = f(y + step * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector y5 = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(y5);
    const Vector err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0;
    for (Index i = 0; i < y.size(); ++i) {
      const double sc = opts.atol + opts.rtol * std::max(std::abs(y(i)), std::abs(y5(i)));
      en = std::max(en, std::abs(err(i)) / sc);
    }
    const double grow = en > 0 ? 0.9 * std::pow(en, -0.2) : 5.0;
    if (en > 1.0) {
      h = step * std::max(0.2, grow);
      continue;
    }
    ++out.steps;
    t = hit ? target : t + step;
    y = y5;
    k1 = k7;
    if (!hit) h = step * std::min(5.0, grow);
    if (hit) ++next;
    if (every || hit) {
      out.t.push_back(t);
      out.p.push_back(y);
    }
    if (!is_admissible(PulseConfiguration{y}, m.length, m.ell)) {
      if (!every && !hit) {
        out.t.push_back(t);
        out.p.push_back(y);
      }
      out.t_exit = t;
      break;
    }
  }
  return out;
}

}  // namespace fchlab
