#include "fchlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "fchlab/dynamics.hpp"
#include "fchlab/operators.hpp"
#include "fchlab/spectral.hpp"
#include "json.hpp"

#ifndef FCHLAB_VERSION
#define FCHLAB_VERSION "0.0.0"
#endif

namespace fchlab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string fchlab_version() { return FCHLAB_VERSION; }

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename T>
T take(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "key '" + key + "': " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["tau"] = c.tau;
  if (c.roots) j["roots"] = *c.roots;
  j["epsilon"] = c.epsilon;
  j["domain_d"] = c.domain_d;
  j["n_pulses"] = c.n_pulses;
  j["min_spacing"] = c.min_spacing;
  j["mass_excess_per_delta"] = c.mass_excess_per_delta;
  j["gradient_s"] = c.gradient_s;
  if (c.rho) j["rho"] = *c.rho;
  j["grid_points"] = c.grid_points;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["plot_data"] = c.plot_data;
  j["s_list"] = c.s_list;
  j["samples"] = c.samples;
  j["p0"] = c.p0;
  j["equispaced"] = c.equispaced;
  j["perturbation"] = c.perturbation;
  j["t_end"] = c.t_end;
  j["output_every"] = c.output_every;
  j["dt_max"] = c.dt_max;
  j["restart"] = c.restart;
  return j;
}

DoubleWell make_well(const ExperimentConfig& c) {
  if (c.roots) return DoubleWell::three_root((*c.roots)[0], (*c.roots)[1], (*c.roots)[2]);
  return default_well(c.tau);
}

SystemParams params_for(const ExperimentConfig& c, const DoubleWell& well, double s, double mass) {
  return make_system_params(c.epsilon, c.domain_d, c.n_pulses, mass, c.min_spacing, s, well.alpha_minus(),
                            c.rho);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  const json known = to_json(ExperimentConfig{});
  static const std::set<std::string> optional_keys = {"roots", "rho"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key) && !optional_keys.count(key))
      throw Error(ErrorKind::Config, "unknown key '" + key + "'");

  ExperimentConfig c;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = take<std::decay_t<decltype(field)>>(j, key);
  };
  opt("experiment", c.experiment);
  opt("tau", c.tau);
  if (j.contains("roots")) c.roots = take<std::array<double, 3>>(j, "roots");
  opt("epsilon", c.epsilon);
  opt("domain_d", c.domain_d);
  opt("n_pulses", c.n_pulses);
  opt("min_spacing", c.min_spacing);
  opt("mass_excess_per_delta", c.mass_excess_per_delta);
  opt("gradient_s", c.gradient_s);
  if (j.contains("rho")) c.rho = take<double>(j, "rho");
  opt("grid_points", c.grid_points);
  opt("output_dir", c.output_dir);
  opt("seed", c.seed);
  opt("plot_data", c.plot_data);
  opt("s_list", c.s_list);
  opt("samples", c.samples);
  opt("p0", c.p0);
  opt("equispaced", c.equispaced);
  opt("perturbation", c.perturbation);
  opt("t_end", c.t_end);
  opt("output_every", c.output_every);
  opt("dt_max", c.dt_max);
  opt("restart", c.restart);
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2); }

void validate(const ExperimentConfig& c) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    throw Error(ErrorKind::Validation, "unknown experiment '" + c.experiment + "'");
  const DoubleWell well = make_well(c);
  const SystemParams p = params_for(c, well, c.gradient_s, 0.0);
  const double L = p.length();
  if (c.grid_points != 0) {
    if (c.grid_points < 16) throw Error(ErrorKind::Validation, "grid_points must be 0 or at least 16");
    if (L / (c.grid_points - 1) > 0.1 * (1 + 1e-12))
      throw Error(ErrorKind::Validation, "grid_points too small: spacing d/(epsilon(N-1)) must be <= 0.1");
  }
  if (!(c.mass_excess_per_delta > 0)) throw Error(ErrorKind::Validation, "mass_excess_per_delta must be positive");
  for (double s : c.s_list)
    if (!(s >= 0 && s <= 1)) throw Error(ErrorKind::Validation, "s_list entries must lie in [0,1]");
  if (c.samples < 1) throw Error(ErrorKind::Validation, "samples must be at least 1");
  if (!(c.t_end > 0 && c.output_every > 0 && c.dt_max > 0))
    throw Error(ErrorKind::Validation, "t_end, output_every and dt_max must be positive");
  if (!(c.perturbation >= 0)) throw Error(ErrorKind::Validation, "perturbation must be non-negative");
  if (!c.p0.empty()) {
    if (static_cast<int>(c.p0.size()) != c.n_pulses)
      throw Error(ErrorKind::Validation, "p0 must list n_pulses positions");
    PulseConfiguration pc;
    pc.p = Eigen::Map<const Vector>(c.p0.data(), static_cast<Index>(c.p0.size()));
    if (!is_admissible(pc, L, c.min_spacing))
      throw Error(ErrorKind::Validation, "p0 is not admissible: gaps (shadow gaps included) must be >= min_spacing");
  }
}

ManifoldContext make_context(const ExperimentConfig& c, std::optional<double> s) {
  const DoubleWell well = make_well(c);
  const double gs = s.value_or(c.gradient_s);
  const SystemParams p0 = params_for(c, well, gs, 0.0);
  const GridPtr grid = c.grid_points > 0 ? Grid::make(p0.length(), c.grid_points) : nullptr;
  const ManifoldContext base = ManifoldContext::make(well, p0, grid);
  const double mass = total_mass_for(c.n_pulses, base.pulse, c.mass_excess_per_delta * p0.tail_scale);
  return base.with_params(params_for(c, well, gs, mass));
}

PulseConfiguration initial_configuration(const ExperimentConfig& c, double length) {
  PulseConfiguration pc;
  if (!c.p0.empty()) {
    pc.p = Eigen::Map<const Vector>(c.p0.data(), static_cast<Index>(c.p0.size()));
  } else if (c.equispaced) {
    pc = PulseConfiguration::equispaced(c.n_pulses, length);
  } else {
    pc.p.resize(c.n_pulses);
    for (int i = 0; i < c.n_pulses; ++i)
      pc.p(i) = 0.5 * length + (i - 0.5 * (c.n_pulses - 1)) * c.min_spacing * 1.001;
  }
  return pc;
}

bool RunManifest::pass() const {
  if (!failures.empty()) return false;
  for (const auto& [_, ok] : checks)
    if (!ok) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Output plumbing

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Collects the files of one run; everything is relative to the output dir.
class Run {
 public:
  Run(const ExperimentConfig& c) : cfg_(c), dir_(c.output_dir) {
    fs::create_directories(dir_);
    fs::remove(dir_ / "manifest.json");
    m_.experiment = c.experiment;
    m_.config_hash = fnv1a(serialize_config(c));
    m_.version = fchlab_version();
    m_.started = utc_now();
  }

  RunManifest& manifest() { return m_; }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path(name));
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << num(r[i]);
      out << '\n';
    }
    done(name, out);
  }

  void text(const std::string& name, const std::string& body) {
    std::ofstream out(path(name));
    out << body;
    done(name, out);
  }

  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  // gnuplot-ready "x y" columns, only with plot_data.
  void plot(const std::string& name, const std::vector<double>& x, const std::vector<double>& y) {
    if (!cfg_.plot_data) return;
    std::ofstream out(path(name));
    for (std::size_t i = 0; i < x.size(); ++i) out << num(x[i]) << ' ' << num(y[i]) << '\n';
    done(name, out);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void add_file(const std::string& name) { m_.files.push_back(name); }

  RunManifest finish() {
    m_.finished = utc_now();
    json j;
    j["experiment"] = m_.experiment;
    j["config_hash"] = m_.config_hash;
    j["version"] = m_.version;
    j["started"] = m_.started;
    j["finished"] = m_.finished;
    j["files"] = m_.files;
    j["checks"] = m_.checks;
    j["failures"] = m_.failures;
    j["pass"] = m_.pass();
    j["config"] = to_json(cfg_);
    const fs::path tmp = dir_ / "manifest.json.tmp";
    {
      std::ofstream out(tmp);
      out << j.dump(2) << '\n';
      if (!out) throw Error(ErrorKind::Io, "cannot write manifest in " + dir_.string());
    }
    fs::rename(tmp, dir_ / "manifest.json");
    return m_;
  }

 private:
  void done(const std::string& name, std::ofstream& out) {
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path(name));
    m_.files.push_back(name);
  }

  const ExperimentConfig& cfg_;
  fs::path dir_;
  RunManifest m_;
};

Field zero_mass_noise(GridPtr g, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector a = Vector::Zero(g->size());
  for (Index k = 1; k < a.size(); ++k) a(k) = normal(rng) * std::exp(-g->wavenumber(k));
  Vector v = g->values(a);
  const double sup = v.cwiseAbs().maxCoeff();
  if (sup > 0) v *= amplitude / sup;
  return Field(g, v);
}

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<std::string> p_columns(const std::string& prefix, Index n) {
  std::vector<std::string> h;
  for (Index i = 1; i <= n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

// Least-squares slope of y over x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den != 0 ? (n * sxy - sx * sy) / den : 0.0;
}

std::string s_tag(double s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiments

RunManifest experiment_profile(const ExperimentConfig& c) {
  Run run(c);
  const DoubleWell well = make_well(c);
  const PulseProfile p = solve_homoclinic(well);
  const FarField ff = far_field_params(p);
  const double sa = std::sqrt(well.alpha_minus());

  std::vector<std::vector<double>> rows;
  std::vector<double> zs, phis;
  double first_integral = 0;
  const double zmax = p.half_width();
  for (double z = -zmax; z <= zmax + 1e-12; z += 1.0 / 16) {
    const auto d = p.derivatives(z);
    rows.push_back({z, p.value(z), d[1], d[2]});
    zs.push_back(z);
    phis.push_back(p.value(z));
    first_integral = std::max(first_integral, std::abs(0.5 * d[1] * d[1] - well.W(p.value(z))));
  }
  run.csv("profile.csv", {"z", "phi", "dphi", "d2phi"}, rows);
  run.plot("profile.dat", zs, phis);

  json j;
  j["well"] = well.describe();
  j["alpha_minus"] = well.alpha_minus();
  j["amplitude"] = p.amplitude();
  j["phi_max"] = p.phi_max();
  j["decay_rate"] = p.decay_rate();
  j["fitted_decay_rate"] = ff.decay_rate;
  j["fitted_phi_max"] = ff.phi_max;
  j["pulse_mass"] = p.mass();
  j["kernel_norm"] = p.kernel_norm();
  j["residual"] = p.residual();
  j["first_integral_defect"] = first_integral;
  auto& m = run.manifest();
  m.checks["residual"] = p.residual() < 1e-8;
  m.checks["first_integral"] = first_integral < 1e-8;
  m.checks["decay_rate"] = std::abs(ff.decay_rate / sa - 1) < 1e-4;
  for (int order : {1, 2}) {
    try {
      const BackgroundProfile b = solve_background(well, p, order);
      const double exact = std::pow(-well.alpha_minus(), -order);
      j["background"][std::to_string(order)] = {{"measured", b.measured_constant()}, {"exact", exact}};
      m.checks["background_" + std::to_string(order)] = std::abs(b.measured_constant() - exact) < 1e-6;
    } catch (const Error& e) {
      m.failures.push_back(std::string("background: ") + e.what());
    }
  }
  run.json_file("profile.json", j);
  return run.finish();
}

RunManifest experiment_ansatz(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  const double delta = ctx.delta();
  const auto sample = sample_configurations(ctx, c.samples, c.seed);
  std::vector<std::vector<double>> rows;
  bool closed = true, lambda_ok = true;
  for (std::size_t id = 0; id < sample.size(); ++id) {
    try {
      const AnsatzProfile a = build_ansatz(sample[id], ctx);
      const auto& in = a.internal;
      double bc = 0;
      for (double r : in.bc_residuals) bc = std::max(bc, std::abs(r));
      const double res = residual_norm(a, ctx);
      std::vector<double> row{static_cast<double>(id)};
      for (Index i = 0; i < sample[id].size(); ++i) row.push_back(sample[id].p(i));
      row.insert(row.end(), {in.lambda, in.lambda_seed, bc, in.mass_error, res, res / delta});
      rows.push_back(row);
      closed = closed && bc < 1e-8 && in.mass_error < 1e-10;
      const double ratio = in.lambda / in.lambda_seed;
      lambda_ok = lambda_ok && ratio <= 1 + 10 * delta && ratio >= 1 / (1 + 10 * delta);
      if (id == 0) {
        std::vector<std::vector<double>> f;
        for (Index k = 0; k < a.phi.size(); ++k) f.push_back({ctx.grid->node(k), a.phi[k]});
        run.csv("ansatz_field.csv", {"z", "phi"}, f);
        run.plot("ansatz_field.dat", to_std(ctx.grid->nodes()), to_std(a.phi.values()));
      }
    } catch (const Error& e) {
      run.manifest().failures.push_back("config " + std::to_string(id) + ": " + e.what());
    }
  }
  std::vector<std::string> h{"config_id"};
  for (const auto& s : p_columns("p_", c.n_pulses)) h.push_back(s);
  h.insert(h.end(), {"lambda", "lambda_seed", "bc_residual", "mass_error", "residual_h4", "residual_over_delta"});
  run.csv("ansatz.csv", h, rows);
  run.manifest().checks["closure"] = closed;
  run.manifest().checks["lambda_seed"] = lambda_ok;
  return run.finish();
}

RunManifest experiment_spectrum(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  const PulseSpectrum single = single_pulse_spectrum(ctx.pulse);
  std::vector<std::vector<double>> srows;
  for (std::size_t i = 0; i < single.point.size(); ++i) srows.push_back({static_cast<double>(i), single.point[i]});
  run.csv("single_pulse_spectrum.csv", {"index", "eigenvalue"}, srows);

  const PulseConfiguration p = initial_configuration(c, ctx.length());
  const AnsatzProfile a = build_ansatz(p, ctx);
  const SpectrumReport r = spectral_gap_report(a, ctx, single);
  std::vector<std::vector<double>> rows;
  std::vector<double> idx;
  for (Index i = 0; i < r.eigenvalues.size(); ++i) {
    rows.push_back({static_cast<double>(i), r.eigenvalues(i), r.residuals(i), i < r.slow_dimension ? 1.0 : 0.0});
    idx.push_back(static_cast<double>(i));
  }
  run.csv("gap_spectrum.csv", {"index", "eigenvalue", "residual", "slow"}, rows);
  run.plot("gap_spectrum.dat", idx, to_std(r.eigenvalues));
  json j;
  j["k_s"] = single.k_s();
  j["k_s_full"] = single.k_s_full();
  j["alpha_minus_sq"] = single.alpha_minus * single.alpha_minus;
  j["slow_dimension"] = r.slow_dimension;
  j["slow_constant"] = r.slow_constant;
  j["stable_edge"] = r.stable_edge;
  j["delta"] = r.delta;
  j["note"] = r.note;
  run.json_file("spectrum.json", j);
  run.manifest().checks["slow_count"] = r.slow_dimension == c.n_pulses;
  run.manifest().checks["gap"] = r.pass;
  return run.finish();
}

RunManifest experiment_diagnose(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  const double delta = ctx.delta();
  const PulseSpectrum single = single_pulse_spectrum(ctx.pulse);
  std::vector<PulseConfiguration> sample = sample_configurations(ctx, c.samples - 1, c.seed);
  std::vector<HypothesisRecord> rec;
  std::vector<PulseConfiguration> built;
  int id = 0;
  for (const auto& cfg : sample) {
    try {
      const AnsatzProfile a = build_ansatz(cfg, ctx);
      built.push_back(cfg);
      const double r0 = residual_norm(a, ctx);
      rec.push_back({"H0", id, r0 / delta, 1 / delta, r0 < 1.0, "C0 = |Pi0 grad J|_H4 / delta; pass if C0*delta < 1"});
      const SpectrumReport g = spectral_gap_report(a, ctx, single);
      rec.push_back({"H1", id, g.slow_constant, single.k_s() / (2 * delta), g.pass,
                     "c0 = max slow |lambda|/delta; slow count " + std::to_string(g.slow_dimension) +
                         (g.note.empty() ? "" : "; " + g.note)});
      const auto t = tangent_basis(cfg, ctx);
      // Skip fast unstable modes below the slow band.
      Index first = 0;
      while (first < g.eigenvalues.size() && g.eigenvalues(first) <= -0.5 * single.k_s()) ++first;
      const Index count = std::min<Index>(g.slow_dimension, cfg.size());
      const std::vector<Field> slow(g.eigenfields.begin() + first, g.eigenfields.begin() + first + count);
      if (static_cast<Index>(slow.size()) == cfg.size()) {
        const Alignment al = tangent_alignment(slow, t);
        rec.push_back({"H3", id, al.error / delta, 1 / delta, al.error < 1.0, "C3 = alignment error / delta"});
      } else {
        rec.push_back({"H3", id, NAN, 1 / delta, false, "slow space has the wrong dimension"});
      }
      const Coercivity co = coercivity_constant(a, ctx, t, single.k_s());
      rec.push_back({"H2", id, co.h4.mu, 0.0, co.h4.mu > 0, "normal coercivity in H4"});
      rec.push_back({"EA", id, co.h4.mu, co.h4.bound, co.h4.pass, "mu >= mu~ mu_e/(mu~ + gamma_e) in H4"});
      rec.push_back({"EA_h2", id, co.h2.mu, co.h2.bound, co.h2.pass, "same in the form domain H2"});
      for (double s : c.s_list) {
        if (s == 0) continue;
        const SymmetrizedGap sg = symmetrized_gap(a, ctx, GradientFamily(s), t);
        rec.push_back({"SRN_s" + s_tag(s), id, sg.slow_constant, sg.gap_ratio, sg.pass,
                       "constant = max slow |lambda|/delta_G; threshold column holds the gap ratio"});
      }
    } catch (const Error& e) {
      rec.push_back({"ansatz", id, NAN, NAN, false, e.what()});
      rec.push_back({"H1", id, NAN, NAN, false, "not evaluated"});
    }
    ++id;
  }
  json j;
  if (!built.empty()) {
    try {
      ElInputs in;
      const DiagnosticsReport el = el_bounds(built, ctx, single, in);
      for (const auto& r : el.records)
        if (r.hypothesis.rfind("EL", 0) == 0) rec.push_back(r);
      j["el"] = {{"delta0", el.delta0},
                 {"h4", {{"delta2", el.h4.delta2}, {"mu2", el.h4.mu2}, {"c2", el.h4.c2},
                         {"eta_lower", el.h4.eta_lower}, {"eta_upper", el.h4.eta_upper}}},
                 {"h2", {{"delta2", el.h2.delta2}, {"mu2", el.h2.mu2}, {"c2", el.h2.c2},
                         {"eta_lower", el.h2.eta_lower}, {"eta_upper", el.h2.eta_upper}}},
                 {"substitution", el.substitution_note}};
    } catch (const Error& e) {
      rec.push_back({"EL_h4", -1, NAN, NAN, false, e.what()});
    }
  }
  std::ostringstream csv;
  csv << "hypothesis,config_id,constant,threshold,pass,note\n";
  for (const auto& r : rec) {
    std::string note = r.note;
    std::replace(note.begin(), note.end(), '"', '\'');
    csv << r.hypothesis << ',' << r.config_id << ',' << num(r.constant) << ',' << num(r.threshold) << ','
        << (r.pass ? 1 : 0) << ",\"" << note << "\"\n";
    j["records"].push_back({{"hypothesis", r.hypothesis}, {"config_id", r.config_id},
                            {"constant", std::isfinite(r.constant) ? json(r.constant) : json(nullptr)},
                            {"threshold", std::isfinite(r.threshold) ? json(r.threshold) : json(nullptr)},
                            {"pass", r.pass}, {"note", r.note}});
  }
  // One flag per hypothesis: all of its records pass.
  for (const auto& r : rec) {
    auto it = run.manifest().checks.find(r.hypothesis);
    if (it == run.manifest().checks.end()) run.manifest().checks[r.hypothesis] = r.pass;
    else it->second = it->second && r.pass;
  }
  j["delta"] = delta;
  j["k_s"] = single.k_s();
  run.text("diagnose.csv", csv.str());
  run.json_file("diagnose.json", j);
  return run.finish();
}

namespace {

Field initial_field(const ExperimentConfig& c, const ManifoldContext& ctx, const PulseConfiguration& p) {
  Field u = build_ansatz(p, ctx).phi;
  if (c.perturbation > 0) u = u + zero_mass_noise(ctx.grid, c.seed, c.perturbation);
  return u;
}

std::vector<std::vector<double>> trajectory_rows(const std::vector<TrajectoryRow>& rows) {
  std::vector<std::vector<double>> out;
  for (const auto& r : rows) {
    std::vector<double> v{r.t};
    for (Index i = 0; i < r.p.size(); ++i) v.push_back(r.p(i));
    v.insert(v.end(), {r.energy, r.mass, r.w_norm});
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> trajectory_header(int n) {
  std::vector<std::string> h{"t"};
  for (const auto& s : p_columns("p_", n)) h.push_back(s);
  h.insert(h.end(), {"energy", "mass", "w_norm"});
  return h;
}

struct PdeResult {
  FlowRun run;
  bool monotone = true;
  double mass_drift = 0;
};

PdeResult pde_run(const ExperimentConfig& c, const ManifoldContext& ctx, Run& out, const std::string& ckpt) {
  StepperOptions so;
  so.dt_max = c.dt_max;
  so.dump_path = out.path("stiffness_dump.csv");
  const FlowStepper st(ctx.well, GradientFamily(ctx.params.gradient_s), so);
  SimulationState s0 = [&] {
    if (!c.restart.empty()) return st.resume(read_checkpoint(c.restart).state);
    return st.start(initial_field(c, ctx, initial_configuration(c, ctx.length())));
  }();
  RunOptions ro;
  ro.output_every = c.output_every;
  ro.checkpoint_path = ckpt.empty() ? "" : out.path(ckpt);
  PdeResult r{run_flow(st, ctx, std::move(s0), c.t_end, ro)};
  if (!ckpt.empty()) out.add_file(ckpt);
  for (std::size_t i = 1; i < r.run.rows.size(); ++i)
    r.monotone = r.monotone && r.run.rows[i].energy <= r.run.rows[i - 1].energy + 1e-10;
  const double m0 = r.run.final_state.mass0;
  r.mass_drift = std::abs(mass(r.run.final_state.u, 0.0) - m0) / std::abs(m0);
  return r;
}

}  // namespace

RunManifest experiment_simulate(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  const PdeResult r = pde_run(c, ctx, run, "checkpoint.bin");
  run.csv("trajectory.csv", trajectory_header(c.n_pulses), trajectory_rows(r.run.rows));
  if (c.plot_data) {
    std::vector<double> t, e;
    for (const auto& row : r.run.rows) {
      t.push_back(row.t);
      e.push_back(row.energy);
    }
    run.plot("energy.dat", t, e);
  }
  json j;
  j["t_final"] = r.run.final_state.t;
  j["t_exit"] = r.run.t_exit ? json(*r.run.t_exit) : json(nullptr);
  j["accepted_steps"] = r.run.final_state.accepted;
  j["rejected_steps"] = r.run.final_state.rejected;
  j["stabilization"] = r.run.final_state.stabilization;
  j["mass_drift"] = r.mass_drift;
  run.json_file("simulate.json", j);
  run.manifest().checks["energy_monotone"] = r.monotone;
  run.manifest().checks["mass_conserved"] = r.mass_drift < 1e-9;
  run.manifest().checks["no_collision"] = !r.run.t_exit;
  return run.finish();
}

namespace {

ReducedTrajectory reduced_run(const ExperimentConfig& c, const ManifoldContext& ctx, double s, double& scale) {
  scale = rate_scale(s, ctx.pulse, ctx.grid);
  const ReducedModel m = ReducedModel::make(ctx.pulse, ctx.length(), c.min_spacing).scaled(scale);
  ReducedOptions o;
  for (double t = c.output_every; t < c.t_end + 1e-9 * c.t_end; t += c.output_every) o.output_times.push_back(t);
  return integrate_reduced(initial_configuration(c, ctx.length()).p, c.t_end, m, o);
}

std::vector<std::vector<double>> reduced_rows(const ReducedTrajectory& tr, double time_factor = 1.0) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    std::vector<double> r{tr.t[i] * time_factor};
    for (Index k = 0; k < tr.p[i].size(); ++k) r.push_back(tr.p[i](k));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

RunManifest experiment_reduce(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  double scale = 1;
  const ReducedTrajectory tr = reduced_run(c, ctx, c.gradient_s, scale);
  std::vector<std::string> h{"t"};
  for (const auto& s : p_columns("p_", c.n_pulses)) h.push_back(s);
  run.csv("reduced.csv", h, reduced_rows(tr));
  json j;
  j["rate_scale"] = scale;
  j["steps"] = tr.steps;
  j["t_exit"] = tr.t_exit ? json(*tr.t_exit) : json(nullptr);
  run.json_file("reduce.json", j);
  run.manifest().checks["no_exit"] = !tr.t_exit;
  return run.finish();
}

RunManifest experiment_compare(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  const double s = c.gradient_s;
  const int n = c.n_pulses;
  const PdeResult pde = pde_run(c, ctx, run, "");
  double scale = 1;
  const ReducedTrajectory red = reduced_run(c, ctx, s, scale);
  run.csv("pde.csv", trajectory_header(n), trajectory_rows(pde.run.rows));
  std::vector<std::string> h{"t"};
  for (const auto& x : p_columns("p_", n)) h.push_back(x);
  run.csv("reduced.csv", h, reduced_rows(red));

  // Paired positions on the common output times.
  std::vector<std::vector<double>> paired;
  std::size_t q = 0;
  for (const auto& row : pde.run.rows) {
    while (q < red.t.size() && red.t[q] < row.t - 1e-9 * std::max(1.0, row.t)) ++q;
    if (q == red.t.size()) break;
    if (std::abs(red.t[q] - row.t) > 1e-9 * std::max(1.0, row.t)) continue;
    std::vector<double> r{row.t};
    for (int k = 0; k < n; ++k) r.push_back(row.p(k));
    for (int k = 0; k < n; ++k) r.push_back(red.p[q](k));
    paired.push_back(r);
  }
  std::vector<std::string> ph{"t"};
  for (const auto& x : p_columns("pde_p_", n)) ph.push_back(x);
  for (const auto& x : p_columns("ode_p_", n)) ph.push_back(x);
  run.csv("paired.csv", ph, paired);

  // PDE velocity: least-squares slope over t ∈ [T/4, T/2], after the fast transient.
  const PulseConfiguration p0 = initial_configuration(c, ctx.length());
  const ReducedModel model = ReducedModel::make(ctx.pulse, ctx.length(), c.min_spacing).scaled(scale);
  const Vector closed = model.velocity(p0.p);
  const Vector proj = pulse_velocity_projection(p0, ctx, GradientFamily(s));
  std::vector<std::vector<double>> vrows;
  double worst = 0;
  for (int k = 0; k < n; ++k) {
    std::vector<double> tt, pp;
    for (const auto& r : pde.run.rows)
      if (r.t >= 0.25 * c.t_end && r.t <= 0.5 * c.t_end) {
        tt.push_back(r.t);
        pp.push_back(r.p(k));
      }
    const double v = tt.size() >= 2 ? slope(tt, pp) : NAN;
    const double rel = std::abs(v / closed(k) - 1);
    if (std::abs(closed(k)) > 1e-300) worst = std::max(worst, rel);
    vrows.push_back({static_cast<double>(k + 1), v, closed(k), proj(k), rel});
  }
  run.csv("velocity.csv", {"pulse", "pde", "closed_form", "projection", "rel_diff_closed"}, vrows);

  // Deviation envelope |w| ≈ M₀(η₀e^{−kt} + δ): plateau from the last rows,
  // k from the log-linear decay of |w − plateau| above it.
  const double delta = ctx.delta();
  std::vector<double> tw, lw;
  const auto& rows = pde.run.rows;
  const double plateau = rows.empty() ? NAN : rows.back().w_norm;
  for (const auto& r : rows) {
    const double excess = std::abs(r.w_norm - plateau);
    if (std::isfinite(excess) && excess > 0.05 * plateau) {
      tw.push_back(r.t);
      lw.push_back(std::log(excess));
    }
  }
  json j;
  j["rate_scale"] = scale;
  j["velocity_max_rel_diff_closed"] = worst;
  j["envelope"] = {{"M0", plateau / delta},
                   {"k", tw.size() >= 2 ? json(-slope(tw, lw)) : json(nullptr)},
                   {"points", tw.size()},
                   {"w_initial", rows.empty() ? json(nullptr) : json(rows.front().w_norm)},
                   {"w_final", plateau}};
  j["pde_t_exit"] = pde.run.t_exit ? json(*pde.run.t_exit) : json(nullptr);
  j["ode_t_exit"] = red.t_exit ? json(*red.t_exit) : json(nullptr);
  run.json_file("compare.json", j);
  run.manifest().checks["velocity_within_25pct"] = worst < 0.25;
  run.manifest().checks["energy_monotone"] = pde.monotone;
  return run.finish();
}

RunManifest experiment_invariance(const ExperimentConfig& c) {
  Run run(c);
  const ManifoldContext ctx = make_context(c);
  const ReducedModel base = ReducedModel::make(ctx.pulse, ctx.length(), c.min_spacing);
  const Vector p0 = initial_configuration(c, ctx.length()).p;
  std::vector<double> tau;
  for (double t = c.output_every; t < c.t_end + 1e-9 * c.t_end; t += c.output_every) tau.push_back(t);
  ReducedOptions o0;
  o0.output_times = tau;
  const ReducedTrajectory ref = integrate_reduced(p0, c.t_end, base, o0);

  json summary;
  double defect = 0;
  std::vector<std::string> h{"t_rescaled"};
  for (const auto& x : p_columns("p_", c.n_pulses)) h.push_back(x);
  for (double s : c.s_list) {
    try {
      const double r = rate_scale(s, ctx.pulse, ctx.grid);
      ReducedOptions os;
      for (double t : tau) os.output_times.push_back(t / r);
      const ReducedTrajectory tr = integrate_reduced(p0, c.t_end / r, base.scaled(r), os);
      double d = 0;
      for (std::size_t i = 0; i < std::min(tr.p.size(), ref.p.size()); ++i)
        d = std::max(d, (tr.p[i] - ref.p[i]).cwiseAbs().maxCoeff());
      if (tr.p.size() != ref.p.size()) d = INFINITY;
      defect = std::max(defect, d);
      run.csv("trajectory_s" + s_tag(s) + ".csv", h, reduced_rows(tr, r));
      summary["runs"].push_back({{"s", s}, {"rate_scale", r}, {"defect", d}});
    } catch (const Error& e) {
      run.manifest().failures.push_back("s = " + s_tag(s) + ": " + e.what());
    }
  }
  summary["invariance_defect"] = defect;
  summary["threshold"] = 0.01 * c.min_spacing;
  run.json_file("invariance.json", summary);
  run.manifest().checks["invariance"] = defect < 0.01 * c.min_spacing;
  return run.finish();
}

RunManifest run_experiment(const ExperimentConfig& c) {
  validate(c);
  const std::string& e = c.experiment;
  if (e == "profile") return experiment_profile(c);
  if (e == "ansatz") return experiment_ansatz(c);
  if (e == "spectrum") return experiment_spectrum(c);
  if (e == "diagnose") return experiment_diagnose(c);
  if (e == "simulate") return experiment_simulate(c);
  if (e == "reduce") return experiment_reduce(c);
  if (e == "compare") return experiment_compare(c);
  return experiment_invariance(c);
}

}  // namespace fchlab
