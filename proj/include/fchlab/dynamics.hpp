#pragma once

// Full gradient flow u_t = −𝒢∇J(u) and the reduced pulse ODE.

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "fchlab/ansatz.hpp"
#include "fchlab/operators.hpp"

namespace fchlab {

struct FlowSample {
  double t = 0, dt = 0, energy = 0, mass = 0;
  double dissipation = 0;  // ‖𝒢₁∇J(u)‖²_X
};

struct SimulationState {
  double t = 0;
  double dt = 0;
  Field u;
  double mass0 = 0;
  double energy = 0;
  double dissipation = 0;
  double stabilization = 0;  // κ used by the stepper that produced this state
  long accepted = 0, rejected = 0;
  std::deque<FlowSample> ring;
  std::size_t ring_capacity = 4096;

  explicit SimulationState(Field f) : u(std::move(f)) {}
};

struct StepperOptions {
  double dt0 = 0;             // 0 → 0.1·h²
  double dt_max = 0.05;
  double dt_min = 1e-12;
  double energy_slack = 1e-10;
  double stabilization = 0;   // 0 → 2·max|W''(u₀)|²
  int grow_after = 20;        // accepted steps before dt doubles
  bool adaptive = true;
  std::string dump_path;      // state written here on dt underflow
};

/// Semi-implicit cosine-spectral stepper: 𝒢(∂⁴ + κ) implicit, the rest of
/// 𝒢∇J explicit.  Mode 0 is never touched, so the mass is exact.
class FlowStepper {
 public:
  FlowStepper(DoubleWell well, GradientFamily family, StepperOptions opts = {});

  SimulationState start(const Field& u0) const;
  /// Continues a restored state: energy and dissipation are recomputed, t,
  /// dt and the reference mass are kept.
  SimulationState resume(SimulationState s) const;
  /// One accepted step (halving dt while the energy rises).
  void step(SimulationState& s) const;
  /// Steps until s.t ≥ t_end, landing on t_end exactly.
  void advance(SimulationState& s, double t_end) const;

  double dissipation(const Field& u) const;
  const GradientFamily& family() const { return family_; }
  double stabilization() const { return kappa_; }
  const StepperOptions& options() const { return opts_; }

 private:
  Field trial(const Field& u, const Field& grad, double dt) const;
  DoubleWell well_;
  GradientFamily family_;
  StepperOptions opts_;
  mutable double kappa_ = -1;
};

/// Sub-grid maxima above b₋ + threshold by three-point parabolic fits.
PulseConfiguration extract_pulse_positions(const Field& u, int n_expected, double b_minus, double threshold);
/// Threshold φ̄_max/2 of the pulse.
PulseConfiguration extract_pulse_positions(const Field& u, int n_expected, const PulseProfile& pulse);

struct TrajectoryRow {
  double t = 0;
  Vector p;
  double energy = 0, mass = 0;
  double w_norm = 0;  // ‖u − Φ(p̂)‖_{H⁴}
};

struct RunOptions {
  double output_every = 1.0;
  bool w_norm = true;
  std::string checkpoint_path;  // written at every output when set
};

struct FlowRun {
  std::vector<TrajectoryRow> rows;
  std::optional<double> t_exit;  // a gap fell below ℓ/2
  SimulationState final_state;
};

/// Advances to T recording a row every output_every; stops early on collision.
FlowRun run_flow(const FlowStepper& stepper, const ManifoldContext& ctx, SimulationState state, double T,
                 const RunOptions& opts = {});

/// Columns t, p_1..p_n, energy, mass, w_norm.
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);

/// One JSON header line (length, points, t, dt, mass0, s, plus `extra`),
/// then the field as raw little-endian float64.
void write_checkpoint(const std::string& path, const SimulationState& s, double gradient_s,
                      const std::string& extra_json = "{}");
struct Checkpoint {
  SimulationState state;
  double gradient_s = 0;
  std::string header;  // the JSON line
};
Checkpoint read_checkpoint(const std::string& path);

/// ṗ_i = −γ̂(e^{−√α₋(p_{i+1}−p_i)} − e^{−√α₋(p_i−p_{i−1})}) with mirror
/// shadows p₀ = −p₁, p_{n+1} = 2L − p_n, γ̂ = 2α₋φ_max²/‖φ_h'‖²,
/// multiplied by rate_scale = α(0)²/α(s)².
struct ReducedModel {
  double gamma_hat = 0;
  double kappa = 0;
  double length = 0;
  double ell = 0;
  double rate_scale = 1.0;

  static ReducedModel make(const PulseProfile& pulse, double length, double ell);
  ReducedModel scaled(double s_rate) const;
  Vector velocity(const Vector& p) const;
};

Vector pulse_velocity(const PulseConfiguration& p, const ReducedModel& m);

/// Solves G·ṗ = ⟨𝓡(p), ∂Φ/∂p_i⟩_X with 𝓡 = −Π₀∇J(Φ) and the 𝒢-weighted
/// tangent Gram G_ij = ⟨𝒢₁^{−1}∂_iΦ, 𝒢₁^{−1}∂_jΦ⟩ (the plain Gram for s = 0).
Vector pulse_velocity_projection(const PulseConfiguration& p, const ManifoldContext& ctx,
                                 const GradientFamily& family = GradientFamily(0.0));

struct JacobianReport {
  Matrix matrix;
  Vector eigenvalues;  // ascending
  Vector analytic;     // −γ(1 + cos(kπ/(n+1))), ascending
  double gamma = 0;
};

/// Tridiagonal with diagonal −γ, off-diagonals γ/2, γ = γ̂·e^{−√α₋ L/n}.
JacobianReport jacobian_at_equispaced(const ReducedModel& m, int n);
/// Central-difference Jacobian of the reduced velocity at p.
Matrix jacobian_numeric(const ReducedModel& m, const Vector& p, double step = 1e-6);

/// α(s) = ‖𝒢₁^{−1}Π₀φ_h'‖ for a pulse at the centre of the grid.
double alpha_scaling(double s, const PulseProfile& pulse, GridPtr grid);
/// α(0)²/α(s)²; exactly 1 at s = 0.
double rate_scale(double s, const PulseProfile& pulse, GridPtr grid);

struct ReducedTrajectory {
  std::vector<double> t;
  std::vector<Vector> p;
  std::optional<double> t_exit;  // left the admissible set
  long steps = 0;
};

struct ReducedOptions {
  double rtol = 1e-10, atol = 1e-12;
  double h0 = 0;  // 0 → chosen from the initial velocity
  std::vector<double> output_times;  // empty → every accepted step
};

/// Dormand–Prince 5(4) on ṗ = m.velocity(p); stops at T or when a gap (mirror
/// gaps included) drops below ℓ.
ReducedTrajectory integrate_reduced(const Vector& p0, double T, const ReducedModel& m,
                                    const ReducedOptions& opts = {});

}  // namespace fchlab
