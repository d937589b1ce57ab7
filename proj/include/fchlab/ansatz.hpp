#pragma once

// The quasi-steady n-pulse manifold: superposition u_n, boundary and mass
// corrections, internal parameters and tangent vectors.

#include <array>
#include <cstdint>
#include <vector>

#include "fchlab/core.hpp"
#include "fchlab/well.hpp"

namespace fchlab {

/// Shared data every manifold computation needs: the well, its pulse and
/// second background correction, the grid on [0, d/ε] and the parameters.
struct ManifoldContext {
  DoubleWell well;
  PulseProfile pulse;
  BackgroundProfile background;  // B₂
  GridPtr grid;
  SystemParams params;

  double length() const { return grid->length(); }
  double kappa() const { return pulse.decay_rate(); }
  double delta() const { return params.tail_scale; }

  /// Builds profiles and a grid of spacing ≤ 0.1 on [0, d/ε] unless a grid is given.
  static ManifoldContext make(const DoubleWell& well, const SystemParams& params,
                              GridPtr grid = nullptr);
  /// Same pulse data, different pulse count/mass/spacing (profiles are reused).
  ManifoldContext with_params(const SystemParams& p) const;
  /// Same profiles and parameters on another grid of the same length.
  ManifoldContext with_grid(GridPtr g) const;
};

/// Total mass n·M_h + M₁.
double total_mass_for(int n, const PulseProfile& pulse, double excess);

struct PulseConfiguration {
  Vector p;

  Index size() const { return p.size(); }
  double min_gap() const;
  static PulseConfiguration equispaced(int n, double length);
};

/// Throws admissibility error unless p is increasing with neighbour gaps
/// ≥ ℓ, including the mirror-shadow gaps 2p₁ and 2(L − p_n).
void require_admissible(const PulseConfiguration& config, double length, double ell);
bool is_admissible(const PulseConfiguration& config, double length, double ell);

struct InternalParams {
  double p0 = 0, p_np1 = 0, e0 = 0, e_np1 = 0, lambda = 0;
  double lambda_seed = 0;  // closed form from the mass balance
  double e0_seed = 0;      // closed form from d₁, d₃
  double d1 = 0, d3 = 0;   // u_n' + λB'_{2,n} and third derivative at z = 0
  std::array<double, 4> bc_residuals{};  // Φ'(0), Φ'''(0), Φ'(L), Φ'''(L)
  double mass_error = 0;                 // relative
};

struct AnsatzProfile {
  PulseConfiguration config;
  InternalParams internal;
  Field phi;
  Field raw;         // u_n
  Field background;  // λ B_{2,n}
  Field boundary;    // E
};

/// u_n(z) = b₋ + Σ φ̄_h(z − p_j).
Field build_n_pulse(const PulseConfiguration& config, const PulseProfile& profile, GridPtr grid,
                    double ell);

/// Solves the boundary conditions and the mass constraint for
/// (p₀, p_{n+1}, e₀, e_{n+1}, λ).
InternalParams internal_parameters(const PulseConfiguration& config, const ManifoldContext& ctx);

AnsatzProfile build_ansatz(const PulseConfiguration& config, const ManifoldContext& ctx);

/// Derivatives of orders 0..8 of the continuous ansatz components at z.
struct AnsatzDerivatives {
  std::array<double, 9> raw{};         // u_n (order 0 includes b₋)
  std::array<double, 9> background{};  // λ B_{2,n}
  std::array<double, 9> boundary{};    // E
  std::array<double, 9> total() const;
};
AnsatzDerivatives ansatz_derivatives(const AnsatzProfile& a, const ManifoldContext& ctx, double z);

/// ∫(u − b₋) dz by the grid quadrature.
double mass(const Field& u, double b_minus);

/// ∂Φ/∂p_i by central differences (step rel_step·ℓ), internal parameters
/// re-solved at each evaluation.
std::vector<Field> tangent_basis(const PulseConfiguration& config, const ManifoldContext& ctx,
                                 double rel_step = 1e-5);

/// Leading-order tangents −φ_h'(z − p_i).
std::vector<Field> leading_tangents(const PulseConfiguration& config, const ManifoldContext& ctx);

/// Latin-hypercube sample of admissible configurations (uniform in the
/// slack of the gaps), optionally preceded by the equispaced configuration.
std::vector<PulseConfiguration> sample_configurations(const ManifoldContext& ctx, int count,
                                                      std::uint64_t seed,
                                                      bool include_equispaced = true);

}  // namespace fchlab
