#pragma once

// Eigenstructure diagnostics for the linearization about the n-pulse manifold.

#include <string>
#include <vector>

#include "fchlab/ansatz.hpp"
#include "fchlab/operators.hpp"

namespace fchlab {

struct SpectrumReport {
  Vector eigenvalues;              // ascending
  std::vector<Field> eigenfields;  // X-orthonormal
  Vector residuals;                // ‖Aψ − λψ‖_X
  Index modes = 0;                 // Galerkin dimension used

  // Filled by the gap reports.
  Index expected_slow = 0;
  Index slow_dimension = 0;
  double delta = 0;
  double slow_constant = 0;     // fitted c₀ = max slow |λ|/δ
  double max_slow = 0;
  double stable_threshold = 0;  // k_s
  double stable_edge = 0;       // smallest non-slow eigenvalue
  bool pass = false;
  std::string note;
};

/// k lowest eigenpairs of a self-adjoint map by Galerkin projection onto the
/// first `modes` X-orthonormal cosine modes (mode 0 dropped when on_zero_mass).
/// modes ≤ 0 picks min(N, 24L/π), i.e. wavenumbers up to 24.
SpectrumReport eigs(const LinearMap& map, Index k, bool on_zero_mass, Index modes = 0);

/// Galerkin matrix ⟨q_j, A q_k⟩ on the same cosine modes eigs uses, and the
/// coordinates ⟨q_j, f⟩ of a field in that basis.
Matrix galerkin_matrix(const LinearMap& map, bool on_zero_mass, Index modes = 0);
Vector galerkin_coordinates(const Field& f, bool on_zero_mass, Index modes = 0);

/// Point spectrum of L = ∂² − W''(φ_h) above −α₋ for one pulse on a wide
/// symmetric window, descending: λ₀ > λ₁ ≈ 0 > λ₂ > …
struct PulseSpectrum {
  std::vector<double> point;
  double alpha_minus = 0;
  /// min{λ₂², α₋²} as stated for the stable threshold.
  double k_s() const;
  /// min over all nonzero point eigenvalues and α₋²; includes λ₀².
  double k_s_full() const;
};
PulseSpectrum single_pulse_spectrum(const PulseProfile& pulse, double half_window = 0.0);

/// Spectrum of −𝕃 on zero-mass fields.  Eigenvalues below k_s/2 count as
/// slow; the count must equal n.
SpectrumReport spectral_gap_report(const AnsatzProfile& a, const ManifoldContext& ctx,
                                   const PulseSpectrum& single, Index extra = 6, Index modes = 0);

struct ConstrainedIndex {
  Index formula = 0;      // n(L) − n(D)
  Index brute_force = 0;  // direct count on V
  Index n_L = 0, n_D = 0;
  Matrix D;
  bool agree() const { return formula == brute_force; }
};

/// Negative index of Π_V(L − μ)Π_V on V = span{s_i}^⊥ by the constraint
/// matrix D_ij = ⟨s_i, (L − μ)^{−1}s_j⟩ and by direct eigensolve.  The
/// constraints are columns of S, the inner product is Euclidean with weights w
/// (empty: unit weights).
ConstrainedIndex constrained_negative_index(const Matrix& L, const Matrix& S, double mu = 0.0,
                                            const Vector& weights = Vector());

struct Coercivity {
  struct Norm {
    double mu = 0;                // min ⟨−𝕃v,v⟩/‖v‖²_H on zero-mass v ⟂ 𝒯_p
    double mu_unconstrained = 0;  // same without the tangent constraint
    double mu_e = 0, gamma_e = 0; // ⟨𝓛v,v⟩ + γ_e‖v‖²_X ≥ μ_e‖v‖²_H
    double bound = 0;             // μ̃μ_e/(μ̃ + γ_e)
    bool pass = false;
  };
  Norm h4;          // H = H⁴: a fourth-order form against an eighth-order norm,
                    // so every constant here scales like (top wavenumber)^{−4}
  Norm h2;          // the form domain H², resolution independent
  double mu_x = 0;  // min ⟨−𝕃v,v⟩/‖v‖²_X on zero-mass v ⟂ 𝒯_p
  double mu_tilde = 0;  // 0.75·k_s
  Index modes = 0;
};

/// Generalized eigenproblems with the Gram matrix of H in the cosine Galerkin
/// basis (default wavenumbers up to 12).  (μ_e, γ_e) maximizes the lemma
/// bound over a sweep of γ_e ∈ [1e−2, 1e2].
Coercivity coercivity_constant(const AnsatzProfile& a, const ManifoldContext& ctx,
                               const std::vector<Field>& tangents, double k_s, Index modes = 0);

struct Alignment {
  double error = 0;   // max_i ‖ψ_i − (βt)_i‖_{H⁴}
  Matrix beta;        // orthogonal matching of normalized tangents to ψ
  double beta_defect = 0;  // ‖ΘᵀΘ − I‖ for the raw overlap Θ
};

/// Compares the slow eigenfields with the normalized tangents after the
/// optimal orthogonal matching (Procrustes).
Alignment tangent_alignment(const std::vector<Field>& slow, const std::vector<Field>& tangents);

/// Spectrum of 𝒢₁𝓛𝒢₁ on zero-mass fields.  The n lowest eigenpairs are the
/// candidate slow set; each eigenfield is compared with span{𝒢₁^{−1}∂Φ/∂p_i}.
/// The slow eigenvalues scale like λ/α(s)², so the k_s/2 split of the
/// unweighted problem does not apply.
struct SymmetrizedGap {
  SpectrumReport spectrum;
  double delta_g = 0;
  Vector distance;          // X distance of each eigenfield from the span
  double alignment = 0;     // max over the n lowest
  double slow_constant = 0; // max slow |λ|/δ_𝒢
  double alignment_constant = 0;
  double gap_ratio = 0;     // λ_{n+1}/λ_n
  double mu_g = 0;          // λ_{n+1}
  bool pass = false;
};
SymmetrizedGap symmetrized_gap(const AnsatzProfile& a, const ManifoldContext& ctx,
                               const GradientFamily& family, const std::vector<Field>& tangents,
                               Index modes = 0);

/// η_* = δ₂/μ₂ + √(δ₂²/μ₂² + 2(δ₀ + δ₁)/μ₂).
double eta_lower(double delta0, double delta1, double delta2, double mu2);
/// η^* = min{η, (1/c₁)(μ₂/(2c₂))^{1/(r+1−2)}}.
double eta_upper(double eta, double c1, double c2, double mu2, double r);

struct HypothesisRecord {
  std::string hypothesis;
  int config_id = -1;
  double constant = 0;
  double threshold = 0;
  bool pass = false;
  std::string note;
};

/// EL constants in one norm H.
struct ElConstants {
  double delta2 = 0;  // max over the sample of sup_{v ⟂ 𝒯} ⟨∇J(Φ), v⟩/‖v‖_H
  double mu2 = 0;     // min over the sample of the normal coercivity constant
  double c2 = 0;      // |𝓝_E(v)| ≤ c₂‖v‖_H^{r+1} along random normal directions
  double eta_lower = 0, eta_upper = 0;
};

struct DiagnosticsReport {
  std::vector<HypothesisRecord> records;
  std::vector<PulseConfiguration> configs;
  double delta0 = 0, delta1 = 0;
  ElConstants h4;  // H = H⁴ as stated
  ElConstants h2;  // the form domain H²
  std::string substitution_note;
  bool all_pass() const;
};

struct ElInputs {
  double delta1 = 0;
  double eta = 1.0;  // a priori radius entering η^*
  double r = 2.0;    // 𝓝_E is cubic: ρ_exp = r + 1 = 3
  Index modes = 0;   // Galerkin size, default wavenumbers up to 12
};

/// δ₀ = energy spread over the sample; δ₂, μ₂, c₂ measured per configuration
/// in the cosine Galerkin basis; c₁ = 1 since ‖v‖_X ≤ ‖v‖_H.
DiagnosticsReport el_bounds(const std::vector<PulseConfiguration>& sample, const ManifoldContext& ctx,
                            const PulseSpectrum& single, const ElInputs& in);

}  // namespace fchlab
