#pragma once

// Experiment configuration, drivers and run manifests.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fchlab/ansatz.hpp"

namespace fchlab {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"profile", "ansatz",   "spectrum", "diagnose",
                                                  "simulate", "reduce", "compare",  "invariance"};
  return names;
}

struct ExperimentConfig {
  std::string experiment = "profile";
  double tau = -0.3;
  std::optional<std::array<double, 3>> roots;  // custom well b₋ < c < b₊, overrides tau
  double epsilon = 0.1;
  double domain_d = 16.0;
  int n_pulses = 3;
  double min_spacing = 8.0;
  double mass_excess_per_delta = 10.0;  // M = n·M_h + this·δ
  double gradient_s = 0.0;
  std::optional<double> rho;
  int grid_points = 2049;  // 0 → smallest 2^m + 1 with spacing ≤ 0.1
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  bool plot_data = false;

  // Experiment knobs.
  std::vector<double> s_list = {0.0, 0.5, 1.0};
  int samples = 4;               // sampled configurations (ansatz, diagnose)
  std::vector<double> p0;        // empty → pulses at neighbour distance 1.001ℓ about the centre
  bool equispaced = false;       // start from the equispaced configuration instead
  double perturbation = 0.0;     // amplitude of the zero-mass w₀
  double t_end = 100.0;
  double output_every = 5.0;
  double dt_max = 0.05;
  std::string restart;           // checkpoint to continue from (simulate)

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict JSON schema: unknown keys are a config error, SystemParams
/// invariants a validation error.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);

/// Well, profiles, grid and parameters for a config.
ManifoldContext make_context(const ExperimentConfig& c, std::optional<double> s = std::nullopt);
/// p0 from the config or the default start.
PulseConfiguration initial_configuration(const ExperimentConfig& c, double length);

struct RunManifest {
  std::string experiment;
  std::string config_hash;  // FNV-1a of the serialized config
  std::string version;
  std::string started, finished;  // UTC, ISO 8601
  std::vector<std::string> files;  // relative to the output directory
  std::map<std::string, bool> checks;
  std::vector<std::string> failures;  // sub-runs that raised
  bool pass() const;
};

/// Runs the experiment named in the config, writes its files and finally
/// manifest.json.  Hypothesis failures are recorded, not thrown.
RunManifest run_experiment(const ExperimentConfig& c);

RunManifest experiment_profile(const ExperimentConfig& c);
RunManifest experiment_ansatz(const ExperimentConfig& c);
RunManifest experiment_spectrum(const ExperimentConfig& c);
RunManifest experiment_diagnose(const ExperimentConfig& c);
RunManifest experiment_simulate(const ExperimentConfig& c);
RunManifest experiment_reduce(const ExperimentConfig& c);
RunManifest experiment_compare(const ExperimentConfig& c);
RunManifest experiment_invariance(const ExperimentConfig& c);

std::string fchlab_version();

}  // namespace fchlab
