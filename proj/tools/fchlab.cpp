// Command-line front end: one subcommand per experiment.

#include <iostream>

#include "CLI11.hpp"
#include "fchlab/harness.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool plot_data = false;
};

int run(const std::string& name, const Args& a) {
  using namespace fchlab;
  ExperimentConfig c;
  if (!a.config.empty()) c = parse_config(a.config);
  c.experiment = name;
  if (!a.out.empty()) c.output_dir = a.out;
  if (a.seed) c.seed = *a.seed;
  if (a.plot_data) c.plot_data = true;
  validate(c);
  const RunManifest m = run_experiment(c);
  std::cout << m.experiment << ": " << (m.pass() ? "all checks pass" : "some checks flagged") << '\n';
  for (const auto& [check, ok] : m.checks) std::cout << "  " << (ok ? "pass " : "FAIL ") << check << '\n';
  for (const auto& f : m.failures) std::cout << "  error in sub-run: " << f << '\n';
  std::cout << "  " << m.files.size() << " files in " << c.output_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fchlab: multi-pulse experiments for a fourth-order gradient flow"};
  app.set_version_flag("--version", fchlab::fchlab_version());
  app.require_subcommand(1);

  Args args;
  std::string chosen;
  for (const auto& name : fchlab::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", args.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", args.seed, "sampling and noise seed (overrides seed)");
    sub->add_flag("--plot-data", args.plot_data, "also write two-column .dat files");
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    return run(chosen, args);
  } catch (const fchlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
