// cbpsim: simulate controlled branching processes, sample their diffusion
// limit and run the convergence diagnostics from the command line.
//
//   cbpsim simulate --preset poisson-immigration --alpha 1 --generations 100 --paths 3 --seed 7
//   cbpsim converge --preset poisson-immigration --alpha 1 --threads 8
//   cbpsim diffusion --exact --t 1 --draws 100000
//   cbpsim diagnose --check lemma1 --l 2 --sigma2 1
//
// A JSON config file (--config) uses the same flat keys as the flags;
// flags given on the command line override it.

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cbpsim/commands.hpp"

namespace {

using cbpsim::ExperimentConfig;

// Binds a flag to a field of `flags_` and remembers how to copy it over the
// file-loaded config when the flag was actually given.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T ExperimentConfig::*field, const std::string& help) {
    CLI::Option* opt = app_->add_option(name, flags_.*field, help);
    copies_.emplace_back(opt, [this, field](ExperimentConfig& c) { c.*field = flags_.*field; });
    return opt;
  }

  template <typename T>
  CLI::Option* list(const std::string& name, std::vector<T> ExperimentConfig::*field,
                    const std::string& help) {
    return option(name, field, help)->delimiter(',');
  }

  CLI::Option* flag(const std::string& name, bool ExperimentConfig::*field, const std::string& help) {
    CLI::Option* opt = app_->add_flag(name, flags_.*field, help);
    copies_.emplace_back(opt, [this, field](ExperimentConfig& c) { c.*field = flags_.*field; });
    return opt;
  }

  CLI::Option* optional(const std::string& name, std::optional<double> ExperimentConfig::*field,
                        const std::string& help) {
    auto holder = std::make_shared<double>(0.0);
    CLI::Option* opt = app_->add_option(name, *holder, help);
    copies_.emplace_back(opt, [holder, field](ExperimentConfig& c) { c.*field = *holder; });
    return opt;
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& [opt, copy] : copies_) {
      if (opt->count() > 0) copy(c);
    }
  }

 private:
  CLI::App* app_;
  ExperimentConfig flags_;
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> copies_;
};

void add_model_flags(FlagSet& f) {
  f.option("--preset", &ExperimentConfig::preset, "poisson-immigration | bernoulli-rounding");
  f.option("--alpha", &ExperimentConfig::alpha, "drift constant alpha >= 0");
  f.option("--m", &ExperimentConfig::m, "offspring mean (bernoulli-rounding)");
  f.option("--offspring", &ExperimentConfig::offspring,
           "offspring family: poisson | geometric | two-point | deterministic");
  f.option("--z0", &ExperimentConfig::z0, "initial population (or its mean for --z0-law poisson)");
  f.option("--z0-law", &ExperimentConfig::z0_law, "fixed | poisson");
  f.flag("!--no-self-test", &ExperimentConfig::self_test, "skip the sampler self-test");
}

void add_common_flags(FlagSet& f) {
  f.option("--seed", &ExperimentConfig::seed, "master seed");
  f.option("--threads", &ExperimentConfig::threads, "worker threads");
  f.option("--out", &ExperimentConfig::out_dir, "output directory (default $CBPSIM_OUT_DIR or .)");
  f.list("--formats", &ExperimentConfig::formats, "report formats: json,text,csv");
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controlled branching process simulation and diffusion-limit diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cbpsim::kVersion));
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file with flat keys")
      ->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "simulate trajectories to CSV");
  FlagSet sim_flags(simulate);
  add_model_flags(sim_flags);
  add_common_flags(sim_flags);
  sim_flags.option("--generations", &ExperimentConfig::generations, "generations per path");
  sim_flags.option("--paths", &ExperimentConfig::paths, "number of trajectories");

  auto* converge = app.add_subcommand("converge", "KS convergence of W_n(t) to the diffusion");
  FlagSet conv_flags(converge);
  add_model_flags(conv_flags);
  add_common_flags(conv_flags);
  conv_flags.list("--n", &ExperimentConfig::n_values, "increasing scaling indices");
  conv_flags.list("--t", &ExperimentConfig::t_checkpoints, "time checkpoints in (0, T]");
  conv_flags.option("--T", &ExperimentConfig::horizon, "horizon T");
  conv_flags.option("--replicates", &ExperimentConfig::replicates, "paths per n");
  conv_flags.option("--reference-factor", &ExperimentConfig::reference_factor,
                    "reference sample size as a multiple of replicates");
  conv_flags.optional("--ks-threshold", &ExperimentConfig::ks_threshold,
                      "final-n KS threshold (default: calibration or 1% critical value)");
  bool dry_run = false;
  converge->add_flag("--dry-run", dry_run, "print the validated plan and exit");

  auto* diffusion = app.add_subcommand("diffusion", "sample the limiting diffusion");
  FlagSet diff_flags(diffusion);
  add_common_flags(diff_flags);
  diff_flags.option("--alpha", &ExperimentConfig::alpha, "drift alpha");
  diff_flags.option("--m", &ExperimentConfig::m, "offspring mean m");
  diff_flags.optional("--sigma2", &ExperimentConfig::sigma2, "offspring variance (default 1)");
  diff_flags.option("--x0", &ExperimentConfig::x0, "initial value");
  diff_flags.option("--t", &ExperimentConfig::t, "time horizon");
  diff_flags.option("--draws", &ExperimentConfig::draws, "exact marginal draws");
  diff_flags.option("--dt", &ExperimentConfig::dt, "Euler-Maruyama step");
  diff_flags.flag("--exact", &ExperimentConfig::exact, "write exact marginal draws");
  diff_flags.flag("--em", &ExperimentConfig::em, "write an Euler-Maruyama path");

  auto* diagnose = app.add_subcommand("diagnose", "identity and proof-condition checks");
  FlagSet diag_flags(diagnose);
  add_model_flags(diag_flags);
  add_common_flags(diag_flags);
  diag_flags.list("--check", &ExperimentConfig::checks,
                  "lemma1,moments,conditional,conditionb,lindeberg,conditions");
  diag_flags.list("--l", &ExperimentConfig::l_values, "sum lengths for lemma1");
  diag_flags.list("--M", &ExperimentConfig::lemma_m, "truncation levels for lemma1");
  diag_flags.optional("--sigma2", &ExperimentConfig::sigma2,
                      "lemma1 offspring variance (Poisson with this mean)");
  diag_flags.list("--k", &ExperimentConfig::k_values, "generation indices");
  diag_flags.list("--n", &ExperimentConfig::n_values, "scaling indices");
  diag_flags.list("--theta", &ExperimentConfig::thetas, "Lindeberg truncation levels");
  diag_flags.option("--T", &ExperimentConfig::horizon, "horizon T");
  diag_flags.option("--paths", &ExperimentConfig::paths, "paths per n");
  diag_flags.option("--R", &ExperimentConfig::resamples, "one-step resamples per state");
  diag_flags.option("--replicates", &ExperimentConfig::replicates, "paths for moment checks");
  diag_flags.option("--draws", &ExperimentConfig::draws, "draws for lemma1 and one-step checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string command_line = join_args(argc, argv);
  try {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : cbpsim::load_config(config_path);
    if (simulate->parsed()) {
      sim_flags.apply(config);
      return cbpsim::cmd_simulate(config, command_line, std::cout);
    }
    if (converge->parsed()) {
      conv_flags.apply(config);
      return cbpsim::cmd_converge(config, command_line, dry_run, std::cout);
    }
    if (diffusion->parsed()) {
      diff_flags.apply(config);
      return cbpsim::cmd_diffusion(config, command_line, std::cout);
    }
    if (diagnose->parsed()) {
      diag_flags.apply(config);
      if (config.checks.empty()) config.checks = {"moments"};
      return cbpsim::cmd_diagnose(config, command_line, std::cout);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
