#pragma once

// Batch front-end behind the `cbpsim` executable. Each command takes a
// validated ExperimentConfig, writes its files under the output directory
// and returns the process exit code: 0 when every enabled flag passes, 1
// when a check fails. Validation problems throw ConfigError (exit 2 in main).

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbpsim/calibration.hpp"
#include "cbpsim/config.hpp"
#include "cbpsim/diagnostics.hpp"
#include "cbpsim/diffusion.hpp"
#include "cbpsim/model.hpp"
#include "cbpsim/version.hpp"

namespace cbpsim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace cli_detail {

inline std::filesystem::path output_dir(const ExperimentConfig& c) {
  std::string dir = c.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("CBPSIM_OUT_DIR");
    dir = (env && *env) ? env : ".";
  }
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline bool wants(const ExperimentConfig& c, const std::string& format) {
  for (const auto& f : c.formats) {
    if (f == format) return true;
  }
  return false;
}

inline void validate_formats(const ExperimentConfig& c) {
  for (const auto& f : c.formats) {
    if (f != "json" && f != "text" && f != "csv") throw ConfigError("unknown format: " + f);
  }
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& c,
                           const std::string& command, const std::string& command_line,
                           const std::vector<std::string>& files) {
  nlohmann::json j{{"seed", c.seed},         {"preset", c.preset},
                   {"parameters", to_json(c)}, {"version", kVersion},
                   {"command", command},      {"command_line", command_line},
                   {"files", files}};
  auto out = open_out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

inline CbpModel build_model(const ExperimentConfig& c) {
  try {
    return make_model(c);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline void write_report(const std::filesystem::path& dir, const ExperimentConfig& c,
                         const DiagnosticReport& report, std::vector<std::string>& files,
                         bool convergence_csv) {
  if (wants(c, "json")) {
    auto out = open_out(dir / "report.json");
    out << to_json(report).dump(2) << '\n';
    files.push_back("report.json");
  }
  if (wants(c, "text")) {
    auto out = open_out(dir / "report.txt");
    write_report_text(out, report);
    files.push_back("report.txt");
  }
  if (convergence_csv && wants(c, "csv")) {
    auto out = open_out(dir / "convergence.csv");
    write_convergence_csv(out, report);
    files.push_back("convergence.csv");
  }
}

}  // namespace cli_detail

inline void validate_simulate(const ExperimentConfig& c) {
  if (c.preset.empty()) throw ConfigError("missing preset name (--preset)");
  if (c.generations < 1) throw ConfigError("--generations must be >= 1");
  if (c.paths < 1) throw ConfigError("--paths must be >= 1");
}

/// Writes trajectory_NNN.csv for each path plus manifest.json.
inline int cmd_simulate(const ExperimentConfig& c, const std::string& command_line,
                        std::ostream& log) {
  validate_simulate(c);
  const CbpModel model = cli_detail::build_model(c);
  const auto dir = cli_detail::output_dir(c);
  std::vector<std::string> files;
  for (std::size_t p = 0; p < c.paths; ++p) {
    const std::uint64_t path_seed = detail::mix64(c.seed ^ detail::mix64(p));
    const Trajectory traj = simulate(model, c.generations, path_seed);
    char name[64];
    std::snprintf(name, sizeof name, "trajectory_%03zu.csv", p);
    auto out = cli_detail::open_out(dir / name);
    write_trajectory_csv(out, traj);
    files.emplace_back(name);
  }
  cli_detail::write_manifest(dir, c, "simulate", command_line, files);
  log << "wrote " << files.size() << " trajectories to " << dir.string() << '\n';
  return 0;
}

/// Study described by the config, with the final-n threshold resolved:
/// explicit ks_threshold, else the committed calibration when the config
/// matches it, else the 1% KS critical value.
inline ConvergenceStudy make_study(const ExperimentConfig& c) {
  if (c.preset.empty()) throw ConfigError("missing preset name (--preset)");
  ConvergenceStudy study(cli_detail::build_model(c));
  study.n_values = c.n_values;
  study.t_checkpoints = c.t_checkpoints;
  study.horizon = c.horizon;
  study.replicates = c.replicates;
  study.reference_factor = c.reference_factor;
  study.master_seed = c.seed;
  study.threads = std::max<std::size_t>(1, c.threads);
  try {
    study.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& cal = kKsCalibration;
  const bool calibrated = c.preset == "poisson-immigration" && c.alpha == cal.alpha &&
                          c.z0 == 0 && c.z0_law == "fixed" && c.n_values.back() == cal.n &&
                          c.t_checkpoints.size() == 1 && c.t_checkpoints[0] == cal.t &&
                          c.horizon == cal.t && c.replicates == cal.replicates &&
                          c.reference_factor == cal.reference_factor && cal.threshold > 0.0;
  if (c.ks_threshold) {
    study.ks_threshold = *c.ks_threshold;
    study.ks_threshold_source = "config";
  } else if (calibrated) {
    study.ks_threshold = cal.threshold;
    study.ks_threshold_source = "calibration: median + 3 MAD over 20 seeds";
  } else {
    study.ks_threshold = ks_critical_value(c.replicates, c.replicates * c.reference_factor);
    study.ks_threshold_source = "1% two-sample KS critical value";
  }
  return study;
}

/// Runs the marginal convergence study; report.json, report.txt,
/// convergence.csv and manifest.json.
inline int cmd_converge(const ExperimentConfig& c, const std::string& command_line, bool dry_run,
                        std::ostream& log) {
  cli_detail::validate_formats(c);
  ConvergenceStudy study = make_study(c);
  if (dry_run) {
    nlohmann::json plan{{"command", "converge"},
                        {"model", study.model.id()},
                        {"n_values", study.n_values},
                        {"t_checkpoints", study.t_checkpoints},
                        {"horizon", study.horizon},
                        {"replicates", study.replicates},
                        {"reference_size", study.replicates * study.reference_factor},
                        {"master_seed", study.master_seed},
                        {"threads", study.threads},
                        {"ks_threshold", *study.ks_threshold},
                        {"ks_threshold_source", study.ks_threshold_source}};
    log << plan.dump(2) << '\n';
    return 0;
  }
  const auto dir = cli_detail::output_dir(c);
  const DiagnosticReport report = marginal_convergence(study);
  std::vector<std::string> files;
  cli_detail::write_report(dir, c, report, files, true);
  cli_detail::write_manifest(dir, c, "converge", command_line, files);
  write_report_text(log, report);
  return report.passed() ? 0 : 1;
}

inline DiffusionParams diffusion_params(const ExperimentConfig& c) {
  try {
    return DiffusionParams(c.alpha, c.m, c.sigma2.value_or(1.0));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Exact marginals (marginals.txt, one value per line) and/or an
/// Euler-Maruyama path (em_path.csv). Neither flag means both.
inline int cmd_diffusion(const ExperimentConfig& c, const std::string& command_line,
                         std::ostream& log) {
  const DiffusionParams p = diffusion_params(c);
  if (!(c.t > 0.0)) throw ConfigError("--t must be > 0");
  if (!(c.x0 >= 0.0)) throw ConfigError("--x0 must be >= 0");
  const bool exact = c.exact || !c.em;
  const bool em = c.em || !c.exact;
  if (em && !(c.dt > 0.0)) throw ConfigError("--dt must be > 0");
  const auto dir = cli_detail::output_dir(c);
  std::vector<std::string> files;
  if (exact) {
    Stream rng = Stream::derive(c.seed, {0xd1});
    const auto draws = marginal_sample(c.t, c.x0, p, rng, c.draws);
    auto out = cli_detail::open_out(dir / "marginals.txt");
    out << std::setprecision(17);
    for (double v : draws) out << v << '\n';
    files.emplace_back("marginals.txt");
    log << "wrote " << draws.size() << " exact marginal draws at t=" << c.t << '\n';
  }
  if (em) {
    Stream rng = Stream::derive(c.seed, {0xd2});
    const auto path = euler_maruyama_path(c.x0, uniform_grid(c.t, c.dt), p, rng);
    auto out = cli_detail::open_out(dir / "em_path.csv");
    write_diffusion_csv(out, path);
    files.emplace_back("em_path.csv");
    log << "wrote Euler-Maruyama path with " << path.values.size() << " points\n";
  }
  cli_detail::write_manifest(dir, c, "diffusion", command_line, files);
  return 0;
}

inline const std::vector<std::string>& diagnose_checks() {
  static const std::vector<std::string> names{"lemma1",     "moments", "conditional",
                                              "conditionb", "lindeberg", "conditions"};
  return names;
}

/// Runs the selected proof-condition and identity checks into one report.
inline int cmd_diagnose(const ExperimentConfig& c, const std::string& command_line,
                        std::ostream& log) {
  cli_detail::validate_formats(c);
  if (c.checks.empty()) throw ConfigError("no --check selected");
  for (const auto& name : c.checks) {
    if (std::find(diagnose_checks().begin(), diagnose_checks().end(), name) ==
        diagnose_checks().end()) {
      throw ConfigError("unknown check: " + name);
    }
  }
  const std::size_t threads = std::max<std::size_t>(1, c.threads);
  ConditionOptions opt;
  opt.paths = c.paths;
  opt.horizon = c.horizon;
  opt.resamples = c.resamples;
  opt.master_seed = c.seed;
  opt.threads = threads;

  DiagnosticReport report;
  report.metadata["command"] = "diagnose";
  auto model_for = [&c]() { return cli_detail::build_model(c); };
  auto run_trend = [&](const std::string& trend_name, auto summarize) {
    TrendCheck trend;
    trend.name = trend_name;
    for (std::size_t n : c.n_values) {
      const ConditionRow row = summarize(n);
      report.conditions.push_back(row);
      trend.keys.push_back(static_cast<double>(n));
      trend.values.push_back(row.value);
      trend.se.push_back(row.se);
    }
    trend.evaluate_into();
    report.trends.push_back(trend);
  };
  for (const auto& name : c.checks) {
    if (name == "lemma1") {
      OffspringLaw law = c.sigma2 ? OffspringLaw::poisson(*c.sigma2) : model_for().offspring();
      report.metadata["lemma1_offspring"] =
          law.name() + "(m=" + detail::format_double(law.mean()) +
          ",sigma2=" + detail::format_double(law.variance()) + ")";
      for (std::size_t l : c.l_values) {
        report.checks.push_back(lemma1_identity(law, l, c.draws, c.seed, threads));
      }
      for (std::size_t l : c.l_values) {
        for (double bound : c.lemma_m) {
          report.checks.push_back(lemma1_inequality(law, l, bound, c.draws, c.seed, threads));
        }
      }
    } else if (name == "moments") {
      report.append(moment_report(model_for(), c.k_values, c.replicates, c.seed, threads));
    } else if (name == "conditional") {
      report.append(conditional_moment_report(model_for(), c.k_values, c.draws, c.seed, threads));
    } else if (name == "conditionb") {
      const CbpModel model = model_for();
      run_trend("condition_b_decreasing",
                [&](std::size_t n) { return condition_b_summary(model, n, opt); });
    } else if (name == "lindeberg") {
      const CbpModel model = model_for();
      for (double theta : c.thetas) {
        run_trend("condition_c_decreasing_theta=" + detail::format_double(theta),
                  [&](std::size_t n) { return condition_c_summary(model, n, theta, opt); });
      }
    } else if (name == "conditions") {
      report.append(proof_conditions(model_for(), c.n_values, c.thetas, opt));
    }
  }
  const auto dir = cli_detail::output_dir(c);
  std::vector<std::string> files;
  cli_detail::write_report(dir, c, report, files, false);
  cli_detail::write_manifest(dir, c, "diagnose", command_line, files);
  write_report_text(log, report);
  return report.passed() ? 0 : 1;
}

}  // namespace cbpsim
