#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbpsim/laws.hpp"
#include "cbpsim/model.hpp"

namespace cbpsim {

/// Flat experiment configuration shared by every subcommand. Keys mirror
/// the command-line flags one to one.
struct ExperimentConfig {
  std::string preset;
  double alpha = 1.0;
  double m = 1.0;
  std::string offspring = "poisson";
  Count z0 = 0;
  std::string z0_law = "fixed";
  std::size_t generations = 100;
  std::size_t paths = 1;
  std::vector<std::size_t> n_values{10, 50, 250, 1250};
  std::vector<double> t_checkpoints{1.0};
  double horizon = 1.0;
  std::size_t replicates = 10000;
  std::size_t reference_factor = 10;
  std::vector<double> thetas{0.1};
  std::size_t resamples = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out_dir;  // empty: $CBPSIM_OUT_DIR, else "."
  std::vector<std::string> formats{"json", "text", "csv"};
  std::optional<double> ks_threshold;
  bool self_test = true;
  // diffusion
  double x0 = 0.0;
  std::optional<double> sigma2;
  double t = 1.0;
  std::size_t draws = 100000;
  double dt = 0.001;
  bool exact = false;
  bool em = false;
  // diagnose
  std::vector<std::string> checks;
  std::vector<std::size_t> l_values{2, 3, 5};
  std::vector<double> lemma_m{1.0, 10.0};
  std::vector<Count> k_values{1, 10, 100};

  bool operator==(const ExperimentConfig&) const = default;
};

inline const std::set<std::string>& known_presets() {
  static const std::set<std::string> names{"poisson-immigration", "bernoulli-rounding"};
  return names;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j{{"preset", c.preset},
                   {"alpha", c.alpha},
                   {"m", c.m},
                   {"offspring", c.offspring},
                   {"z0", c.z0},
                   {"z0_law", c.z0_law},
                   {"generations", c.generations},
                   {"paths", c.paths},
                   {"n_values", c.n_values},
                   {"t_checkpoints", c.t_checkpoints},
                   {"horizon", c.horizon},
                   {"replicates", c.replicates},
                   {"reference_factor", c.reference_factor},
                   {"thetas", c.thetas},
                   {"resamples", c.resamples},
                   {"seed", c.seed},
                   {"threads", c.threads},
                   {"out_dir", c.out_dir},
                   {"formats", c.formats},
                   {"self_test", c.self_test},
                   {"x0", c.x0},
                   {"t", c.t},
                   {"draws", c.draws},
                   {"dt", c.dt},
                   {"exact", c.exact},
                   {"em", c.em},
                   {"checks", c.checks},
                   {"l_values", c.l_values},
                   {"lemma_m", c.lemma_m},
                   {"k_values", c.k_values}};
  j["ks_threshold"] = c.ks_threshold ? nlohmann::json(*c.ks_threshold) : nlohmann::json(nullptr);
  j["sigma2"] = c.sigma2 ? nlohmann::json(*c.sigma2) : nlohmann::json(nullptr);
  return j;
}

/// Overlays the keys present in `j` onto `c`; unknown keys are an error.
inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  const nlohmann::json reference = to_json(ExperimentConfig{});
  for (const auto& item : j.items()) {
    if (!reference.contains(item.key())) {
      throw std::invalid_argument("unknown config key: " + item.key());
    }
  }
  auto take = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  auto take_opt = [&j](const char* key, std::optional<double>& field) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
      field.reset();
    } else {
      field = j.at(key).get<double>();
    }
  };
  try {
    take("preset", c.preset);
    take("alpha", c.alpha);
    take("m", c.m);
    take("offspring", c.offspring);
    take("z0", c.z0);
    take("z0_law", c.z0_law);
    take("generations", c.generations);
    take("paths", c.paths);
    take("n_values", c.n_values);
    take("t_checkpoints", c.t_checkpoints);
    take("horizon", c.horizon);
    take("replicates", c.replicates);
    take("reference_factor", c.reference_factor);
    take("thetas", c.thetas);
    take("resamples", c.resamples);
    take("seed", c.seed);
    take("threads", c.threads);
    take("out_dir", c.out_dir);
    take("formats", c.formats);
    take_opt("ks_threshold", c.ks_threshold);
    take("self_test", c.self_test);
    take("x0", c.x0);
    take_opt("sigma2", c.sigma2);
    take("t", c.t);
    take("draws", c.draws);
    take("dt", c.dt);
    take("exact", c.exact);
    take("em", c.em);
    take("checks", c.checks);
    take("l_values", c.l_values);
    take("lemma_m", c.lemma_m);
    take("k_values", c.k_values);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  apply_json(c, j);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config file is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

inline OffspringLaw make_offspring(const std::string& family, double mean) {
  if (family == "poisson") return OffspringLaw::poisson(mean);
  if (family == "geometric") return OffspringLaw::geometric(mean);
  if (family == "two-point") return OffspringLaw::two_point(mean);
  if (family == "deterministic") {
    if (mean != std::floor(mean) || mean < 1.0) {
      throw std::invalid_argument("deterministic offspring needs an integer mean >= 1");
    }
    return OffspringLaw::deterministic(static_cast<Count>(mean));
  }
  throw std::invalid_argument("unknown offspring family: " + family);
}

inline InitialLaw make_initial(const ExperimentConfig& c) {
  if (c.z0_law == "fixed") return InitialLaw::fixed(c.z0);
  if (c.z0_law == "poisson") return InitialLaw::poisson(static_cast<double>(c.z0));
  throw std::invalid_argument("unknown z0_law: " + c.z0_law);
}

/// Builds the named preset. poisson-immigration fixes Poisson(1) offspring;
/// bernoulli-rounding pairs the chosen offspring family of mean m with the
/// rounding control.
inline CbpModel make_model(const ExperimentConfig& c, ModelChecks checks = {}) {
  if (c.preset.empty()) throw std::invalid_argument("missing preset name");
  checks.self_test = checks.self_test && c.self_test;
  if (c.preset == "poisson-immigration") {
    if (c.m != 1.0) throw std::invalid_argument("poisson-immigration requires m = 1");
    if (c.offspring != "poisson") {
      throw std::invalid_argument("poisson-immigration requires poisson offspring");
    }
    return CbpModel(OffspringLaw::poisson(1.0), ControlLaw::poisson_immigration(c.alpha),
                    make_initial(c), checks);
  }
  if (c.preset == "bernoulli-rounding") {
    return CbpModel(make_offspring(c.offspring, c.m), ControlLaw::bernoulli_rounding(c.alpha, c.m),
                    make_initial(c), checks);
  }
  throw std::invalid_argument("unknown preset: " + c.preset);
}

}  // namespace cbpsim
