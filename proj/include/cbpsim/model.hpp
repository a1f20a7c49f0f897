#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cbpsim/laws.hpp"
#include "cbpsim/stats.hpp"

namespace cbpsim {

enum class Criticality { subcritical, critical, supercritical };

inline const char* to_string(Criticality c) {
  switch (c) {
    case Criticality::subcritical: return "subcritical";
    case Criticality::critical: return "critical";
    case Criticality::supercritical: return "supercritical";
  }
  return "?";
}

/// Hypothesis checks run when a model is built.
struct ModelChecks {
  bool hypotheses = true;       // A1 exactness, eps(0) convention, A2 witness
  bool self_test = true;        // statistical check of the samplers
  std::size_t self_test_draws = 100000;
  std::uint64_t self_test_seed = 0x5eed;
  Count horizon = 10000;        // k range for the deterministic checks
};

struct LawCheckRow {
  std::string quantity;  // "mean" or "variance"
  Count k = 0;
  double observed = 0.0;
  double expected = 0.0;
  double se = 0.0;
  bool pass = false;
};

/// Compares empirical mean and variance of `draws` samples with declared
/// values; pass means within `z` standard errors.
inline std::vector<LawCheckRow> check_moments(const Moments& acc, Count k, double mean,
                                              double variance, double z) {
  std::vector<LawCheckRow> rows;
  const double tol = 1e-12 * (1.0 + std::fabs(mean));
  rows.push_back({"mean", k, acc.mean(), mean, acc.standard_error(),
                  std::fabs(acc.mean() - mean) <= z * acc.standard_error() + tol});
  const double vtol = 1e-12 * (1.0 + std::fabs(variance));
  rows.push_back({"variance", k, acc.variance(), variance, acc.variance_standard_error(),
                  std::fabs(acc.variance() - variance) <= z * acc.variance_standard_error() + vtol});
  return rows;
}

inline std::vector<LawCheckRow> self_test_offspring(const OffspringLaw& law, std::size_t draws,
                                                    std::uint64_t seed, double z = 5.0) {
  Stream rng = Stream::derive(seed, {0x0ff5});
  Moments acc;
  for (std::size_t i = 0; i < draws; ++i) acc.add(static_cast<double>(law.draw(rng)));
  return check_moments(acc, 0, law.mean(), law.variance(), z);
}

/// Sampler self-test at k in {0, 1, 10, 100}, plus the reflecting barrier
/// (phi(0) > 0 observed) when alpha > 0.
inline std::vector<LawCheckRow> self_test_control(const ControlLaw& law, std::size_t draws,
                                                  std::uint64_t seed, double z = 5.0) {
  std::vector<LawCheckRow> rows;
  for (Count k : {Count{0}, Count{1}, Count{10}, Count{100}}) {
    Stream rng = Stream::derive(seed, {0xc0, k});
    Moments acc;
    std::size_t positive = 0;
    for (std::size_t i = 0; i < draws; ++i) {
      const Count phi = law.draw(k, rng);
      positive += phi > 0 ? 1 : 0;
      acc.add(static_cast<double>(phi));
    }
    auto r = check_moments(acc, k, law.epsilon(k), law.nu2(k), z);
    rows.insert(rows.end(), r.begin(), r.end());
    if (k == 0 && law.alpha() > 0.0) {
      const double freq = static_cast<double>(positive) / static_cast<double>(draws);
      rows.push_back({"reflecting", 0, freq, 0.0, 0.0, positive > 0});
    }
  }
  return rows;
}

/// A controlled branching process: Z_{n+1} = sum of phi(Z_n) offspring.
class CbpModel {
 public:
  CbpModel(OffspringLaw offspring, ControlLaw control, InitialLaw initial,
           ModelChecks checks = {})
      : offspring_(std::move(offspring)), control_(std::move(control)), initial_(std::move(initial)) {
    if (checks.hypotheses) verify_hypotheses(checks.horizon);
    if (checks.self_test) verify_samplers(checks.self_test_draws, checks.self_test_seed);
  }

  /// Model with no hypothesis or sampler checks, for degenerate and
  /// non-critical configurations.
  static CbpModel unchecked(OffspringLaw offspring, ControlLaw control, InitialLaw initial) {
    return CbpModel(std::move(offspring), std::move(control), std::move(initial),
                    ModelChecks{false, false});
  }

  const OffspringLaw& offspring() const { return offspring_; }
  const ControlLaw& control() const { return control_; }
  const InitialLaw& initial() const { return initial_; }
  double alpha() const { return control_.alpha(); }
  double m() const { return offspring_.mean(); }
  double sigma2() const { return offspring_.variance(); }

  std::string id() const {
    std::ostringstream os;
    os.precision(17);
    os << control_.name() << "/" << offspring_.name() << "(m=" << m() << ",sigma2=" << sigma2()
       << ")/alpha=" << alpha() << "/z0=" << initial_.name() << "(" << initial_.mean() << ")";
    return os.str();
  }

 private:
  void verify_hypotheses(Count horizon) const {
    const double mm = m();
    const double a = alpha();
    if (!(mm > 0.0)) throw std::invalid_argument("offspring mean must be > 0");
    const double eps0 = control_.epsilon(0);
    if (std::fabs(eps0 - a / mm) > 1e-12 * (1.0 + a / mm)) {
      throw std::invalid_argument("control law violates eps(0) = alpha / m");
    }
    for (Count k = 0; k <= horizon; ++k) {
      const double kd = static_cast<double>(k);
      if (k >= 1) {
        const double lhs = mm * control_.epsilon(k);
        if (std::fabs(lhs - kd - a) > 1e-9 * (kd + a)) {
          throw std::invalid_argument("A1 violated: m eps(k) != k + alpha at k = " +
                                      std::to_string(k));
        }
      }
      const double bound =
          control_.nu2_scale() * std::pow(std::max(kd, 1.0), control_.beta());
      const double nu2 = control_.nu2(k);
      if (!(nu2 >= 0.0) || nu2 > bound * (1.0 + 1e-12)) {
        throw std::invalid_argument("A2 witness violated: nu2(k) > C max(k,1)^beta at k = " +
                                    std::to_string(k));
      }
    }
    if (!std::isfinite(initial_.second_moment())) {
      throw std::invalid_argument("initial law needs a finite second moment");
    }
  }

  void verify_samplers(std::size_t draws, std::uint64_t seed) const {
    for (const auto& row : self_test_offspring(offspring_, draws, seed)) {
      if (!row.pass) {
        throw std::invalid_argument("offspring sampler self-test failed on " + row.quantity);
      }
    }
    for (const auto& row : self_test_control(control_, draws, seed)) {
      if (!row.pass) {
        throw std::invalid_argument("control sampler self-test failed on " + row.quantity +
                                    " at k = " + std::to_string(row.k));
      }
    }
  }

  OffspringLaw offspring_;
  ControlLaw control_;
  InitialLaw initial_;
};

/// One realized path Z_0 .. Z_N.
struct Trajectory {
  std::vector<Count> values;
  std::uint64_t seed = 0;
  std::string model_id;

  std::size_t generations() const { return values.empty() ? 0 : values.size() - 1; }
};

/// Draws phi(z) progenitors and sums their offspring; the empty sum is 0.
inline Count sample_generation(Count z, const OffspringLaw& offspring, const ControlLaw& control,
                               Stream& rng) {
  const Count progenitors = control.draw(z, rng);
  return offspring.draw_sum(progenitors, rng);
}

inline Count sample_generation(Count z, const CbpModel& model, Stream& rng) {
  return sample_generation(z, model.offspring(), model.control(), rng);
}

/// Simulates Z_0 .. Z_{n_generations} in place into `out` (reused buffer).
inline void simulate_into(const CbpModel& model, std::size_t n_generations, Stream& rng,
                          std::vector<Count>& out) {
  out.resize(n_generations + 1);
  out[0] = model.initial().draw(rng);
  for (std::size_t g = 1; g <= n_generations; ++g) {
    try {
      out[g] = sample_generation(out[g - 1], model, rng);
    } catch (const PopulationOverflow&) {
      throw PopulationOverflow("population overflow at generation " + std::to_string(g));
    }
  }
}

inline Trajectory simulate(const CbpModel& model, std::size_t n_generations, std::uint64_t seed) {
  if (n_generations < 1) throw std::invalid_argument("n_generations must be >= 1");
  Stream rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.model_id = model.id();
  simulate_into(model, n_generations, rng, traj.values);
  return traj;
}

/// E[Z_{n+1} | Z_n = k] = m eps(k).
inline double conditional_mean(Count k, const CbpModel& model) {
  return model.m() * model.control().epsilon(k);
}

/// Var[Z_{n+1} | Z_n = k] = sigma2 eps(k) + m^2 nu2(k).
inline double conditional_variance(Count k, const CbpModel& model) {
  const double m = model.m();
  return model.sigma2() * model.control().epsilon(k) + m * m * model.control().nu2(k);
}

/// Mean growth rate m eps(k) / k.
inline double tau(Count k, const OffspringLaw& offspring, const ControlLaw& control) {
  if (k < 1) throw std::invalid_argument("tau needs k >= 1");
  return offspring.mean() * control.epsilon(k) / static_cast<double>(k);
}

inline double tau(Count k, const CbpModel& model) {
  return tau(k, model.offspring(), model.control());
}

inline Criticality classify(const OffspringLaw& offspring, const ControlLaw& control) {
  const auto slope = control.epsilon_slope();
  if (!slope) throw std::invalid_argument("control law declares no limit of eps(k)/k");
  const double limit = offspring.mean() * *slope;
  constexpr double tol = 1e-12;
  if (limit < 1.0 - tol) return Criticality::subcritical;
  if (limit > 1.0 + tol) return Criticality::supercritical;
  return Criticality::critical;
}

inline Criticality classify(const CbpModel& model) {
  return classify(model.offspring(), model.control());
}

/// E[Z_k] = E[Z_0] + k alpha under A1.
inline double expected_size(Count k, const CbpModel& model) {
  return model.initial().mean() + static_cast<double>(k) * model.alpha();
}

struct VarianceBound {
  double m1 = 0.0;
  double m2 = 0.0;
  double var_z0 = 0.0;

  /// Cumulative bound k M1 + M2 k(k-1)/2 + Var[Z_0] on Var[Z_k].
  double operator()(Count k) const {
    const double kd = static_cast<double>(k);
    return kd * m1 + 0.5 * m2 * kd * (kd - 1.0) + var_z0;
  }

  /// One-step bound M1 + M2 (k-1) on E[Var[Z_k | F_{k-1}]].
  double conditional(Count k) const {
    return m1 + m2 * (static_cast<double>(k) - 1.0);
  }
};

inline VarianceBound variance_bound_constants(const CbpModel& model) {
  const double m = model.m();
  const double s2 = model.sigma2();
  const double c = model.control().nu2_scale();
  const double ez0 = model.initial().mean();
  const double a = model.alpha();
  VarianceBound b;
  b.m1 = 3.0 * std::max({s2 * ez0 / m, c * m * m * ez0, m * m * model.control().nu2(0)});
  b.m2 = 2.0 * std::max(s2 * a / m, m * m * c * a);
  b.var_z0 = model.initial().variance();
  return b;
}

inline double variance_bound(Count k, const CbpModel& model) {
  return variance_bound_constants(model)(k);
}

/// CSV with header `generation,z`.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "generation,z\n";
  for (std::size_t g = 0; g < traj.values.size(); ++g) os << g << ',' << traj.values[g] << '\n';
}

}  // namespace cbpsim
