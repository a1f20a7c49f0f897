#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cbpsim/diffusion.hpp"
#include "cbpsim/model.hpp"
#include "cbpsim/parallel.hpp"
#include "cbpsim/report.hpp"
#include "cbpsim/scaling.hpp"
#include "cbpsim/stats.hpp"

namespace cbpsim {

namespace stream_tag {
inline constexpr std::uint64_t convergence_path = 0x10;
inline constexpr std::uint64_t convergence_reference = 0x11;
inline constexpr std::uint64_t condition_b_path = 0x20;
inline constexpr std::uint64_t condition_c_path = 0x30;
inline constexpr std::uint64_t condition_c_bootstrap = 0x31;
inline constexpr std::uint64_t moment_path = 0x40;
inline constexpr std::uint64_t one_step = 0x50;
inline constexpr std::uint64_t lemma = 0x60;
}  // namespace stream_tag

namespace detail {

/// Shortest text that round-trips to the same double (0.1, not 0.10000000000000001).
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(static_cast<double>(v[i]));
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

}  // namespace detail

/// Configuration of a convergence study of W_n(t) towards the diffusion
/// marginal at t, started from W(0) = 0.
struct ConvergenceStudy {
  CbpModel model;
  DiffusionParams params;
  std::vector<std::size_t> n_values{10, 50, 250, 1250};
  std::vector<double> t_checkpoints{1.0};
  double horizon = 1.0;
  std::size_t replicates = 10000;
  std::size_t reference_factor = 10;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  double tie_band = 2.0;
  std::size_t max_ties = 1;
  std::optional<double> ks_threshold;
  std::string ks_threshold_source;

  explicit ConvergenceStudy(CbpModel m) : model(std::move(m)), params(DiffusionParams::from_model(model)) {}

  void validate() const {
    params.validate();
    auto same = [](double a, double b) { return std::fabs(a - b) <= 1e-12 * (1.0 + std::fabs(a)); };
    if (!same(params.alpha, model.alpha()) || !same(params.m, model.m()) ||
        !same(params.sigma2, model.sigma2())) {
      throw std::invalid_argument("diffusion params must match the model's alpha, m, sigma2");
    }
    if (n_values.empty()) throw std::invalid_argument("n_values must be non-empty");
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      if (n_values[i] == 0) throw std::invalid_argument("n_values must be positive");
      if (i > 0 && n_values[i] <= n_values[i - 1]) {
        throw std::invalid_argument("n_values must be increasing");
      }
    }
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (t_checkpoints.empty()) throw std::invalid_argument("t_checkpoints must be non-empty");
    for (double t : t_checkpoints) {
      if (!(t > 0.0) || t > horizon) throw std::invalid_argument("t_checkpoints must lie in (0, T]");
    }
    if (replicates == 0) throw std::invalid_argument("replicates must be positive");
    if (reference_factor == 0) throw std::invalid_argument("reference_factor must be positive");
  }
};

/// Marginal draws of W_n(t) for every checkpoint; samples[j][r] is replicate r at t_j.
struct ScaledMarginals {
  std::vector<std::vector<double>> samples;
  double max_form_gap = 0.0;  // worst disagreement of the two martingale step forms
};

inline ScaledMarginals scaled_marginals(const ConvergenceStudy& study, std::size_t n) {
  const std::size_t generations = StepPath::floor_index(study.horizon, n);
  const std::size_t nt = study.t_checkpoints.size();
  std::vector<std::size_t> index(nt);
  for (std::size_t j = 0; j < nt; ++j) index[j] = StepPath::floor_index(study.t_checkpoints[j], n);

  std::vector<double> flat(study.replicates * nt);
  std::vector<double> gaps(study.replicates);
  parallel_for(study.replicates, study.threads, [&](std::size_t r) {
    Stream rng = Stream::derive(study.master_seed, {stream_tag::convergence_path, n, r});
    Trajectory traj;
    simulate_into(study.model, std::max<std::size_t>(generations, 1), rng, traj.values);
    for (std::size_t j = 0; j < nt; ++j) {
      flat[r * nt + j] = static_cast<double>(traj.values[index[j]]) / static_cast<double>(n);
    }
    gaps[r] = martingale_forms_gap(martingale_step_forms(traj, n, study.horizon, study.model.alpha()));
  });

  ScaledMarginals out;
  out.samples.assign(nt, std::vector<double>(study.replicates));
  for (std::size_t r = 0; r < study.replicates; ++r) {
    for (std::size_t j = 0; j < nt; ++j) out.samples[j][r] = flat[r * nt + j];
  }
  out.max_form_gap = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
  return out;
}

/// Reference draws of W(t) from the exact transition, shared by every n.
inline std::vector<double> reference_marginal(const ConvergenceStudy& study, std::size_t t_index) {
  const std::size_t count = study.replicates * study.reference_factor;
  constexpr std::size_t chunk = 4096;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  std::vector<double> out(count);
  const double t = study.t_checkpoints[t_index];
  parallel_for(chunks, study.threads, [&](std::size_t c) {
    Stream rng = Stream::derive(study.master_seed, {stream_tag::convergence_reference, t_index, c});
    const std::size_t end = std::min(count, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) out[i] = exact_transition(0.0, t, study.params, rng);
  });
  return out;
}

/// KS distance between W_n(t) and the exact diffusion marginal for every
/// (n, t), with a decreasing-trend check per t and an optional threshold on
/// the largest n.
inline DiagnosticReport marginal_convergence(const ConvergenceStudy& study) {
  study.validate();
  DiagnosticReport report;
  report.metadata["study"] = "marginal_convergence";
  report.metadata["model"] = study.model.id();
  report.metadata["n_values"] = detail::join(study.n_values);
  report.metadata["t_checkpoints"] = detail::join(study.t_checkpoints);
  report.metadata["horizon"] = detail::format_double(study.horizon);
  report.metadata["replicates"] = std::to_string(study.replicates);
  report.metadata["reference_size"] = std::to_string(study.replicates * study.reference_factor);
  report.metadata["master_seed"] = std::to_string(study.master_seed);
  report.metadata["ks_se"] = "null sd of the two-sample KS statistic, 0.2603/sqrt(n_eff)";

  const std::size_t nt = study.t_checkpoints.size();
  const std::size_t ref_size = study.replicates * study.reference_factor;
  std::vector<std::vector<double>> references(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    references[j] = reference_marginal(study, j);
    std::sort(references[j].begin(), references[j].end());
  }
  const double se = ks_standard_error(study.replicates, ref_size);
  const double crit = ks_critical_value(study.replicates, ref_size);

  std::vector<TrendCheck> trends(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    trends[j].name = "ks_decreasing_t=" + detail::format_double(study.t_checkpoints[j]);
    trends[j].band = study.tie_band;
    trends[j].max_ties = study.max_ties;
  }
  double worst_gap = 0.0;
  for (std::size_t n : study.n_values) {
    auto marg = scaled_marginals(study, n);
    worst_gap = std::max(worst_gap, marg.max_form_gap);
    for (std::size_t j = 0; j < nt; ++j) {
      std::sort(marg.samples[j].begin(), marg.samples[j].end());
      const double ks = ks_two_sample_sorted(marg.samples[j], references[j]);
      report.ks_rows.push_back({n, study.t_checkpoints[j], ks, se, crit});
      trends[j].keys.push_back(static_cast<double>(n));
      trends[j].values.push_back(ks);
      trends[j].se.push_back(se);
    }
  }
  for (auto& t : trends) {
    t.evaluate_into();
    report.trends.push_back(t);
  }
  report.checks.push_back(CheckRow::make("martingale_forms", "max relative gap", worst_gap, 0.0,
                                         0.0, 0.0, Comparison::equal, 1e-9));
  if (study.ks_threshold) {
    for (std::size_t j = 0; j < nt; ++j) {
      ThresholdCheck tc;
      tc.name = "ks_final_n=" + std::to_string(study.n_values.back()) +
                "_t=" + detail::format_double(study.t_checkpoints[j]);
      tc.value = trends[j].values.back();
      tc.threshold = *study.ks_threshold;
      tc.source = study.ks_threshold_source;
      tc.pass = tc.evaluate();
      report.thresholds.push_back(tc);
    }
  }
  return report;
}

/// sup_{t in [0,T]} | n^-2 sum_{k<=nt} Var[Z_k | F_{k-1}]
///                   - int_0^t (sigma2/m)(M_n(s) + alpha s)^+ ds |
/// for one path. Within [K/n, (K+1)/n) the difference is the value at K/n
/// minus (sigma2/m)(u Z_K + u^2 alpha / 2) / n^2, u = nt - K, which is
/// monotone in u; the sup is attained at a grid point, a left limit, or T.
inline double condition_b_gap(const std::vector<Count>& z, const CbpModel& model, std::size_t n,
                              double horizon) {
  const std::size_t last = StepPath::floor_index(horizon, n);
  if (z.size() < last + 1) throw std::invalid_argument("condition_b_gap: path too short");
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const double ratio = model.sigma2() / model.m();
  const double alpha = model.alpha();
  double var_sum = 0.0;  // sum_{k=1}^{K} Var[Z_k | F_{k-1}]
  double z_sum = 0.0;    // sum_{k=0}^{K-1} Z_k
  double sup = 0.0;
  auto gap_at = [&](std::size_t k, double u) {
    const double zk = static_cast<double>(z[k]);
    const double integral =
        (z_sum + u * zk + 0.5 * (static_cast<double>(k) + u * u) * alpha) / n2;
    return var_sum / n2 - ratio * integral;
  };
  for (std::size_t k = 0; k <= last; ++k) {
    if (k > 0) {
      var_sum += conditional_variance(z[k - 1], model);
      z_sum += static_cast<double>(z[k - 1]);
    }
    sup = std::max(sup, std::fabs(gap_at(k, 0.0)));
    if (k < last) {
      sup = std::max(sup, std::fabs(gap_at(k, 1.0)));  // left limit at (k+1)/n
    } else {
      const double u_end = horizon * static_cast<double>(n) - static_cast<double>(last);
      if (u_end > 0.0) sup = std::max(sup, std::fabs(gap_at(k, std::min(u_end, 1.0))));
    }
  }
  return sup;
}

/// n^-2 sum_{k<=nT} E[M_k^2 1{|M_k| > n theta} | F_{k-1}] for one path, each
/// conditional expectation estimated from R fresh one-step transitions.
inline double lindeberg_sum(const std::vector<Count>& z, const CbpModel& model, std::size_t n,
                            double horizon, double theta, std::size_t resamples, Stream& rng) {
  const std::size_t last = StepPath::floor_index(horizon, n);
  if (z.size() < last + 1) throw std::invalid_argument("lindeberg_sum: path too short");
  const double cut = static_cast<double>(n) * theta;
  const double alpha = model.alpha();
  double total = 0.0;
  for (std::size_t k = 1; k <= last; ++k) {
    const Count prev = z[k - 1];
    const double base = static_cast<double>(prev) + alpha;
    double acc = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
      const double mk = static_cast<double>(sample_generation(prev, model, rng)) - base;
      if (std::fabs(mk) > cut) acc += mk * mk;
    }
    total += acc / static_cast<double>(resamples);
  }
  return total / (static_cast<double>(n) * static_cast<double>(n));
}

/// sup_k |E[M_k | F_{k-1}]| evaluated on the closed forms, scaled by
/// 1 + z + alpha, over z in [0, horizon].
inline double condition_a_gap(const CbpModel& model, Count horizon = 10000) {
  double worst = 0.0;
  for (Count z = 0; z <= horizon; ++z) {
    const double zd = static_cast<double>(z);
    const double drift = conditional_mean(z, model) - zd - model.alpha();
    worst = std::max(worst, std::fabs(drift) / (1.0 + zd + model.alpha()));
  }
  return worst;
}

struct ConditionOptions {
  std::size_t paths = 1000;
  double horizon = 1.0;
  std::size_t resamples = 200;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
};

/// Median condition-b gap over simulated paths.
inline ConditionRow condition_b_summary(const CbpModel& model, std::size_t n,
                                        const ConditionOptions& opt) {
  const std::size_t generations = std::max<std::size_t>(StepPath::floor_index(opt.horizon, n), 1);
  std::vector<double> gaps(opt.paths);
  parallel_for(opt.paths, opt.threads, [&](std::size_t p) {
    Stream rng = Stream::derive(opt.master_seed, {stream_tag::condition_b_path, n, p});
    std::vector<Count> z;
    simulate_into(model, generations, rng, z);
    gaps[p] = condition_b_gap(z, model, n, opt.horizon);
  });
  Moments acc;
  for (double g : gaps) acc.add(g);
  // Normal-theory SE of a median, sqrt(pi/2) times the SE of the mean.
  return {"b", n, median(gaps), 1.2533141373155 * acc.standard_error(), "median over paths"};
}

/// Mean Lindeberg sum over simulated paths.
inline ConditionRow condition_c_summary(const CbpModel& model, std::size_t n, double theta,
                                        const ConditionOptions& opt) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
  if (opt.resamples < 100) throw std::invalid_argument("need at least 100 resamples");
  const std::size_t generations = std::max<std::size_t>(StepPath::floor_index(opt.horizon, n), 1);
  std::vector<double> sums(opt.paths);
  parallel_for(opt.paths, opt.threads, [&](std::size_t p) {
    Stream path_rng = Stream::derive(opt.master_seed, {stream_tag::condition_c_path, n, p});
    Stream boot_rng = Stream::derive(opt.master_seed, {stream_tag::condition_c_bootstrap, n, p});
    std::vector<Count> z;
    simulate_into(model, generations, path_rng, z);
    sums[p] = lindeberg_sum(z, model, n, opt.horizon, theta, opt.resamples, boot_rng);
  });
  Moments acc;
  for (double s : sums) acc.add(s);
  return {"c", n, acc.mean(), acc.standard_error(),
          "mean over paths, theta=" + detail::format_double(theta)};
}

/// Conditions a, b and c over increasing n, each with a strict decreasing
/// trend check (a is an exact identity instead).
inline DiagnosticReport proof_conditions(const CbpModel& model, const std::vector<std::size_t>& ns,
                                         const std::vector<double>& thetas,
                                         const ConditionOptions& opt) {
  DiagnosticReport report;
  report.metadata["study"] = "proof_conditions";
  report.metadata["model"] = model.id();
  report.metadata["paths"] = std::to_string(opt.paths);
  report.metadata["resamples"] = std::to_string(opt.resamples);
  report.metadata["horizon"] = detail::format_double(opt.horizon);
  report.metadata["master_seed"] = std::to_string(opt.master_seed);
  report.metadata["condition_b_statistic"] = "median of per-path sup gap";
  report.metadata["condition_c_statistic"] = "mean of per-path Lindeberg sums";

  const double a_gap = condition_a_gap(model);
  report.conditions.push_back({"a", 0, a_gap, 0.0, "sup over z <= 1e4 of |E[M|Z=z]|/(1+z+alpha)"});
  report.checks.push_back(CheckRow::make("condition_a", "closed-form drift", a_gap, 0.0, 0.0, 0.0,
                                         Comparison::equal, 1e-12));

  TrendCheck b_trend;
  b_trend.name = "condition_b_decreasing";
  for (std::size_t n : ns) {
    auto row = condition_b_summary(model, n, opt);
    report.conditions.push_back(row);
    b_trend.keys.push_back(static_cast<double>(n));
    b_trend.values.push_back(row.value);
    b_trend.se.push_back(row.se);
  }
  b_trend.evaluate_into();
  report.trends.push_back(b_trend);

  for (double theta : thetas) {
    TrendCheck c_trend;
    c_trend.name = "condition_c_decreasing_theta=" + detail::format_double(theta);
    for (std::size_t n : ns) {
      auto row = condition_c_summary(model, n, theta, opt);
      report.conditions.push_back(row);
      c_trend.keys.push_back(static_cast<double>(n));
      c_trend.values.push_back(row.value);
      c_trend.se.push_back(row.se);
    }
    c_trend.evaluate_into();
    report.trends.push_back(c_trend);
  }
  return report;
}

/// Empirical mean of Z_k against E[Z_0] + k alpha (5 SE, two-sided) and
/// empirical variance against the cumulative bound (3 SE, one-sided).
inline DiagnosticReport moment_report(const CbpModel& model, const std::vector<Count>& ks,
                                      std::size_t replicates, std::uint64_t master_seed,
                                      std::size_t threads = 1) {
  if (ks.empty()) throw std::invalid_argument("moment_report needs at least one k");
  const Count kmax = *std::max_element(ks.begin(), ks.end());
  const std::size_t nk = ks.size();
  std::vector<double> flat(replicates * nk);
  parallel_for(replicates, threads, [&](std::size_t r) {
    Stream rng = Stream::derive(master_seed, {stream_tag::moment_path, r});
    std::vector<Count> z;
    simulate_into(model, std::max<Count>(kmax, 1), rng, z);
    for (std::size_t i = 0; i < nk; ++i) flat[r * nk + i] = static_cast<double>(z[ks[i]]);
  });
  const auto bound = variance_bound_constants(model);
  DiagnosticReport report;
  report.metadata["study"] = "moments";
  report.metadata["model"] = model.id();
  report.metadata["replicates"] = std::to_string(replicates);
  report.metadata["master_seed"] = std::to_string(master_seed);
  report.metadata["M1"] = detail::format_double(bound.m1);
  report.metadata["M2"] = detail::format_double(bound.m2);
  for (std::size_t i = 0; i < nk; ++i) {
    Moments acc;
    for (std::size_t r = 0; r < replicates; ++r) acc.add(flat[r * nk + i]);
    const std::string label = "k=" + std::to_string(ks[i]);
    const double expected = expected_size(ks[i], model);
    report.checks.push_back(CheckRow::make("mean_Zk", label, acc.mean(), expected,
                                           acc.standard_error(), 5.0, Comparison::two_sided,
                                           1e-9 * (1.0 + expected)));
    report.checks.push_back(CheckRow::make("variance_bound_Zk", label, acc.variance(), bound(ks[i]),
                                           acc.variance_standard_error(), 3.0, Comparison::upper,
                                           1e-9));
  }
  return report;
}

/// One-step draws from Z = k against the conditional mean and variance
/// closed forms, 5 SE two-sided.
inline DiagnosticReport conditional_moment_report(const CbpModel& model, const std::vector<Count>& ks,
                                                  std::size_t draws, std::uint64_t master_seed,
                                                  std::size_t threads = 1) {
  DiagnosticReport report;
  report.metadata["study"] = "conditional_moments";
  report.metadata["model"] = model.id();
  report.metadata["draws"] = std::to_string(draws);
  constexpr std::size_t chunk = 1 << 14;
  for (Count k : ks) {
    const std::size_t chunks = (draws + chunk - 1) / chunk;
    std::vector<double> values(draws);
    parallel_for(chunks, threads, [&](std::size_t c) {
      Stream rng = Stream::derive(master_seed, {stream_tag::one_step, k, c});
      const std::size_t end = std::min(draws, (c + 1) * chunk);
      for (std::size_t i = c * chunk; i < end; ++i) {
        values[i] = static_cast<double>(sample_generation(k, model, rng));
      }
    });
    Moments acc;
    for (double v : values) acc.add(v);
    const std::string label = "k=" + std::to_string(k);
    const double mean = conditional_mean(k, model);
    const double var = conditional_variance(k, model);
    report.checks.push_back(CheckRow::make("conditional_mean", label, acc.mean(), mean,
                                           acc.standard_error(), 5.0, Comparison::two_sided,
                                           1e-9 * (1.0 + mean)));
    report.checks.push_back(CheckRow::make("conditional_variance", label, acc.variance(), var,
                                           acc.variance_standard_error(), 5.0,
                                           Comparison::two_sided, 1e-9 * (1.0 + var)));
  }
  return report;
}

/// E[(sum_{j != j'} (X_j - m)(X_j' - m))^2] against 2 l (l - 1) sigma^4,
/// over ordered pairs, 4 SE two-sided.
inline CheckRow lemma1_identity(const OffspringLaw& offspring, std::size_t l, std::size_t replicates,
                                std::uint64_t master_seed, std::size_t threads = 1) {
  if (l < 2) throw std::invalid_argument("lemma1 identity needs l >= 2");
  constexpr std::size_t chunk = 1 << 14;
  const std::size_t chunks = (replicates + chunk - 1) / chunk;
  std::vector<double> values(replicates);
  const double m = offspring.mean();
  parallel_for(chunks, threads, [&](std::size_t c) {
    Stream rng = Stream::derive(master_seed, {stream_tag::lemma, 1, l, c});
    const std::size_t end = std::min(replicates, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      double sum = 0.0;
      double sum_sq = 0.0;
      for (std::size_t j = 0; j < l; ++j) {
        const double y = static_cast<double>(offspring.draw(rng)) - m;
        sum += y;
        sum_sq += y * y;
      }
      const double cross = sum * sum - sum_sq;  // ordered pairs j != j'
      values[i] = cross * cross;
    }
  });
  Moments acc;
  for (double v : values) acc.add(v);
  const double s2 = offspring.variance();
  const double target = 2.0 * static_cast<double>(l) * static_cast<double>(l - 1) * s2 * s2;
  return CheckRow::make("lemma1_identity", "l=" + std::to_string(l), acc.mean(), target,
                        acc.standard_error(), 4.0, Comparison::two_sided, 1e-12);
}

/// E[sum_j (X_j - m)^2 1{|S~_j| > M}] <= l^2 sigma^4 / M^2, where S~_j is
/// the centred sum without j; 4 SE one-sided.
inline CheckRow lemma1_inequality(const OffspringLaw& offspring, std::size_t l, double threshold,
                                  std::size_t replicates, std::uint64_t master_seed,
                                  std::size_t threads = 1) {
  if (l < 1 || !(threshold > 0.0)) throw std::invalid_argument("lemma1 inequality needs l>=1, M>0");
  constexpr std::size_t chunk = 1 << 14;
  const std::size_t chunks = (replicates + chunk - 1) / chunk;
  std::vector<double> values(replicates);
  const double m = offspring.mean();
  parallel_for(chunks, threads, [&](std::size_t c) {
    Stream rng = Stream::derive(master_seed,
                                {stream_tag::lemma, 2, l, static_cast<std::uint64_t>(threshold * 1e6), c});
    std::vector<double> y(l);
    const std::size_t end = std::min(replicates, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      double sum = 0.0;
      for (auto& v : y) {
        v = static_cast<double>(offspring.draw(rng)) - m;
        sum += v;
      }
      double acc = 0.0;
      for (double v : y) {
        if (std::fabs(sum - v) > threshold) acc += v * v;
      }
      values[i] = acc;
    }
  });
  Moments acc;
  for (double v : values) acc.add(v);
  const double s2 = offspring.variance();
  const double ld = static_cast<double>(l);
  const double bound = ld * ld * s2 * s2 / (threshold * threshold);
  return CheckRow::make("lemma1_inequality",
                        "l=" + std::to_string(l) + ",M=" + detail::format_double(threshold),
                        acc.mean(), bound, acc.standard_error(), 4.0, Comparison::upper, 1e-12);
}

}  // namespace cbpsim
