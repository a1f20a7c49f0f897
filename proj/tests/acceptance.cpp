// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 5        run criteria 3 and 5
//
// Exit status is 0 only if every selected criterion passes. Supporting
// numbers are printed on indented "info" lines below each verdict.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cbpsim/calibration.hpp"
#include "cbpsim/commands.hpp"
#include "cbpsim/diagnostics.hpp"
#include "cbpsim/diffusion.hpp"
#include "cbpsim/stats.hpp"

namespace {

using namespace cbpsim;

struct Verdict {
  bool pass = false;
  std::vector<std::string> info;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CbpModel preset_p1() {
  ExperimentConfig c;
  c.preset = "poisson-immigration";
  c.alpha = 1.0;
  return make_model(c);
}

const DiffusionParams kUnit(1.0, 1.0, 1.0);

std::string describe(const CheckRow& r) {
  return fmt("%s %s: observed %.6g, expected %.6g, se %.3g, %s within %.0f se -> %s", r.check.c_str(),
             r.label.c_str(), r.observed, r.expected, r.se, to_string(r.comparison), r.z,
             r.pass ? "ok" : "MISS");
}

std::string describe(const TrendCheck& t) {
  std::string s = t.name + ":";
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    s += fmt(" n=%.0f %.6g", t.keys[i], t.values[i]);
    if (!t.se.empty()) s += fmt(" (se %.2g)", t.se[i]);
  }
  return s + fmt(", ties %zu/%zu -> %s", t.ties, t.max_ties, t.pass ? "ok" : "MISS");
}

// 1. E[Z_k] = k for P1 (alpha = 1, Z_0 = 0), 10^4 paths, 5 SE.
Verdict mean_identity() {
  const DiagnosticReport r = moment_report(preset_p1(), {1, 10, 100}, 10000, 101);
  Verdict v{true, {}};
  for (const auto& row : r.checks) {
    if (row.check != "mean_Zk") continue;
    v.pass = v.pass && row.pass;
    v.info.push_back(describe(row));
  }
  return v;
}

// 2. One-step conditional mean and variance, 10^6 draws, 5 SE.
Verdict conditional_moments() {
  const DiagnosticReport r = conditional_moment_report(preset_p1(), {0, 1, 10, 100}, 1000000, 202);
  Verdict v{r.passed(), {}};
  for (const auto& row : r.checks) v.info.push_back(describe(row));
  return v;
}

// 3. E[(sum_{j != j'} Y_j Y_j')^2] = 2 l (l - 1) sigma^4 with sigma^2 = 1.
Verdict lemma1() {
  Verdict v{true, {}};
  for (std::size_t l : {2u, 3u, 5u}) {
    const CheckRow row = lemma1_identity(OffspringLaw::poisson(1.0), l, 1000000, 303);
    v.pass = v.pass && row.pass;
    v.info.push_back(describe(row));
  }
  return v;
}

// 4. Exact sampler moments at t = 1 from 0, and Chapman-Kolmogorov by KS.
Verdict exact_sampler() {
  Verdict v{true, {}};
  Stream rng = Stream::derive(404, {1});
  Moments acc;
  for (double x : marginal_sample(1.0, 0.0, kUnit, rng, 1000000)) acc.add(x);
  const double var_oracle = kUnit.alpha * kUnit.sigma2 / (2.0 * kUnit.m);  // alpha sigma2 t^2 / 2m
  const CheckRow mean = CheckRow::make("exact_mean", "t=1", acc.mean(), 1.0, acc.standard_error(), 4.0,
                                       Comparison::two_sided);
  const CheckRow var = CheckRow::make("exact_variance", "t=1", acc.variance(), var_oracle,
                                      acc.variance_standard_error(), 4.0, Comparison::two_sided);
  v.pass = mean.pass && var.pass;
  v.info.push_back(describe(mean));
  v.info.push_back(describe(var));

  // X(1) drawn directly vs chained through X(1/2), from x0 = 0.
  const std::size_t n = 100000;
  int passes = 0;
  std::string ks_list;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Stream r = Stream::derive(404, {2, seed});
    std::vector<double> direct(n), chained(n);
    for (auto& x : direct) x = exact_transition(0.0, 1.0, kUnit, r);
    for (auto& x : chained) x = exact_transition(exact_transition(0.0, 0.5, kUnit, r), 0.5, kUnit, r);
    const double ks = ks_two_sample(direct, chained);
    passes += ks < ks_critical_value(n, n) ? 1 : 0;
    ks_list += fmt(" %.4f", ks);
  }
  v.pass = v.pass && passes >= 8;
  v.info.push_back(fmt("chapman-kolmogorov KS (critical %.4f):%s -> %d/10 pass (need 8)",
                       ks_critical_value(n, n), ks_list.c_str(), passes));
  return v;
}

struct EmSample {
  Moments terminal;
};

EmSample run_em(double dt, std::size_t paths, std::uint64_t seed) {
  const auto grid = uniform_grid(1.0, dt);
  Stream rng = Stream::derive(seed, {static_cast<std::uint64_t>(std::llround(1.0 / dt))});
  EmSample s;
  for (std::size_t p = 0; p < paths; ++p) {
    s.terminal.add(euler_maruyama_path(0.0, grid, kUnit, rng).values.back());
  }
  return s;
}

// 5. Euler-Maruyama (dt = 2^-10) against the exact sampler at t = 1, and the
//    weak-order ratio of mean errors between dt and dt/2 over 5 seeds.
Verdict scheme_cross_validation() {
  Verdict v{true, {}};
  const double dt = 1.0 / 1024;
  const double alpha = kUnit.alpha;
  Stream rng = Stream::derive(505, {1});
  Moments exact;
  for (double x : marginal_sample(1.0, 0.0, kUnit, rng, 1000000)) exact.add(x);
  const EmSample em = run_em(dt, 100000, 505);
  const double mean_se = std::hypot(exact.standard_error(), em.terminal.standard_error());
  const double var_se = std::hypot(exact.variance_standard_error(), em.terminal.variance_standard_error());
  const double mean_gap = std::fabs(em.terminal.mean() - exact.mean());
  const double var_gap = std::fabs(em.terminal.variance() - exact.variance());
  const bool mean_ok = mean_gap <= 4 * mean_se + 2 * dt * alpha;
  const bool var_ok = var_gap <= 4 * var_se + 2 * dt * alpha;
  v.info.push_back(fmt("mean: EM %.6f vs exact %.6f, |gap| %.3g <= 4 se + 2 dt alpha = %.3g -> %s",
                       em.terminal.mean(), exact.mean(), mean_gap, 4 * mean_se + 2 * dt * alpha,
                       mean_ok ? "ok" : "MISS"));
  v.info.push_back(fmt("variance: EM %.6f vs exact %.6f, |gap| %.3g <= 4 se + 2 dt alpha = %.3g -> %s",
                       em.terminal.variance(), exact.variance(), var_gap, 4 * var_se + 2 * dt * alpha,
                       var_ok ? "ok" : "MISS"));

  // Weak order against the exact mean x0 + alpha t = 1.
  double ratio_sum = 0.0, var_ratio_sum = 0.0;
  const double var_exact = kUnit.a() * kUnit.alpha;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const EmSample coarse = run_em(dt, 100000, 5050 + seed);
    const EmSample fine = run_em(dt / 2, 100000, 5050 + seed);
    const double e1 = std::fabs(coarse.terminal.mean() - 1.0);
    const double e2 = std::fabs(fine.terminal.mean() - 1.0);
    ratio_sum += e1 / e2;
    const double ve1 = std::fabs(coarse.terminal.variance() - var_exact);
    const double ve2 = std::fabs(fine.terminal.variance() - var_exact);
    var_ratio_sum += ve1 / ve2;
    v.info.push_back(fmt("seed %llu: mean error dt %.3g (se %.2g), dt/2 %.3g (se %.2g), ratio %.3f",
                         static_cast<unsigned long long>(seed), e1, coarse.terminal.standard_error(),
                         e2, fine.terminal.standard_error(), e1 / e2));
  }
  const double ratio = ratio_sum / 5.0;
  const bool order_ok = ratio >= 1.4 && ratio <= 2.6;
  v.info.push_back(fmt("weak order: mean-error ratio averaged over 5 seeds %.3f, need [1.4, 2.6] -> %s",
                       ratio, order_ok ? "ok" : "MISS"));
  v.info.push_back(fmt("(not scored) variance-error ratio averaged over 5 seeds %.3f", var_ratio_sum / 5.0));
  v.pass = mean_ok && var_ok && order_ok;
  return v;
}

ExperimentConfig default_converge_config(std::uint64_t seed, std::size_t threads) {
  ExperimentConfig c;
  c.preset = "poisson-immigration";
  c.alpha = 1.0;
  c.seed = seed;
  c.threads = threads;
  return c;
}

// 6. KS distance of W_n(1) to the exact marginal decreases in n (one tie
//    within 2 SE allowed) and ends under the calibrated threshold.
Verdict functional_limit() {
  const ConvergenceStudy study = make_study(default_converge_config(7, 1));
  const DiagnosticReport r = marginal_convergence(study);
  Verdict v{r.passed(), {}};
  for (const auto& t : r.trends) v.info.push_back(describe(t));
  for (const auto& t : r.thresholds) {
    v.info.push_back(fmt("%s: %.6g <= %.6g (%s) -> %s", t.name.c_str(), t.value, t.threshold,
                         t.source.c_str(), t.pass ? "ok" : "MISS"));
  }
  for (const auto& c : r.checks) v.info.push_back(describe(c));
  return v;
}

// 7. Condition a is exactly 0; median condition-b gap and mean Lindeberg
//    sum strictly decrease over n = 10, 100, 1000.
Verdict proof_condition_trends() {
  ConditionOptions opt;
  opt.paths = 1000;
  opt.horizon = 1.0;
  opt.resamples = 200;
  opt.master_seed = 707;
  const DiagnosticReport r = proof_conditions(preset_p1(), {10, 100, 1000}, {0.1}, opt);
  Verdict v{true, {}};
  for (const auto& c : r.checks) {
    v.pass = v.pass && c.pass;
    v.info.push_back(describe(c));
  }
  for (const auto& t : r.trends) {
    v.pass = v.pass && t.pass && t.ties == 0;
    v.info.push_back(describe(t));
  }
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 8. cmd_converge output is byte-identical across runs and thread counts.
Verdict determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "cbpsim_acceptance_determinism";
  fs::remove_all(root);
  struct Run {
    std::string name;
    std::size_t threads;
  };
  const std::vector<Run> runs{{"threads1_a", 1}, {"threads1_b", 1}, {"threads8", 8}};
  Verdict v{true, {}};
  for (const auto& run : runs) {
    ExperimentConfig c = default_converge_config(8, run.threads);
    c.out_dir = (root / run.name).string();
    std::ostringstream log;
    const auto start = std::chrono::steady_clock::now();
    cmd_converge(c, "acceptance", false, log);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.info.push_back(fmt("%s: cmd_converge in %.1f s", run.name.c_str(), secs));
  }
  for (const char* file : {"report.json", "report.txt", "convergence.csv"}) {
    const std::string ref = slurp(root / runs[0].name / file);
    bool same = !ref.empty();
    for (std::size_t i = 1; i < runs.size(); ++i) same = same && slurp(root / runs[i].name / file) == ref;
    v.pass = v.pass && same;
    v.info.push_back(fmt("%s (%zu bytes): %s", file, ref.size(), same ? "identical" : "DIFFERS"));
  }
  fs::remove_all(root);
  return v;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "mean identity E[Z_k] = k", mean_identity},
      {2, "conditional mean and variance", conditional_moments},
      {3, "lemma 1 identity 2l(l-1)sigma^4", lemma1},
      {4, "exact diffusion sampler", exact_sampler},
      {5, "Euler-Maruyama cross-validation and weak order", scheme_cross_validation},
      {6, "functional limit: KS decreasing and under calibrated threshold", functional_limit},
      {7, "proof-condition diagnostics a, b, c", proof_condition_trends},
      {8, "determinism and thread invariance of converge", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    try {
      selected.insert(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::cerr << "usage: acceptance [criterion ...]\n";
      return 2;
    }
  }
  bool all = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = Verdict{false, {std::string("exception: ") + e.what()}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name
              << fmt(" (%.1f s)", secs) << '\n';
    for (const auto& line : v.info) std::cout << "    info: " << line << '\n';
    std::cout.flush();
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
