#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cbpsim {

enum class Comparison {
  two_sided,  // |observed - expected| <= z se + tol
  upper,      // observed <= expected + z se + tol
  equal,      // |observed - expected| <= tol
};

inline const char* to_string(Comparison c) {
  switch (c) {
    case Comparison::two_sided: return "two_sided";
    case Comparison::upper: return "upper";
    case Comparison::equal: return "equal";
  }
  return "?";
}

inline Comparison comparison_from_string(const std::string& s) {
  if (s == "two_sided") return Comparison::two_sided;
  if (s == "upper") return Comparison::upper;
  if (s == "equal") return Comparison::equal;
  throw std::invalid_argument("unknown comparison: " + s);
}

/// One observed-vs-expected check. `pass` is always evaluate().
struct CheckRow {
  std::string check;
  std::string label;
  double observed = 0.0;
  double expected = 0.0;
  double se = 0.0;
  double z = 0.0;
  double tol = 0.0;
  Comparison comparison = Comparison::two_sided;
  bool pass = false;

  bool evaluate() const {
    switch (comparison) {
      case Comparison::two_sided:
        return std::fabs(observed - expected) <= z * se + tol;
      case Comparison::upper:
        return observed <= expected + z * se + tol;
      case Comparison::equal:
        return std::fabs(observed - expected) <= tol;
    }
    return false;
  }

  static CheckRow make(std::string check, std::string label, double observed, double expected,
                       double se, double z, Comparison cmp, double tol = 0.0) {
    CheckRow r{std::move(check), std::move(label), observed, expected, se, z, tol, cmp, false};
    r.pass = r.evaluate();
    return r;
  }
};

struct KsRow {
  std::size_t n = 0;
  double t = 0.0;
  double ks = 0.0;
  double se = 0.0;
  double critical = 0.0;  // 1% two-sample critical value
};

/// Proof-condition estimate at one scaling index.
struct ConditionRow {
  std::string condition;  // "a", "b" or "c"
  std::size_t n = 0;
  double value = 0.0;
  double se = 0.0;
  std::string summary;  // statistic reported across paths
};

/// Decreasing-trend check. Step i -> i+1 is a decrease if values[i+1] <
/// values[i], a tie if it does not increase by more than band * max(se_i,
/// se_{i+1}), and a failure otherwise.
struct TrendCheck {
  std::string name;
  std::vector<double> keys;
  std::vector<double> values;
  std::vector<double> se;
  double band = 0.0;
  std::size_t max_ties = 0;
  std::size_t ties = 0;
  bool pass = false;

  void evaluate_into() {
    ties = 0;
    bool ok = values.size() >= 2;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double step = values[i + 1] - values[i];
      if (step < 0.0) continue;
      const double s = se.empty() ? 0.0 : std::max(se[i], se[i + 1]);
      if (band > 0.0 && step <= band * s) {
        ++ties;
      } else {
        ok = false;
      }
    }
    pass = ok && ties <= max_ties;
  }

  bool evaluate() const {
    TrendCheck copy = *this;
    copy.evaluate_into();
    return copy.pass;
  }

  /// True when the stored flag and tie count match a recomputation.
  bool consistent() const {
    TrendCheck copy = *this;
    copy.evaluate_into();
    return copy.pass == pass && copy.ties == ties;
  }
};

struct ThresholdCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string source;
  bool pass = false;

  bool evaluate() const { return value <= threshold; }
};

/// Results of a diagnostics run. Every flag is a function of the numbers
/// recorded next to it; `consistent()` recomputes them all.
struct DiagnosticReport {
  std::map<std::string, std::string> metadata;
  std::vector<CheckRow> checks;
  std::vector<KsRow> ks_rows;
  std::vector<ConditionRow> conditions;
  std::vector<TrendCheck> trends;
  std::vector<ThresholdCheck> thresholds;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; }) &&
           std::all_of(trends.begin(), trends.end(), [](const auto& c) { return c.pass; }) &&
           std::all_of(thresholds.begin(), thresholds.end(), [](const auto& c) { return c.pass; });
  }

  bool consistent() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const auto& c) { return c.pass == c.evaluate(); }) &&
           std::all_of(trends.begin(), trends.end(), [](const auto& c) { return c.consistent(); }) &&
           std::all_of(thresholds.begin(), thresholds.end(),
                       [](const auto& c) { return c.pass == c.evaluate(); });
  }

  void append(const DiagnosticReport& other) {
    for (const auto& [k, v] : other.metadata) metadata[k] = v;
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
    ks_rows.insert(ks_rows.end(), other.ks_rows.begin(), other.ks_rows.end());
    conditions.insert(conditions.end(), other.conditions.begin(), other.conditions.end());
    trends.insert(trends.end(), other.trends.begin(), other.trends.end());
    thresholds.insert(thresholds.end(), other.thresholds.begin(), other.thresholds.end());
  }
};

inline nlohmann::json to_json(const DiagnosticReport& r) {
  using nlohmann::json;
  json j;
  j["metadata"] = r.metadata;
  j["passed"] = r.passed();
  j["checks"] = json::array();
  for (const auto& c : r.checks) {
    j["checks"].push_back({{"check", c.check},
                           {"label", c.label},
                           {"observed", c.observed},
                           {"expected", c.expected},
                           {"se", c.se},
                           {"z", c.z},
                           {"tol", c.tol},
                           {"comparison", to_string(c.comparison)},
                           {"pass", c.pass}});
  }
  j["ks"] = json::array();
  for (const auto& k : r.ks_rows) {
    j["ks"].push_back(
        {{"n", k.n}, {"t", k.t}, {"ks", k.ks}, {"se", k.se}, {"critical_1pct", k.critical}});
  }
  j["conditions"] = json::array();
  for (const auto& c : r.conditions) {
    j["conditions"].push_back({{"condition", c.condition},
                               {"n", c.n},
                               {"value", c.value},
                               {"se", c.se},
                               {"summary", c.summary}});
  }
  j["trends"] = json::array();
  for (const auto& t : r.trends) {
    j["trends"].push_back({{"name", t.name},
                           {"keys", t.keys},
                           {"values", t.values},
                           {"se", t.se},
                           {"band", t.band},
                           {"max_ties", t.max_ties},
                           {"ties", t.ties},
                           {"pass", t.pass}});
  }
  j["thresholds"] = json::array();
  for (const auto& t : r.thresholds) {
    j["thresholds"].push_back({{"name", t.name},
                               {"value", t.value},
                               {"threshold", t.threshold},
                               {"source", t.source},
                               {"pass", t.pass}});
  }
  return j;
}

inline DiagnosticReport report_from_json(const nlohmann::json& j) {
  DiagnosticReport r;
  r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  for (const auto& c : j.at("checks")) {
    CheckRow row;
    row.check = c.at("check");
    row.label = c.at("label");
    row.observed = c.at("observed");
    row.expected = c.at("expected");
    row.se = c.at("se");
    row.z = c.at("z");
    row.tol = c.at("tol");
    row.comparison = comparison_from_string(c.at("comparison"));
    row.pass = c.at("pass");
    r.checks.push_back(row);
  }
  for (const auto& k : j.at("ks")) {
    r.ks_rows.push_back({k.at("n"), k.at("t"), k.at("ks"), k.at("se"), k.at("critical_1pct")});
  }
  for (const auto& c : j.at("conditions")) {
    r.conditions.push_back({c.at("condition"), c.at("n"), c.at("value"), c.at("se"), c.at("summary")});
  }
  for (const auto& t : j.at("trends")) {
    TrendCheck tc;
    tc.name = t.at("name");
    tc.keys = t.at("keys").get<std::vector<double>>();
    tc.values = t.at("values").get<std::vector<double>>();
    tc.se = t.at("se").get<std::vector<double>>();
    tc.band = t.at("band");
    tc.max_ties = t.at("max_ties");
    tc.ties = t.at("ties");
    tc.pass = t.at("pass");
    r.trends.push_back(tc);
  }
  for (const auto& t : j.at("thresholds")) {
    r.thresholds.push_back({t.at("name"), t.at("value"), t.at("threshold"), t.at("source"), t.at("pass")});
  }
  return r;
}

/// Plot-ready convergence table, header `n,t,ks,se`.
inline void write_convergence_csv(std::ostream& os, const DiagnosticReport& r) {
  os << "n,t,ks,se\n";
  os << std::setprecision(17);
  for (const auto& k : r.ks_rows) os << k.n << ',' << k.t << ',' << k.ks << ',' << k.se << '\n';
}

/// Aligned-column summary for people.
inline void write_report_text(std::ostream& os, const DiagnosticReport& r) {
  auto flag = [](bool p) { return p ? "PASS" : "FAIL"; };
  os << std::setprecision(6);
  for (const auto& [k, v] : r.metadata) os << "# " << k << ": " << v << '\n';
  if (!r.checks.empty()) {
    os << '\n'
       << std::left << std::setw(22) << "check" << std::setw(26) << "label" << std::right
       << std::setw(14) << "observed" << std::setw(14) << "expected" << std::setw(12) << "se"
       << std::setw(6) << "z" << std::setw(11) << "cmp" << "  flag\n";
    for (const auto& c : r.checks) {
      os << std::left << std::setw(22) << c.check << std::setw(26) << c.label << std::right
         << std::setw(14) << c.observed << std::setw(14) << c.expected << std::setw(12) << c.se
         << std::setw(6) << c.z << std::setw(11) << to_string(c.comparison) << "  "
         << flag(c.pass) << '\n';
    }
  }
  if (!r.ks_rows.empty()) {
    os << '\n'
       << std::setw(8) << "n" << std::setw(10) << "t" << std::setw(14) << "ks" << std::setw(14)
       << "se" << std::setw(14) << "crit(1%)" << '\n';
    for (const auto& k : r.ks_rows) {
      os << std::setw(8) << k.n << std::setw(10) << k.t << std::setw(14) << k.ks << std::setw(14)
         << k.se << std::setw(14) << k.critical << '\n';
    }
  }
  if (!r.conditions.empty()) {
    os << '\n'
       << std::setw(10) << "condition" << std::setw(8) << "n" << std::setw(16) << "value"
       << std::setw(14) << "se" << "  summary\n";
    for (const auto& c : r.conditions) {
      os << std::setw(10) << c.condition << std::setw(8) << c.n << std::setw(16) << c.value
         << std::setw(14) << c.se << "  " << c.summary << '\n';
    }
  }
  for (const auto& t : r.trends) {
    os << "\ntrend " << t.name << ": ";
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      os << (i ? " > " : "") << t.values[i];
    }
    os << "  ties=" << t.ties << "/" << t.max_ties << "  " << flag(t.pass) << '\n';
  }
  for (const auto& t : r.thresholds) {
    os << "threshold " << t.name << ": " << t.value << " <= " << t.threshold << " (" << t.source
       << ")  " << flag(t.pass) << '\n';
  }
  os << "\noverall: " << flag(r.passed()) << '\n';
}

}  // namespace cbpsim
