#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cbpsim {

/// Streaming central moments up to order four (Terriberry's update), enough
/// for standard errors of both the mean and the variance.
class Moments {
 public:
  void add(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean_ += delta_n;
    m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
    m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
    m2_ += term1;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }

  /// Unbiased sample variance; 0 below two samples.
  double variance() const { return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1); }

  double standard_error() const {
    return n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
  }

  /// SE of the unbiased sample variance from the finite-sample identity
  /// Var[s^2] = mu4 / n - sigma^4 (n - 3) / (n (n - 1)), with plug-in
  /// central moments. Unlike the first-order sqrt((mu4 - s^4) / n) it stays
  /// positive when mu4 = sigma^4 (symmetric two-point laws).
  double variance_standard_error() const {
    if (n_ < 2) return 0.0;
    const double n = static_cast<double>(n_);
    const double mu4 = m4_ / n;
    const double s2 = m2_ / n;
    const double v = mu4 / n - s2 * s2 * (n - 3.0) / (n * (n - 1.0));
    return std::sqrt(std::max(v, 0.0));
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

/// Right-continuous empirical CDF of a sample.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw std::invalid_argument("ecdf: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

inline Ecdf ecdf(std::span<const double> samples) {
  return Ecdf(std::vector<double>(samples.begin(), samples.end()));
}

/// Two-sample KS statistic on already sorted inputs.
inline double ks_two_sample_sorted(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    // Step past every copy of x in both samples before comparing.
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// sup_x |F_a(x) - F_b(x)| by a sorted merge.
inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return ks_two_sample_sorted(sa, sb);
}

inline double ks_effective_size(std::size_t n1, std::size_t n2) {
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  return a * b / (a + b);
}

/// Asymptotic two-sample KS critical value, c(level) / sqrt(n_eff) with
/// c(level) = sqrt(-ln(level / 2) / 2); c(0.01) = 1.6276.
inline double ks_critical_value(std::size_t n1, std::size_t n2, double level = 0.01) {
  const double c = std::sqrt(-0.5 * std::log(0.5 * level));
  return c / std::sqrt(ks_effective_size(n1, n2));
}

/// Null standard deviation of the KS statistic: sd of the Kolmogorov
/// distribution (sqrt(pi^2/12 - pi/2 ln^2 2) = 0.2603) over sqrt(n_eff).
inline double ks_standard_error(std::size_t n1, std::size_t n2) {
  constexpr double pi = 3.14159265358979323846;
  const double ln2 = std::log(2.0);
  const double sd = std::sqrt(pi * pi / 12.0 - 0.5 * pi * ln2 * ln2);
  return sd / std::sqrt(ks_effective_size(n1, n2));
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Median absolute deviation (unscaled).
inline double mad(const std::vector<double>& v) {
  const double med = median(v);
  std::vector<double> dev(v.size());
  std::transform(v.begin(), v.end(), dev.begin(), [med](double x) { return std::fabs(x - med); });
  return median(std::move(dev));
}

}  // namespace cbpsim
