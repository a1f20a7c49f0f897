#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "cbpsim/random.hpp"

namespace cbpsim {

using Count = std::uint64_t;

/// Thrown when a population count would exceed the range of Count.
class PopulationOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

namespace detail {

inline Count checked_add(Count a, Count b) {
  Count out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw PopulationOverflow("population count overflow");
  }
  return out;
}

inline Count checked_mul(Count a, Count b) {
  Count out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw PopulationOverflow("population count overflow");
  }
  return out;
}

// Poisson draws above this mean cannot be represented safely in a Count.
inline constexpr double kMaxPoissonMean = 0x1.0p62;

inline Count poisson_count(double mean, Stream& rng) {
  if (mean > kMaxPoissonMean) throw PopulationOverflow("population count overflow");
  return rng.poisson(mean);
}

}  // namespace detail

/// Distribution of the number of children of one progenitor.
///
/// `draw_sum(count)` returns the sum of `count` i.i.d. draws; laws closed
/// under convolution (Poisson, deterministic) override it with a single
/// draw, everything else falls back to a loop.
class OffspringLaw {
 public:
  using Sampler = std::function<Count(Stream&)>;
  using SumSampler = std::function<Count(Count, Stream&)>;

  OffspringLaw(std::string name, Sampler sampler, double mean, double variance,
               SumSampler sum_sampler = {})
      : name_(std::move(name)),
        sampler_(std::move(sampler)),
        sum_sampler_(std::move(sum_sampler)),
        mean_(mean),
        variance_(variance) {
    if (!sampler_) throw std::invalid_argument("offspring law needs a sampler");
    if (!(mean_ > 0.0) || !std::isfinite(mean_)) {
      throw std::invalid_argument("offspring mean must be finite and > 0");
    }
    if (!(variance_ >= 0.0) || !std::isfinite(variance_)) {
      throw std::invalid_argument("offspring variance must be finite and >= 0");
    }
  }

  static OffspringLaw poisson(double mean) {
    return OffspringLaw(
        "poisson", [mean](Stream& rng) { return rng.poisson(mean); }, mean, mean,
        [mean](Count count, Stream& rng) {
          return detail::poisson_count(mean * static_cast<double>(count), rng);
        });
  }

  static OffspringLaw deterministic(Count value) {
    if (value == 0) return zero();
    const auto v = static_cast<double>(value);
    return OffspringLaw(
        "deterministic", [value](Stream&) { return value; }, v, 0.0,
        [value](Count count, Stream&) { return detail::checked_mul(value, count); });
  }

  /// Point mass at 0. Has m = 0, so only unchecked models accept it.
  static OffspringLaw zero() {
    OffspringLaw law("zero", [](Stream&) -> Count { return 0; }, 1.0, 0.0,
                     [](Count, Stream&) -> Count { return 0; });
    law.mean_ = 0.0;
    return law;
  }

  /// Geometric on {0, 1, ...} with the given mean: variance m(1 + m).
  static OffspringLaw geometric(double mean) {
    if (!(mean > 0.0)) throw std::invalid_argument("geometric mean must be > 0");
    const double p = 1.0 / (1.0 + mean);
    const double log_q = std::log1p(-p);
    return OffspringLaw(
        "geometric",
        [log_q](Stream& rng) {
          return static_cast<Count>(std::floor(std::log(rng.uniform_pos()) / log_q));
        },
        mean, mean * (1.0 + mean));
  }

  /// Two-point law on {lo, lo + 1} with P(lo + 1) = frac; covers any real
  /// mean with the smallest possible variance.
  static OffspringLaw two_point(double mean) {
    if (!(mean > 0.0)) throw std::invalid_argument("two-point mean must be > 0");
    const double lo = std::floor(mean);
    const double frac = mean - lo;
    const auto base = static_cast<Count>(lo);
    return OffspringLaw(
        "two-point",
        [base, frac](Stream& rng) { return base + (rng.bernoulli(frac) ? 1u : 0u); },
        mean, frac * (1.0 - frac));
  }

  Count draw(Stream& rng) const { return sampler_(rng); }

  Count draw_sum(Count count, Stream& rng) const {
    if (count == 0) return 0;
    if (sum_sampler_) return sum_sampler_(count, rng);
    Count total = 0;
    for (Count j = 0; j < count; ++j) total = detail::checked_add(total, sampler_(rng));
    return total;
  }

  const std::string& name() const { return name_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }

 private:
  std::string name_;
  Sampler sampler_;
  SumSampler sum_sampler_;
  double mean_;
  double variance_;
};

/// Random control family phi(k): number of progenitors when the population
/// size is k, with mean epsilon(k) and variance nu2(k).
///
/// `nu2_scale` and `beta` are the growth witness nu2(k) <= C max(k,1)^beta.
/// `epsilon_slope` is the analytic limit of epsilon(k) / k, when known; the
/// mean growth rate limit is m times this.
class ControlLaw {
 public:
  using Sampler = std::function<Count(Count, Stream&)>;
  using Moment = std::function<double(Count)>;

  struct Constants {
    double alpha = 0.0;
    double beta = 0.0;
    double nu2_scale = 1.0;
    std::optional<double> epsilon_slope;
  };

  ControlLaw(std::string name, Sampler sampler, Moment epsilon, Moment nu2, Constants constants)
      : name_(std::move(name)),
        sampler_(std::move(sampler)),
        epsilon_(std::move(epsilon)),
        nu2_(std::move(nu2)),
        constants_(constants) {
    if (!sampler_ || !epsilon_ || !nu2_) {
      throw std::invalid_argument("control law needs sampler, epsilon and nu2");
    }
    if (!(constants_.alpha >= 0.0) || !std::isfinite(constants_.alpha)) {
      throw std::invalid_argument("alpha must be finite and >= 0");
    }
    if (!(constants_.beta < 1.0)) throw std::invalid_argument("beta must be < 1");
    if (!(constants_.nu2_scale >= 0.0) || !std::isfinite(constants_.nu2_scale)) {
      throw std::invalid_argument("nu2_scale must be finite and >= 0");
    }
  }

  /// phi(k) = k + Poisson(alpha). Paired with m = 1 this is a branching
  /// process with immigration: eps(k) = k + alpha, nu2(k) = alpha.
  static ControlLaw poisson_immigration(double alpha) {
    return ControlLaw(
        "poisson-immigration",
        [alpha](Count k, Stream& rng) { return detail::checked_add(k, rng.poisson(alpha)); },
        [alpha](Count k) { return static_cast<double>(k) + alpha; },
        [alpha](Count) { return alpha; },
        Constants{alpha, 0.0, alpha, 1.0});
  }

  /// phi(k) = floor((k + alpha)/m) + Bernoulli(frac((k + alpha)/m)):
  /// eps(k) = (k + alpha)/m exactly and nu2(k) = f(1 - f) <= 1/4.
  static ControlLaw bernoulli_rounding(double alpha, double m) {
    if (!(m > 0.0)) throw std::invalid_argument("m must be > 0");
    auto target = [alpha, m](Count k) { return (static_cast<double>(k) + alpha) / m; };
    return ControlLaw(
        "bernoulli-rounding",
        [target](Count k, Stream& rng) {
          const double x = target(k);
          const double lo = std::floor(x);
          if (lo >= 0x1.0p63) throw PopulationOverflow("population count overflow");
          return static_cast<Count>(lo) + (rng.bernoulli(x - lo) ? 1u : 0u);
        },
        target,
        [target](Count k) {
          const double x = target(k);
          const double f = x - std::floor(x);
          return f * (1.0 - f);
        },
        Constants{alpha, 0.0, 0.25, 1.0 / m});
  }

  /// phi(k) = factor * k, deterministic. Only critical for factor * m = 1.
  static ControlLaw proportional(Count factor) {
    const auto f = static_cast<double>(factor);
    return ControlLaw(
        "proportional",
        [factor](Count k, Stream&) { return detail::checked_mul(factor, k); },
        [f](Count k) { return f * static_cast<double>(k); }, [](Count) { return 0.0; },
        Constants{0.0, 0.0, 0.0, f});
  }

  /// phi(k) = 0 always.
  static ControlLaw extinction() {
    return ControlLaw(
        "extinction", [](Count, Stream&) -> Count { return 0; }, [](Count) { return 0.0; },
        [](Count) { return 0.0; }, Constants{0.0, 0.0, 0.0, 0.0});
  }

  Count draw(Count k, Stream& rng) const { return sampler_(k, rng); }
  double epsilon(Count k) const { return epsilon_(k); }
  double nu2(Count k) const { return nu2_(k); }

  const std::string& name() const { return name_; }
  double alpha() const { return constants_.alpha; }
  double beta() const { return constants_.beta; }
  double nu2_scale() const { return constants_.nu2_scale; }
  std::optional<double> epsilon_slope() const { return constants_.epsilon_slope; }

 private:
  std::string name_;
  Sampler sampler_;
  Moment epsilon_;
  Moment nu2_;
  Constants constants_;
};

/// Law of Z_0 with its declared first two moments.
class InitialLaw {
 public:
  using Sampler = std::function<Count(Stream&)>;

  InitialLaw(std::string name, Sampler sampler, double mean, double second_moment)
      : name_(std::move(name)), sampler_(std::move(sampler)), mean_(mean), second_(second_moment) {
    if (!sampler_) throw std::invalid_argument("initial law needs a sampler");
    if (!std::isfinite(second_) || !(mean_ >= 0.0) || second_ < mean_ * mean_ * (1.0 - 1e-12)) {
      throw std::invalid_argument("initial law needs finite moments with E[Z0^2] >= E[Z0]^2");
    }
  }

  static InitialLaw fixed(Count z0) {
    const auto z = static_cast<double>(z0);
    return InitialLaw("fixed", [z0](Stream&) { return z0; }, z, z * z);
  }

  static InitialLaw poisson(double mean) {
    return InitialLaw("poisson", [mean](Stream& rng) { return rng.poisson(mean); }, mean,
                      mean + mean * mean);
  }

  Count draw(Stream& rng) const { return sampler_(rng); }
  const std::string& name() const { return name_; }
  double mean() const { return mean_; }
  double second_moment() const { return second_; }
  double variance() const { return std::max(0.0, second_ - mean_ * mean_); }

 private:
  std::string name_;
  Sampler sampler_;
  double mean_;
  double second_;
};

}  // namespace cbpsim
