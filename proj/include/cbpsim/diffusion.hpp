#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cbpsim/model.hpp"
#include "cbpsim/random.hpp"

namespace cbpsim {

/// Constants of dW = (b W + alpha) dt + sqrt((sigma2 / m) W^+) dB.
///
/// The branching limit has b = 0. `mean_reversion` is carried for the
/// general square-root equation but the exact sampler only supports 0.
struct DiffusionParams {
  double alpha = 0.0;
  double m = 1.0;
  double sigma2 = 0.0;
  double mean_reversion = 0.0;

  DiffusionParams() = default;
  DiffusionParams(double alpha_, double m_, double sigma2_, double b = 0.0)
      : alpha(alpha_), m(m_), sigma2(sigma2_), mean_reversion(b) {
    validate();
  }

  static DiffusionParams from_model(const CbpModel& model) {
    return DiffusionParams(model.alpha(), model.m(), model.sigma2());
  }

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be >= 0");
    if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("m must be > 0");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
      throw std::invalid_argument("sigma2 must be >= 0");
    }
  }

  /// Half the squared diffusion coefficient per unit state, sigma2 / (2m).
  double a() const { return sigma2 / (2.0 * m); }

  /// Squared-Bessel dimension 4 alpha m / sigma2; needs sigma2 > 0.
  double delta() const {
    if (!(sigma2 > 0.0)) throw std::domain_error("delta undefined for sigma2 = 0");
    return 4.0 * alpha * m / sigma2;
  }

  bool degenerate() const { return sigma2 == 0.0; }
};

enum class Scheme { exact, euler_maruyama };

struct DiffusionPath {
  std::vector<double> times;
  std::vector<double> values;
  Scheme scheme = Scheme::exact;
};

/// Draws X(t0 + dt) given X(t0) = x0 from the exact transition law.
///
/// With c = 4m / sigma2, Y = c X is a squared Bessel process of dimension
/// delta, and Y(dt) / dt given Y(0) = y0 is noncentral chi-square with
/// delta degrees of freedom and noncentrality y0 / dt: a Poisson(y0 / 2dt)
/// mixture of Gamma((delta + 2K) / 2, 2).
inline double exact_transition(double x0, double dt, const DiffusionParams& p, Stream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("exact_transition: dt must be > 0");
  if (!(x0 >= 0.0)) throw std::invalid_argument("exact_transition: x0 must be >= 0");
  if (p.mean_reversion != 0.0) {
    throw std::invalid_argument("exact_transition: only mean_reversion = 0 is supported");
  }
  if (p.degenerate()) return x0 + p.alpha * dt;
  const double scale = p.sigma2 / (4.0 * p.m);  // X = scale * Y
  const double half_df = 0.5 * p.delta();
  double shape = half_df;
  if (x0 > 0.0) {
    const double noncentrality = x0 / (scale * dt);
    shape += static_cast<double>(rng.poisson(0.5 * noncentrality));
  }
  return scale * dt * rng.gamma(shape, 2.0);
}

inline std::vector<double> marginal_sample(double t, double x0, const DiffusionParams& p,
                                           Stream& rng, std::size_t n_draws) {
  std::vector<double> out;
  out.reserve(n_draws);
  for (std::size_t i = 0; i < n_draws; ++i) out.push_back(exact_transition(x0, t, p, rng));
  return out;
}

/// Exact path on a time grid by chaining transitions.
inline DiffusionPath exact_path(double x0, const std::vector<double>& grid,
                                const DiffusionParams& p, Stream& rng) {
  DiffusionPath path;
  path.scheme = Scheme::exact;
  path.times = grid;
  path.values.resize(grid.size());
  if (grid.empty()) return path;
  path.values[0] = x0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    path.values[i] = exact_transition(path.values[i - 1], grid[i] - grid[i - 1], p, rng);
  }
  return path;
}

/// Uniform grid 0, dt, ..., with the last point at `horizon`.
inline std::vector<double> uniform_grid(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("grid needs horizon, dt > 0");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  std::vector<double> g(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g[i] = std::min(horizon, static_cast<double>(i) * dt);
  return g;
}

inline void validate_grid(const std::vector<double>& grid) {
  if (grid.empty() || grid.front() != 0.0) throw std::invalid_argument("grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
  }
}

/// Explicit Euler-Maruyama for dX = drift(t, X) dt + diffusion(t, X) dB.
/// Returns the raw (unclamped) states on the grid.
template <typename Drift, typename Diffusion>
std::vector<double> euler_maruyama(double x0, const std::vector<double>& grid, Drift&& drift,
                                   Diffusion&& diffusion, Stream& rng) {
  validate_grid(grid);
  std::vector<double> x(grid.size());
  x[0] = x0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double t = grid[i - 1];
    const double h = grid[i] - t;
    const double xi = x[i - 1];
    x[i] = xi + drift(t, xi) * h + diffusion(t, xi) * std::sqrt(h) * rng.normal();
  }
  return x;
}

/// Full-truncation Euler-Maruyama for the branching limit: the positive
/// part enters only through the square root; reported values are clamped at 0.
inline DiffusionPath euler_maruyama_path(double x0, const std::vector<double>& grid,
                                         const DiffusionParams& p, Stream& rng) {
  const double vol = p.sigma2 / p.m;
  auto raw = euler_maruyama(
      x0, grid, [&p](double, double x) { return p.mean_reversion * x + p.alpha; },
      [vol](double, double x) { return std::sqrt(vol * std::max(x, 0.0)); }, rng);
  for (double& v : raw) v = std::max(v, 0.0);
  return DiffusionPath{grid, std::move(raw), Scheme::euler_maruyama};
}

/// Euler-Maruyama for the centred limit dM = sqrt((sigma2/m) (M + alpha t)^+) dB,
/// started at M(0) = 0. Values may be negative.
inline std::vector<double> euler_maruyama_centered(const std::vector<double>& grid,
                                                   const DiffusionParams& p, Stream& rng) {
  const double vol = p.sigma2 / p.m;
  const double alpha = p.alpha;
  return euler_maruyama(
      0.0, grid, [](double, double) { return 0.0; },
      [vol, alpha](double t, double x) { return std::sqrt(vol * std::max(x + alpha * t, 0.0)); },
      rng);
}

/// Generator T f(x) = (b x + alpha) f'(x) + (1/2) x (sigma2 / m) f''(x).
template <typename D1, typename D2>
double generator_apply(D1&& f_prime, D2&& f_second, double x, const DiffusionParams& p) {
  return (p.mean_reversion * x + p.alpha) * f_prime(x) + 0.5 * x * p.sigma2 / p.m * f_second(x);
}

/// Var[X(t) | X(0) = x0] from the moment equations with b = 0:
/// x0 (sigma2/m) t + alpha (sigma2 / 2m) t^2.
inline double exact_variance(double x0, double t, const DiffusionParams& p) {
  return x0 * p.sigma2 / p.m * t + p.a() * p.alpha * t * t;
}

inline double exact_mean(double x0, double t, const DiffusionParams& p) {
  return x0 + p.alpha * t;
}

/// CSV with header `t,value`.
inline void write_diffusion_csv(std::ostream& os, const DiffusionPath& path) {
  os << "t,value\n";
  os.precision(17);
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    os << path.times[i] << ',' << path.values[i] << '\n';
  }
}

}  // namespace cbpsim
