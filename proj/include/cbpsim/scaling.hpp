#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cbpsim/model.hpp"

namespace cbpsim {

/// Right-continuous step function on [0, T] with jumps at k/n. Only the
/// values at jump points are stored; evaluation snaps to floor(n t).
class StepPath {
 public:
  StepPath(double horizon, std::size_t n, std::vector<double> values)
      : horizon_(horizon), n_(n), values_(std::move(values)) {
    if (!(horizon_ > 0.0)) throw std::invalid_argument("step path horizon must be > 0");
    if (n_ == 0) throw std::invalid_argument("step path scaling index must be >= 1");
    if (values_.size() != grid_size(horizon_, n_)) {
      throw std::invalid_argument("step path needs floor(nT) + 1 values");
    }
  }

  /// floor(n T) + 1, guarding against n T landing a hair under an integer.
  static std::size_t grid_size(double horizon, std::size_t n) {
    return floor_index(horizon, n) + 1;
  }

  static std::size_t floor_index(double t, std::size_t n) {
    const double x = t * static_cast<double>(n);
    double f = std::floor(x);
    if (x - f > 1.0 - 1e-12 * std::max(1.0, x)) f += 1.0;
    return static_cast<std::size_t>(f);
  }

  double operator()(double t) const {
    if (t < 0.0 || t > horizon_ * (1.0 + 1e-12)) {
      throw std::out_of_range("step path evaluated outside [0, T]");
    }
    return values_[std::min(floor_index(t, n_), values_.size() - 1)];
  }

  double time(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(n_); }

  double horizon() const { return horizon_; }
  std::size_t n() const { return n_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double horizon_;
  std::size_t n_;
  std::vector<double> values_;
};

/// Martingale differences M_k = Z_k - Z_{k-1} - alpha, k = 1..N.
struct MartingaleIncrements {
  std::vector<double> m_k;
  Count z0 = 0;
  double alpha = 0.0;

  /// Z_k = Z_0 + sum_{j<=k} M_j + k alpha.
  double reconstruct(std::size_t k) const {
    double s = static_cast<double>(z0);
    for (std::size_t j = 0; j < k; ++j) s += m_k[j];
    return s + static_cast<double>(k) * alpha;
  }
};

/// W_n(t) = Z_{floor(n t)} / n on [0, T].
inline StepPath scale_trajectory(const Trajectory& traj, std::size_t n, double horizon) {
  const std::size_t len = StepPath::grid_size(horizon, n);
  if (traj.values.size() < len) throw std::invalid_argument("trajectory too short for n T");
  std::vector<double> v(len);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < len; ++k) v[k] = static_cast<double>(traj.values[k]) * inv;
  return StepPath(horizon, n, std::move(v));
}

inline MartingaleIncrements martingale_increments(const Trajectory& traj, double alpha) {
  if (traj.values.size() < 2) throw std::invalid_argument("trajectory needs >= 2 entries");
  MartingaleIncrements inc;
  inc.z0 = traj.values[0];
  inc.alpha = alpha;
  inc.m_k.resize(traj.values.size() - 1);
  for (std::size_t k = 1; k < traj.values.size(); ++k) {
    inc.m_k[k - 1] = static_cast<double>(traj.values[k]) - static_cast<double>(traj.values[k - 1]) -
                     alpha;
  }
  return inc;
}

/// Both closed forms of the martingale step process at the grid points:
/// (Z_0 + sum_{k<=j} M_k) / n and Z_j / n - (j / n) alpha.
struct MartingaleStepForms {
  std::vector<double> from_increments;
  std::vector<double> from_levels;
};

inline MartingaleStepForms martingale_step_forms(const Trajectory& traj, std::size_t n,
                                                 double horizon, double alpha) {
  const std::size_t len = StepPath::grid_size(horizon, n);
  if (traj.values.size() < len) throw std::invalid_argument("trajectory too short for n T");
  const double nd = static_cast<double>(n);
  MartingaleStepForms f;
  f.from_increments.resize(len);
  f.from_levels.resize(len);
  double partial = static_cast<double>(traj.values[0]);
  for (std::size_t j = 0; j < len; ++j) {
    if (j > 0) {
      partial += static_cast<double>(traj.values[j]) - static_cast<double>(traj.values[j - 1]) -
                 alpha;
    }
    f.from_increments[j] = partial / nd;
    f.from_levels[j] = static_cast<double>(traj.values[j]) / nd - static_cast<double>(j) / nd * alpha;
  }
  return f;
}

/// Largest disagreement between the two forms, scaled by the path size.
inline double martingale_forms_gap(const MartingaleStepForms& f) {
  double gap = 0.0;
  for (std::size_t j = 0; j < f.from_levels.size(); ++j) {
    const double scale = 1.0 + std::fabs(f.from_levels[j]);
    gap = std::max(gap, std::fabs(f.from_increments[j] - f.from_levels[j]) / scale);
  }
  return gap;
}

/// Martingale step process; throws if the two closed forms disagree.
inline StepPath martingale_step_path(const Trajectory& traj, std::size_t n, double horizon,
                                     double alpha) {
  auto forms = martingale_step_forms(traj, n, horizon, alpha);
  if (martingale_forms_gap(forms) > 1e-9) {
    throw std::logic_error("martingale step process: closed forms disagree");
  }
  return StepPath(horizon, n, std::move(forms.from_levels));
}

/// (Psi_n f)(t) = f(floor(nt)/n) + (floor(nt)/n) alpha, on the jump grid.
inline StepPath psi_n(const StepPath& f, double alpha) {
  std::vector<double> v = f.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] += f.time(k) * alpha;
  return StepPath(f.horizon(), f.n(), std::move(v));
}

/// (Psi f)(t) = f(t) + alpha t for a path sampled on `times`.
inline std::vector<double> psi(const std::vector<double>& times, const std::vector<double>& values,
                               double alpha) {
  if (times.size() != values.size()) throw std::invalid_argument("psi: size mismatch");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] + alpha * times[i];
  return out;
}

/// CSV with header `t,value` at the jump points.
inline void write_step_path_csv(std::ostream& os, const StepPath& path) {
  os << "t,value\n";
  os.precision(17);
  for (std::size_t k = 0; k < path.values().size(); ++k) {
    os << path.time(k) << ',' << path.values()[k] << '\n';
  }
}

}  // namespace cbpsim
