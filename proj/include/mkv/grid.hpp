#pragma once

#include <cmath>
#include <cstdint>

#include "mkv/errors.hpp"

namespace mkv {

// Left-endpoint projection onto the grid {k/n}: kappa(s) = floor(s*n)/n.
inline double kappa(double s, std::uint64_t n) {
  if (!(s >= 0.0)) throw PreconditionError("kappa: s must be nonnegative");
  if (n < 1) throw PreconditionError("kappa: n must be >= 1");
  return std::floor(s * static_cast<double>(n)) / static_cast<double>(n);
}

// Uniform grid with n steps per unit time on [0, horizon].
struct TimeGrid {
  std::uint64_t n;  // steps per unit time
  double horizon;   // t

  TimeGrid(std::uint64_t steps_per_unit, double t) : n(steps_per_unit), horizon(t) {
    if (n < 1) throw ConfigError("TimeGrid: n must be >= 1");
    if (!(t > 0.0)) throw ConfigError("TimeGrid: horizon must be positive");
  }

  double step_size() const noexcept { return 1.0 / static_cast<double>(n); }

  // ceil(t*n), guarded against t*n being an integer up to rounding noise.
  std::uint64_t num_steps() const noexcept {
    const double tn = horizon * static_cast<double>(n);
    return static_cast<std::uint64_t>(std::ceil(tn - 1e-9));
  }

  double point(std::uint64_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(n);
  }
};

}  // namespace mkv
