#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mkv/dynamics.hpp"
#include "mkv/errors.hpp"
#include "mkv/estimators.hpp"
#include "mkv/model.hpp"

namespace mkv {

// ---------------------------------------------------------------------------
// Closed-form reference values for the linear mean-field model
// dx = (-alpha x + beta E[x]) dt + dw.

// E[x_t] = m0 * exp(-(alpha-beta) t).
inline double linear_mean(double alpha, double beta, double m0, double t) {
  if (!(alpha > beta)) throw ConfigError("linear_mean: requires alpha > beta");
  return m0 * std::exp(-(alpha - beta) * t);
}

// Var[x_t]: dv/dt = -2 alpha v + 1.
inline double linear_variance(double alpha, double v0, double t) {
  const double v_inf = 1.0 / (2.0 * alpha);
  return v_inf + (v0 - v_inf) * std::exp(-2.0 * alpha * t);
}

// Moments of the invariant measure: E[x] = 0, E[x^2] = 1/(2 alpha).
inline double invariant_moment(double alpha, double beta, int order) {
  if (!(alpha > 0.0) || !(alpha > beta))
    throw ConfigError("invariant_moment: requires alpha > 0 and alpha > beta");
  if (order == 1) return 0.0;
  if (order == 2) return 1.0 / (2.0 * alpha);
  throw ConfigError("invariant_moment: order must be 1 or 2");
}

// Second moment of the law at time t (mean^2 + variance), the reference for
// weak-bias measurements with f = x^2.
inline double linear_second_moment(double alpha, double beta, double m0,
                                   double v0, double t) {
  const double m = linear_mean(alpha, beta, m0, t);
  return m * m + linear_variance(alpha, v0, t);
}

// ---------------------------------------------------------------------------
// Wasserstein-2 in one dimension: L2 distance of sorted samples (the optimal
// coupling is monotone). Unequal sizes are resampled to a common size via
// quantile interpolation.

namespace detail {

inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size()) - 0.5;
  if (pos <= 0.0) return sorted.front();
  if (pos >= static_cast<double>(sorted.size() - 1)) return sorted.back();
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace detail

inline double w2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("w2_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t m = std::max(a.size(), b.size());
  double sq = 0.0;
  if (a.size() == b.size()) {
    for (std::size_t i = 0; i < m; ++i) {
      const double d = a[i] - b[i];
      sq += d * d;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
      const double d = detail::sorted_quantile(a, q) - detail::sorted_quantile(b, q);
      sq += d * d;
    }
  }
  return std::sqrt(sq / static_cast<double>(m));
}

// ---------------------------------------------------------------------------
// Rate regression

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Least-squares fit of log(error) against x. Pass x already log-scaled when
// fitting power laws.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3)
    throw PreconditionError("fit_rate: need at least 3 points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, err] : points) {
    if (!(err > 0.0))
      throw PreconditionError("fit_rate: errors must be positive");
    sx += x;
    sy += std::log(err);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, err] : points) {
    const double dx = x - mx;
    const double dy = std::log(err) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Mean-square error over replications

struct MseReport {
  std::uint64_t replications = 0;
  std::vector<double> estimates;
  double reference = 0.0;
  double mean = 0.0;
  double bias = 0.0;        // |mean - reference|
  double sample_std = 0.0;  // divisor R-1
  double mse = 0.0;         // sqrt(mean squared deviation from reference)
};

// Runs R independent replications of `run_one` (which must derive all
// randomness from its replication index) and summarises deviation from the
// reference.
inline MseReport estimate_mse(
    const std::function<double(std::uint64_t replication)>& run_one,
    double reference, std::uint64_t replications) {
  if (replications < 2)
    throw PreconditionError("estimate_mse: need at least 2 replications");
  MseReport report;
  report.replications = replications;
  report.reference = reference;
  report.estimates.reserve(replications);
  for (std::uint64_t r = 0; r < replications; ++r)
    report.estimates.push_back(run_one(r));
  double sum = 0.0;
  for (double e : report.estimates) sum += e;
  report.mean = sum / static_cast<double>(replications);
  double sq_dev = 0.0, sq_ref = 0.0;
  for (double e : report.estimates) {
    sq_dev += (e - report.mean) * (e - report.mean);
    sq_ref += (e - reference) * (e - reference);
  }
  report.bias = std::abs(report.mean - reference);
  report.sample_std =
      std::sqrt(sq_dev / static_cast<double>(replications - 1));
  report.mse = std::sqrt(sq_ref / static_cast<double>(replications));
  return report;
}

// ---------------------------------------------------------------------------
// Propagation-of-chaos measurement for the linear model

struct ChaosPoint {
  std::uint64_t N = 0;
  double strong_error = 0.0;  // sqrt(E|x^1(N) - x^1(N_ref)|^2)
  double weak_bias = 0.0;     // |E[x_t^2](N) - exact second moment|
};

// For each N, couples the N-particle system against a reference system with
// N_ref = 8 * max(N) particles sharing the first N Brownian substreams.
// The strong error is the coupled L2 distance per particle; the weak bias of
// f = x^2 is the mean coupled difference x_i^2 - x_ref,i^2, so both the
// Monte Carlo noise and the time-discretisation bias cancel between the two
// systems and the pure interaction bias remains. Runs use the O(N)
// feature-average path.
inline std::vector<ChaosPoint> chaos_error(double alpha, double beta,
                                           const TimeGrid& grid,
                                           const std::vector<std::uint64_t>& N_list,
                                           std::uint64_t replications,
                                           std::uint64_t seed,
                                           double x0 = 1.0) {
  if (N_list.empty()) throw PreconditionError("chaos_error: empty N list");
  const std::uint64_t N_ref = 8 * *std::max_element(N_list.begin(), N_list.end());
  const ModelSpec model = linear_model(alpha, beta, KernelStyle::FeatureAverage,
                                       InitialLaw::point_mass({x0}));

  std::vector<ChaosPoint> out;
  for (std::uint64_t N : N_list) out.push_back({N, 0.0, 0.0});

  std::vector<double> weak_sum(N_list.size(), 0.0);
  std::vector<double> strong_sq(N_list.size(), 0.0);

  for (std::uint64_t rep = 0; rep < replications; ++rep) {
    const SimResult ref =
        simulate(model, grid, 1, ParticleSchedule::constant(N_ref),
                 DynamicsKind::IPS, {}, seed, rep);
    for (std::size_t a = 0; a < N_list.size(); ++a) {
      const std::uint64_t N = N_list[a];
      const SimResult sys =
          simulate(model, grid, 1, ParticleSchedule::constant(N),
                   DynamicsKind::IPS, {}, seed, rep);
      double sq = 0.0, diff = 0.0;
      for (std::uint64_t i = 0; i < N; ++i) {
        const double xi = sys.cloud.states[0][i];
        const double ri = ref.cloud.states[0][i];
        const double d = xi - ri;
        sq += d * d;
        diff += xi * xi - ri * ri;
      }
      strong_sq[a] += sq / static_cast<double>(N);
      weak_sum[a] += diff / static_cast<double>(N);
    }
  }
  for (std::size_t a = 0; a < N_list.size(); ++a) {
    out[a].strong_error =
        std::sqrt(strong_sq[a] / static_cast<double>(replications));
    out[a].weak_bias =
        std::abs(weak_sum[a] / static_cast<double>(replications));
  }
  return out;
}

// Closed-form ergodic-average bias of the mean for the linear model:
// |m(t) - (1/t) int_0^t m(s) ds|.
inline double ergodic_mean_bias(double alpha, double beta, double m0,
                                double t) {
  const double lambda = alpha - beta;
  if (!(lambda > 0.0))
    throw ConfigError("ergodic_mean_bias: requires alpha > beta");
  const double decay = std::exp(-lambda * t);
  return std::abs(m0 * (decay - (1.0 - decay) / (lambda * t)));
}

}  // namespace mkv
