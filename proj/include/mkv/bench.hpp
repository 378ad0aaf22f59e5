#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkv/analysis.hpp"
#include "mkv/dynamics.hpp"
#include "mkv/estimators.hpp"
#include "mkv/model.hpp"

namespace mkv {

// Empirical checks of the convergence-rate assumptions on the linear model
// (alpha=1, beta=0.5, x0=1 unless stated). Shared between the `bench`
// subcommand and the acceptance suite.

struct BenchCheck {
  std::string name;
  std::string expected;
  double observed = 0.0;
  bool pass = false;
};

namespace bench {

inline constexpr double kAlpha = 1.0;
inline constexpr double kBeta = 0.5;

// Ergodic decay: W2 between time-t particle samples and invariant-Gaussian
// samples should fit exp(-lambda t).
struct W2DecayResult {
  RateFit fit;
  std::vector<std::pair<double, double>> points;  // (t, w2)
};

inline W2DecayResult w2_decay(std::uint64_t particles, std::uint64_t pooled_reps,
                              std::uint64_t invariant_samples,
                              std::uint64_t n, std::uint64_t seed) {
  const ModelSpec model = linear_model(kAlpha, kBeta, KernelStyle::FeatureAverage);
  const double sigma = std::sqrt(invariant_moment(kAlpha, kBeta, 2));
  std::vector<double> invariant(invariant_samples);
  RngStream pi_stream(seed, StreamDomain::Auxiliary, {0, 0, 0});
  for (std::uint64_t i = 0; i < invariant_samples; ++i)
    invariant[i] = sigma * pi_stream.normal_at(i);

  W2DecayResult out;
  for (double t = 0.5; t <= 5.0 + 1e-9; t += 0.5) {
    std::vector<double> pooled;
    pooled.reserve(particles * pooled_reps);
    for (std::uint64_t rep = 0; rep < pooled_reps; ++rep) {
      const SimResult sim = simulate(model, TimeGrid(n, t), 1,
                                     ParticleSchedule::constant(particles),
                                     DynamicsKind::IPS, {}, seed, rep);
      pooled.insert(pooled.end(), sim.cloud.states[0].begin(),
                    sim.cloud.states[0].begin() + particles);
    }
    out.points.emplace_back(t, w2_1d(std::move(pooled), invariant));
  }
  out.fit = fit_rate(out.points);
  return out;
}

// Propagation of chaos: strong error ~ 1/sqrt(N), weak bias of x^2 ~ 1/N.
struct ChaosSlopes {
  RateFit strong;
  RateFit weak;
  std::vector<ChaosPoint> points;
};

inline ChaosSlopes chaos_slopes(const std::vector<std::uint64_t>& N_list,
                                std::uint64_t replications, double t,
                                std::uint64_t n, std::uint64_t seed) {
  ChaosSlopes out;
  out.points =
      chaos_error(kAlpha, kBeta, TimeGrid(n, t), N_list, replications, seed);
  std::vector<std::pair<double, double>> strong_pts, weak_pts;
  for (const auto& p : out.points) {
    const double logN = std::log(static_cast<double>(p.N));
    if (p.strong_error > 0.0) strong_pts.emplace_back(logN, p.strong_error);
    if (p.weak_bias > 0.0) weak_pts.emplace_back(logN, p.weak_bias);
  }
  out.strong = fit_rate(strong_pts);
  out.weak = fit_rate(weak_pts);
  return out;
}

// Weak discretisation order: with beta = 0 the particles are independent
// classical SDE paths with exact mean e^{-alpha t}; the Euler mean error
// should decay like 1/n.
inline RateFit discretisation_slope(const std::vector<std::uint64_t>& n_list,
                                    double t, std::uint64_t particles,
                                    std::uint64_t replications,
                                    std::uint64_t seed) {
  const ModelSpec model = linear_model(1.0, 0.0, KernelStyle::FeatureAverage);
  const double exact = linear_mean(1.0, 0.0, 1.0, t);
  std::vector<std::pair<double, double>> points;
  for (std::uint64_t n : n_list) {
    double sum = 0.0;
    std::uint64_t count = 0;
    for (std::uint64_t rep = 0; rep < replications; ++rep) {
      const SimResult sim = simulate(model, TimeGrid(n, t), 1,
                                     ParticleSchedule::constant(particles),
                                     DynamicsKind::IPS, {}, seed, rep);
      for (std::uint64_t i = 0; i < particles; ++i)
        sum += sim.cloud.states[0][i];
      count += particles;
    }
    const double err = std::abs(sum / static_cast<double>(count) - exact);
    if (err > 0.0)
      points.emplace_back(std::log(static_cast<double>(n)), err);
  }
  return fit_rate(points);
}

// Sample variances of EA / AEA / MCA at matched parameters, all three read
// off the same simulations.
struct VarianceOrdering {
  double var_ea = 0.0;
  double var_aea = 0.0;
  double var_mca = 0.0;
};

inline VarianceOrdering variance_ordering(double t, std::uint64_t n,
                                          std::uint64_t N,
                                          std::uint64_t replications,
                                          std::uint64_t seed) {
  const ModelSpec model = linear_model(kAlpha, kBeta, KernelStyle::FeatureAverage);
  const TimeGrid grid(n, t);
  std::vector<double> ea, aea, mca;
  for (std::uint64_t rep = 0; rep < replications; ++rep) {
    ErgodicAccumulator acc(squared_norm_observable());
    simulate(model, grid, 1, ParticleSchedule::constant(N), DynamicsKind::IPS,
             {&acc}, seed, rep);
    ea.push_back(finalize_ea(acc));
    aea.push_back(finalize_aea(acc));
    mca.push_back(finalize_mca(acc));
  }
  auto sample_var = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return sq / static_cast<double>(v.size() - 1);
  };
  return {sample_var(ea), sample_var(aea), sample_var(mca)};
}

// Closed-form check that the ergodic-average bias of the mean decays like
// c/t: bias(t)*t stays within a factor 2 band for t >= 5.
inline double ergodic_bias_ratio() {
  double lo = 1e300, hi = 0.0;
  for (double t : {5.0, 10.0, 20.0, 40.0}) {
    const double r = ergodic_mean_bias(kAlpha, kBeta, 1.0, t) * t;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return hi / lo;
}

}  // namespace bench

// The assumption checks behind the `bench` subcommand. Quick mode shrinks
// particle counts and replications to seconds-scale.
inline std::vector<BenchCheck> run_bench(bool quick, std::uint64_t seed = 2024) {
  std::vector<BenchCheck> checks;
  auto add = [&checks](std::string name, std::string expected, double observed,
                       bool pass) {
    checks.push_back({std::move(name), std::move(expected), observed, pass});
  };

  {
    const auto r = quick ? bench::w2_decay(128, 4, 4000, 25, seed)
                         : bench::w2_decay(512, 8, 10000, 50, seed);
    add("he_w2_slope", "<= -0.25", r.fit.slope, r.fit.slope <= -0.25);
    add("he_w2_r_squared", ">= 0.85", r.fit.r_squared, r.fit.r_squared >= 0.85);
  }
  {
    const std::vector<std::uint64_t> N_list =
        quick ? std::vector<std::uint64_t>{8, 16, 32, 64}
              : std::vector<std::uint64_t>{8, 16, 32, 64, 128, 256};
    const auto r =
        bench::chaos_slopes(N_list, quick ? 50 : 200, 3.0, 50, seed);
    add("hs_strong_slope", "in [-0.65, -0.35]", r.strong.slope,
        r.strong.slope >= -0.65 && r.strong.slope <= -0.35);
    add("hw_weak_slope", "in [-1.4, -0.6]", r.weak.slope,
        r.weak.slope >= -1.4 && r.weak.slope <= -0.6);
  }
  {
    const auto fit = bench::discretisation_slope(
        {4, 8, 16, 32}, 2.0, quick ? 20000 : 250000, 4, seed);
    add("hdw_weak_slope", "in [-1.3, -0.7]", fit.slope,
        fit.slope >= -1.3 && fit.slope <= -0.7);
  }
  {
    const auto v =
        bench::variance_ordering(10.0, 20, 50, quick ? 60 : 200, seed);
    add("var_aea_vs_mca", "ratio <= 0.9", v.var_aea / v.var_mca,
        v.var_aea / v.var_mca <= 0.9);
    add("var_aea_vs_ea", "ratio <= 0.9", v.var_aea / v.var_ea,
        v.var_aea / v.var_ea <= 0.9);
  }
  {
    const double ratio = bench::ergodic_bias_ratio();
    add("ergodic_bias_1_over_t", "max/min <= 2", ratio, ratio <= 2.0);
  }
  return checks;
}

}  // namespace mkv
