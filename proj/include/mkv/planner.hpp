#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "mkv/errors.hpp"
#include "mkv/ledger.hpp"
#include "mkv/schedule.hpp"

namespace mkv {

// Algorithms the planner can allocate parameters for. ES_AEA is the single
// self-interacting system, CS_AEA its M-ensemble version.
enum class Algorithm { EA, MCA, AEA, C_AEA, ES_AEA, CS_AEA };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::EA: return "ea";
    case Algorithm::MCA: return "mca";
    case Algorithm::AEA: return "aea";
    case Algorithm::C_AEA: return "c-aea";
    case Algorithm::ES_AEA: return "es-aea";
    case Algorithm::CS_AEA: return "cs-aea";
  }
  return "?";
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "ea") return Algorithm::EA;
  if (s == "mca") return Algorithm::MCA;
  if (s == "aea") return Algorithm::AEA;
  if (s == "c-aea" || s == "caea") return Algorithm::C_AEA;
  if (s == "es-aea" || s == "esaea") return Algorithm::ES_AEA;
  if (s == "cs-aea" || s == "csaea") return Algorithm::CS_AEA;
  throw ConfigError("unknown algorithm: " + s);
}

// ES-AEA admits two parameterisations with the same asymptotic cost: the
// harmonic particle schedule N_k ~ nN/k at mixing-time horizon, or a single
// particle at horizon eps^-2.
enum class SelfVariant { Harmonic, ConstantOne };

struct PlannerInput {
  Algorithm algorithm = Algorithm::AEA;
  double epsilon = 0.1;
  double lambda = 1.0;         // assumed ergodicity rate
  double cost_constant = 1.0;  // multiplier on all allocations
  SelfVariant self_variant = SelfVariant::Harmonic;
};

struct ParameterPlan {
  Algorithm algorithm = Algorithm::AEA;
  double t = 0.0;
  std::uint64_t n = 0;
  std::uint64_t N = 0;
  std::uint64_t M = 1;
  ParticleSchedule::Kind schedule = ParticleSchedule::Kind::Constant;
  double predicted_cost = 0.0;
};

namespace detail {

inline std::uint64_t ceil_u64(double v) {
  return static_cast<std::uint64_t>(std::ceil(v - 1e-9));
}

inline double ceil_steps(double t, std::uint64_t n) {
  return std::ceil(t * static_cast<double>(n) - 1e-9);
}

}  // namespace detail

// Closed-form cost of an algorithm in kernel evaluations: t*n*N^2 for one
// particle system (plus t*N reduction work for the time-averaging
// estimators), times M for ensembles. Self-interacting dynamics cost
// (nN)^2 * sum 1/k under the harmonic schedule (the exact sum, not its log
// approximation) and N^2 * tn(1+tn)/2 under a constant schedule.
inline double theoretical_cost(Algorithm algorithm, double t, std::uint64_t n,
                               std::uint64_t N, std::uint64_t M,
                               ParticleSchedule::Kind schedule =
                                   ParticleSchedule::Kind::Constant) {
  if (!(t > 0.0) || n < 1 || N < 1 || M < 1)
    throw ConfigError("theoretical_cost: parameters must be positive");
  const double steps = detail::ceil_steps(t, n);
  const double dN = static_cast<double>(N);
  const double dM = static_cast<double>(M);
  const double dn = static_cast<double>(n);
  switch (algorithm) {
    case Algorithm::EA:
    case Algorithm::MCA:
      return steps * dN * dN;
    case Algorithm::AEA:
      return steps * dN * dN + t * dN;
    case Algorithm::C_AEA:
      return (steps * dN * dN + t * dN) * dM;
    case Algorithm::ES_AEA:
    case Algorithm::CS_AEA: {
      double sim;
      if (schedule == ParticleSchedule::Kind::Harmonic) {
        double harmonic = 0.0;
        const auto ksteps = static_cast<std::uint64_t>(steps);
        for (std::uint64_t k = 1; k <= ksteps; ++k)
          harmonic += 1.0 / static_cast<double>(k);
        sim = dn * dN * dn * dN * harmonic;
      } else {
        sim = dN * dN * 0.5 * steps * (1.0 + steps);
      }
      return sim * dM;
    }
  }
  throw ConfigError("theoretical_cost: unknown algorithm");
}

// Parameter allocation for a target tolerance, with implied constant 1 and
// ceiling rounding on integer parameters.
inline ParameterPlan plan(const PlannerInput& input) {
  const double eps = input.epsilon;
  if (!(eps > 0.0) || !(eps < 1.0))
    throw ConfigError("plan: epsilon must lie in (0, 1)");
  if (!(input.lambda > 0.0)) throw ConfigError("plan: lambda must be > 0");
  const double c = input.cost_constant;
  const double inv = 1.0 / eps;
  const double log_inv = std::log(inv);
  const double t_mix = c * log_inv / input.lambda;  // lambda^-1 log(1/eps)

  ParameterPlan out;
  out.algorithm = input.algorithm;
  out.M = 1;
  switch (input.algorithm) {
    case Algorithm::EA:
      // The 1/sqrt(t) variance term dominates: t ~ eps^-2.
      out.t = c * inv * inv;
      out.n = detail::ceil_u64(c * inv);
      out.N = detail::ceil_u64(c * inv);
      break;
    case Algorithm::MCA:
      out.t = t_mix;
      out.n = detail::ceil_u64(c * inv);
      out.N = detail::ceil_u64(c * inv * inv);
      break;
    case Algorithm::AEA:
      out.t = c * inv;
      out.n = detail::ceil_u64(c * inv);
      out.N = detail::ceil_u64(c * inv);
      break;
    case Algorithm::C_AEA:
      out.t = t_mix;
      out.n = detail::ceil_u64(c * inv);
      out.N = detail::ceil_u64(c * inv);
      out.M = detail::ceil_u64(c * inv / (log_inv / input.lambda));
      break;
    case Algorithm::ES_AEA:
      if (input.self_variant == SelfVariant::Harmonic) {
        // t*N_t ~ eps^-2 with N_t = N/t, so N ~ eps^-2 / log(1/eps).
        out.t = t_mix;
        out.n = detail::ceil_u64(c * inv);
        out.N = detail::ceil_u64(c * inv * inv / log_inv);
        out.schedule = ParticleSchedule::Kind::Harmonic;
      } else {
        out.t = c * inv * inv;
        out.n = detail::ceil_u64(c * inv);
        out.N = 1;
      }
      break;
    case Algorithm::CS_AEA:
      // N_t = 1, M = e^{2 lambda t} / t at t = lambda^-1 log(1/eps).
      out.t = t_mix;
      out.n = detail::ceil_u64(c * inv);
      out.N = 1;
      out.M = detail::ceil_u64(c * std::exp(2.0 * input.lambda * out.t) / out.t);
      break;
  }
  out.predicted_cost =
      theoretical_cost(out.algorithm, out.t, out.n, out.N, out.M, out.schedule);
  return out;
}

// Leading-order cost for reporting and sweep plots.
inline double asymptotic_cost_order(Algorithm algorithm, double eps,
                                    double lambda) {
  if (!(eps > 0.0) || !(eps < 1.0))
    throw ConfigError("asymptotic_cost_order: epsilon must lie in (0, 1)");
  (void)lambda;
  const double inv = 1.0 / eps;
  const double log_inv = std::log(inv);
  switch (algorithm) {
    case Algorithm::EA: return std::pow(inv, 5);
    case Algorithm::MCA: return log_inv * std::pow(inv, 5);
    case Algorithm::AEA: return std::pow(inv, 4);
    case Algorithm::C_AEA: return std::pow(inv, 4);
    case Algorithm::ES_AEA: return std::pow(inv, 6);
    case Algorithm::CS_AEA: return std::pow(inv, 4) * log_inv;
  }
  throw ConfigError("asymptotic_cost_order: unknown algorithm");
}

// Kernel evaluations a naive pairwise run of these parameters performs. The
// harmonic case uses the rounded per-step schedule counts, which is what the
// ledger actually sees.
inline double expected_kernel_evals(Algorithm algorithm, double t,
                                    std::uint64_t n, std::uint64_t N,
                                    std::uint64_t M,
                                    ParticleSchedule::Kind schedule) {
  const auto steps = static_cast<std::uint64_t>(detail::ceil_steps(t, n));
  const double dN = static_cast<double>(N);
  const double dM = static_cast<double>(M);
  switch (algorithm) {
    case Algorithm::EA:
    case Algorithm::MCA:
    case Algorithm::AEA:
    case Algorithm::C_AEA:
      return static_cast<double>(steps) * dN * dN * dM;
    case Algorithm::ES_AEA:
    case Algorithm::CS_AEA: {
      double sum = 0.0;
      if (schedule == ParticleSchedule::Kind::Harmonic) {
        const ParticleSchedule sched = ParticleSchedule::harmonic(N, n);
        for (std::uint64_t k = 1; k <= steps; ++k) {
          const double nk = static_cast<double>(sched.active_at(k));
          sum += nk * nk * static_cast<double>(k);
        }
      } else {
        sum = dN * dN * 0.5 * static_cast<double>(steps) *
              static_cast<double>(steps + 1);
      }
      return sum * dM;
    }
  }
  throw ConfigError("expected_kernel_evals: unknown algorithm");
}

struct ConsistencyReport {
  double theoretical = 0.0;
  std::uint64_t observed = 0;
  bool match = false;  // exact integer equality (naive pairwise runs)
  double ratio = 0.0;  // observed / theoretical
};

inline ConsistencyReport consistency_check(Algorithm algorithm, double t,
                                           std::uint64_t n, std::uint64_t N,
                                           std::uint64_t M,
                                           ParticleSchedule::Kind schedule,
                                           const CostLedger& ledger) {
  ConsistencyReport report;
  report.theoretical = expected_kernel_evals(algorithm, t, n, N, M, schedule);
  report.observed = ledger.kernel_evals;
  report.ratio = report.theoretical > 0.0
                     ? static_cast<double>(report.observed) / report.theoretical
                     : 0.0;
  report.match = std::llround(report.theoretical) ==
                 static_cast<long long>(report.observed);
  return report;
}

}  // namespace mkv
