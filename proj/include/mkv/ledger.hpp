#pragma once

#include <cstdint>

namespace mkv {

// Exact work counters. kernel_evals is the unit the t*n*N^2 style cost
// formulas are expressed in: one pairwise kernel call, one feature-map call,
// or one combiner call each count as one evaluation. Constant coefficients
// cost nothing.
struct CostLedger {
  std::uint64_t kernel_evals = 0;
  std::uint64_t noise_draws = 0;
  std::uint64_t steps = 0;

  void merge(const CostLedger& other) noexcept {
    kernel_evals += other.kernel_evals;
    noise_draws += other.noise_draws;
    steps += other.steps;
  }
};

}  // namespace mkv
