#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mkv/errors.hpp"

namespace mkv {

// Particle count per step. Constant keeps N throughout; Harmonic realises
// N_k ~ n*N/k (particle budget proportional to 1/time), capped at N_max and
// floored at 1. Step index k is 1-based; active(0) is the initial count.
struct ParticleSchedule {
  enum class Kind { Constant, Harmonic };

  Kind kind = Kind::Constant;
  std::uint64_t base = 1;   // Constant: N; Harmonic: n*N
  std::uint64_t cap = 1;    // Harmonic: N_max

  static ParticleSchedule constant(std::uint64_t N) {
    if (N < 1) throw ConfigError("schedule: N must be >= 1");
    return {Kind::Constant, N, N};
  }

  static ParticleSchedule harmonic(std::uint64_t N, std::uint64_t n,
                                   std::uint64_t N_max = 0) {
    if (N < 1 || n < 1) throw ConfigError("schedule: N and n must be >= 1");
    ParticleSchedule s;
    s.kind = Kind::Harmonic;
    s.base = n * N;
    s.cap = N_max == 0 ? n * N : N_max;
    return s;
  }

  std::uint64_t active_at(std::uint64_t step) const noexcept {
    if (kind == Kind::Constant) return base;
    if (step == 0) return std::min(cap, base);
    const auto raw = static_cast<std::uint64_t>(std::llround(
        static_cast<double>(base) / static_cast<double>(step)));
    return std::min(cap, std::max<std::uint64_t>(1, raw));
  }

  // Largest count the schedule can request (the storage requirement).
  std::uint64_t capacity() const noexcept {
    return kind == Kind::Constant ? base : std::min(cap, base);
  }

  const char* name() const noexcept {
    return kind == Kind::Constant ? "constant" : "harmonic";
  }
};

}  // namespace mkv
