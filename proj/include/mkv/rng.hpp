#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mkv {

// Counter-based random streams. Every (seed, domain, replication, ensemble,
// particle) tuple owns an independent substream, and draw i of a substream is
// a pure function of (key, i). This makes simulations bit-reproducible
// regardless of scheduling order or worker count, and lets coupled systems
// share Brownian paths by sharing particle indices.

namespace detail {

// SplitMix64 finalizer. Used both for key derivation and as the per-counter
// output function.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Purpose tag folded into the stream key so that e.g. initial-condition draws
// never collide with Brownian increments of the same particle.
enum class StreamDomain : std::uint64_t {
  InitialCondition = 1,
  Noise = 2,
  Auxiliary = 3,
};

struct StreamId {
  std::uint64_t replication = 0;
  std::uint64_t ensemble = 0;
  std::uint64_t particle = 0;
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamDomain domain, StreamId id) noexcept {
    std::uint64_t k = detail::mix64(seed);
    k = detail::mix64(k ^ static_cast<std::uint64_t>(domain));
    k = detail::mix64(k ^ id.replication);
    k = detail::mix64(k ^ id.ensemble);
    key_ = detail::mix64(k ^ id.particle);
  }

  // Uniform in (0, 1]; draw index i of this stream.
  double uniform_at(std::uint64_t i) const noexcept {
    const std::uint64_t bits = detail::mix64(key_ + i * 0x9e3779b97f4a7c15ULL);
    // 53-bit mantissa, shifted into (0, 1] so log() below is always finite.
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal draw index i (Box-Muller, consumes counters 2i and 2i+1).
  double normal_at(std::uint64_t i) const noexcept {
    const double u1 = uniform_at(2 * i);
    const double u2 = uniform_at(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace mkv
