#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace dbne {

// All randomness in the toolkit flows from explicit 64-bit seeds. Substreams
// are derived from a master seed plus fixed tags (stage, pass index, seed
// node, ...) so that independent units of work can run in parallel and still
// reproduce the sequential results exactly.

namespace detail {
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Substream derivation rule: fold each part into the running state with a
// splitmix64 finalizer. Documented so reruns are structurally reproducible.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = detail::splitmix64_mix(base);
  for (std::uint64_t p : parts) {
    s = detail::splitmix64_mix(s ^ p);
  }
  return s;
}

// Fixed stage tags for substream derivation.
namespace stage {
inline constexpr std::uint64_t kShuffle = 0x53485546ULL;   // pass-level vertex order
inline constexpr std::uint64_t kCascade = 0x43415343ULL;   // one diffusion simulation
inline constexpr std::uint64_t kSvd = 0x53564400ULL;       // sketch for truncated SVD
inline constexpr std::uint64_t kEvalSplit = 0x45534c54ULL; // train/test split
inline constexpr std::uint64_t kEvalTrain = 0x4554524eULL; // classifier training
}  // namespace stage

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; floating-point and bounded-integer draws below avoid the
// implementation-defined std::*_distribution classes so that a given seed
// yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double strictly inside (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, n), n >= 1. Rejection sampling.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (one value per pair; the sibling value is
  // dropped to keep the stream layout simple).
  double next_gaussian();

 private:
  std::mt19937_64 engine_;
};

inline double rng_two_pi() { return 6.283185307179586476925286766559; }

inline double Rng::next_gaussian() {
  const double u1 = next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(rng_two_pi() * u2);
}

}  // namespace dbne
