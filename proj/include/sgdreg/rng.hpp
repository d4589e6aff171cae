#pragma once

// Seeded pseudo-random streams with a documented, platform-independent output
// sequence. Raw bits come from std::mt19937_64 (fully specified by the
// standard); the derived distributions below are implemented here because the
// standard library distributions are implementation-defined.

#include <cstddef>
#include <cstdint>
#include <random>

namespace sgdreg {

/// One round of the splitmix64 finalizer; advances `state`.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Seed of substream `index` under `master`. Distinct indices give
/// decorrelated seeds; the mapping is a pure function of both arguments.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n), unbiased (Lemire's multiply-and-reject).
  std::size_t uniform_index(std::size_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Standard normal via the Marsaglia polar method.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace sgdreg
