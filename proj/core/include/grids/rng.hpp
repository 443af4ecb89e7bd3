#pragma once

#include <array>
#include <cstdint>

namespace grids {

/// xoshiro256** seeded through splitmix64.
///
/// The generator and every derived distribution (uniform, normal, bounded
/// integers) are implemented here rather than taken from <random>, whose
/// distributions are implementation-defined. Equal seeds therefore give equal
/// streams on every conforming compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream for a (seed, stream id) pair. Used to keep parameter
  // init, data generation and baseline sampling decoupled.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal (Marsaglia polar method).
  double normal();
  double normal(double mean, double stddev);

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace grids
