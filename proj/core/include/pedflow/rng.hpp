#pragma once

#include <array>
#include <cstdint>

namespace pedflow {

/// Stateless 64-bit finalizer (splitmix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derive the seed of an independent child stream.
///
/// Every random consumer in the project gets its own stream:
///   trial_seed      = derive_stream(master_seed, trial_index)
///   matrix streams  = derive_stream(trial_seed, stream id per matrix)
///   agent streams   = derive_stream(trial_seed, agent stream base + agent id)
///
/// The derivation is the splitmix64 sequence evaluated at position
/// `stream_id + 1`, so child seeds do not depend on how many siblings exist
/// or in which order they are created.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return mix64(seed + (stream_id + 1) * 0x9E3779B97F4A7C15ULL);
}

/// xoshiro256++ with a splitmix64-expanded seed.
///
/// Hand-rolled rather than <random> so that every generated byte is identical
/// across compilers and platforms (std::normal_distribution is
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform01();

  /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Zero-mean gaussian via Box-Muller; consumes exactly two uniforms.
  double gaussian(double stddev = 1.0);

  /// Bernoulli(p).
  bool bernoulli(double p) { return uniform01() < p; }

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace pedflow
