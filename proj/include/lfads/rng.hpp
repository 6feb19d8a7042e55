#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace lfads {

// Counter-free deterministic RNG (xoshiro256++ seeded via splitmix64).
// std::mt19937 would do, but the std distributions on top of it are
// implementation-defined; datasets and training runs must regenerate
// bitwise-identically, so both the engine and the samplers live here.
// State is four u64 words and serializes directly into checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed);

  uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);

  // Uniform integer on [lo, hi] inclusive (rejection sampling, unbiased).
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Standard normal via Box-Muller. The second value of each pair is
  // discarded so the stream position is a pure function of the call count.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Poisson count by inversion of the exponential-gap method (Knuth).
  // Fine for the rates this codebase sees (lambda up to a few hundred).
  int64_t poisson(double lambda);

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<uint64_t, 4> s_{};
};

// Stable derivation of independent sub-streams: hashes (seed, tag, index)
// through splitmix64 so e.g. per-epoch validation draws never perturb the
// training stream.
uint64_t derive_seed(uint64_t seed, const std::string& tag, uint64_t index = 0);

std::vector<double> random_normal_vector(Rng& rng, size_t n, double mean = 0.0,
                                         double stddev = 1.0);

}  // namespace lfads
