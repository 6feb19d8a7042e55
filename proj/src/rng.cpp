#include "lfads/rng.hpp"

#include <cmath>

#include "lfads/errors.hpp"

namespace lfads {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void Rng::reseed(uint64_t seed) {
  uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
  // All-zero state would lock the generator; splitmix64 of any seed never
  // yields four zero words in a row, but guard anyway.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ULL;
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw ValueError("uniform_int: empty range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return lo + static_cast<int64_t>(r % span);
}

double Rng::normal() {
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int64_t Rng::poisson(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ValueError("poisson: rate must be finite and non-negative, got " + std::to_string(lambda));
  if (lambda == 0.0) return 0;
  if (lambda < 30.0) {
    const double l = std::exp(-lambda);
    int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > l);
    return k - 1;
  }
  // Split large rates; keeps the product method away from underflow while
  // preserving determinism (fixed recursion structure).
  int64_t half = poisson(lambda / 2.0);
  return half + poisson(lambda - lambda / 2.0);
}

uint64_t derive_seed(uint64_t seed, const std::string& tag, uint64_t index) {
  uint64_t x = seed;
  uint64_t h = splitmix64(x);
  for (unsigned char c : tag) {
    x = h ^ (static_cast<uint64_t>(c) + 0x9e3779b97f4a7c15ULL);
    h = splitmix64(x);
  }
  x = h ^ index;
  return splitmix64(x);
}

std::vector<double> random_normal_vector(Rng& rng, size_t n, double mean, double stddev) {
  std::vector<double> out(n);
  for (auto& v : out) v = mean + stddev * rng.normal();
  return out;
}

}  // namespace lfads
