#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pirl {

// splitmix64; the whole project derives randomness from this so runs are
// bit-reproducible for a fixed seed.
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, n), unbiased via rejection
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

  // uniform double in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one value per call (spare discarded so call count is stable)
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

private:
  uint64_t state_;
};

// Mixes a run seed with structured coordinates (epoch, image index, purpose
// tag) into an independent stream seed. Parallel pipelines stay reproducible
// because every consumer derives its own stream instead of sharing one.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 32;
  };
  for (char c : tag) mix(static_cast<uint64_t>(static_cast<unsigned char>(c)));
  mix(a);
  mix(b);
  return h;
}

}  // namespace pirl
