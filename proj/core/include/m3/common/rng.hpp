#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace m3 {

// splitmix64 finalizer; used to derive independent named sub-streams from one
// master seed so that adding a consumer never shifts another consumer's draws.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fork_seed(uint64_t seed, uint64_t tag) {
  return mix_seed(seed ^ mix_seed(tag));
}

inline uint64_t fork_seed(uint64_t seed, uint64_t tag_a, uint64_t tag_b) {
  return fork_seed(fork_seed(seed, tag_a), tag_b);
}

// Deterministic random stream. Distributions are hand-rolled on top of the
// raw engine output so draws are stable regardless of standard-library
// implementation details.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in (0, 1]: never returns exactly 0 so it is safe under log().
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(eng_() % span);
  }

  // Box-Muller; one draw per call (the pair's sibling is discarded for
  // simplicity -- throughput is irrelevant here, reproducibility is not).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace m3
