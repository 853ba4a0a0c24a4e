#pragma once

#include <cstdint>
#include <random>

namespace morphlm::kernel {

// Deterministic RNG: mt19937_64 bit stream with hand-rolled uniform/normal
// transforms so identical seeds give bit-identical doubles on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the spare value is cached.
  double normal(double mean = 0.0, double stddev = 1.0);

  // Uniform integer in [0, n).
  std::int64_t uniform_int(std::int64_t n);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace morphlm::kernel
