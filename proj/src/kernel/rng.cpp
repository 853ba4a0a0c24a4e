#include "morphlm/kernel/rng.hpp"

#include <cmath>

#include "morphlm/common.hpp"

namespace morphlm::kernel {

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) throw ValidationError("uniform_int: n must be positive");
  // Rejection sampling to avoid modulo bias.
  std::uint64_t un = static_cast<std::uint64_t>(n);
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::int64_t>(x % un);
}

}  // namespace morphlm::kernel
