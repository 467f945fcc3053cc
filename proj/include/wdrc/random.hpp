#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "wdrc/linalg.hpp"

namespace wdrc {

// Seeded random stream with fixed, documented transforms so that the same
// seed yields the same draws on every standard-library implementation:
//   - engine: std::mt19937_64 (bit-exact by the standard),
//   - uniform01: (x >> 11) * 2^-53, in [0, 1),
//   - normal: Box-Muller on two uniform draws, the second value of each
//     pair is cached and returned by the next call.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vector normal_vector(int dim) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = normal();
    return v;
  }

  // Index in [0, n).
  int uniform_index(int n) {
    int k = static_cast<int>(uniform01() * n);
    return k >= n ? n - 1 : k;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace wdrc
