// SPDX-License-Identifier: Apache-2.0
#pragma once

// Platform-independent random streams. std::mt19937_64 output is fixed by the
// standard; the distribution transforms below are written out so that values
// do not depend on the standard library's distribution implementations.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace cnt {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (-scale, scale).
  double uniform_symmetric(double scale) {
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      if (u != -1.0) return u * scale;
    }
  }

  /// Normal(0, sd^2) by Box-Muller; the paired variate is cached.
  double normal(double sd) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * sd;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta) * sd;
  }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      const std::uint64_t x = eng_();
      if (x < limit) return x % n;
    }
  }

  template <typename T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cnt
