#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lmmrec {

/// Seeded random stream with a pinned protocol, so splits and synthetic
/// data are byte-identical across platforms and releases.
///
/// Protocol: the engine is std::mt19937_64 (algorithm fixed by the C++
/// standard). Derived draws avoid std:: distributions, whose output is
/// implementation-defined:
///   uniform01(): (engine() >> 11) * 2^-53, in [0, 1)
///   index(n):    engine() % n
///   normal():    Box-Muller on two uniform01() draws, one value per call
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform index in [0, n). n must be > 0.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(engine_() % n);
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    // Box-Muller, discarding the second variate to keep the stream
    // independent of call pairing.
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return mean + sd * (r * std::cos(two_pi * u2));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lmmrec
