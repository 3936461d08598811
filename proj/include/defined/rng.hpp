#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace defined {

/// Counter-free splittable PRNG built on splitmix64.
///
/// Two properties the rest of the code relies on:
///  * determinism: the draw sequence is a pure function of the seed,
///  * splittability: `fork(id)` derives an independent child stream, so a
///    batch of tasks can be generated in any order (or on any thread) and
///    still produce identical data for a given (seed, id).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed + 0x1FD5A3E8F1C0FB21ull)) {}

  /// Child stream keyed by `id`; does not advance this stream.
  Rng fork(std::uint64_t id) const {
    Rng child(0);
    child.state_ = mix(state_ ^ mix(id + 0x94D049BB133111EBull));
    return child;
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is < 2^-53 for the n used here (constellation sizes, k choices).
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller (caches the second draw).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]: keeps log() finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Circularly-symmetric complex normal with E|z|^2 = var
  /// (variance var/2 per real and imaginary part).
  std::complex<double> cgaussian(double var) {
    double s = std::sqrt(var * 0.5);
    double re = gaussian();
    double im = gaussian();
    return {s * re, s * im};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace defined
