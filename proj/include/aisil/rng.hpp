#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace aisil {

// Splittable counter-based random stream.  A stream is keyed by a root seed
// and a set of coordinates (run, particle, stage, role); draws are a
// splitmix64 walk from the mixed key.  Streams with distinct coordinates are
// independent, streams with equal coordinates replay identically, and the
// draw sequence does not depend on how work is scheduled across threads.
class RngStream {
 public:
  enum class Role : std::uint64_t {
    Generic = 0,
    PriorInit = 1,
    Resample = 2,
    Move = 3,
    Filter = 4,
    Data = 5,
  };

  explicit RngStream(std::uint64_t root_seed, std::uint64_t run = 0,
                     std::uint64_t particle = 0, std::uint64_t stage = 0,
                     Role role = Role::Generic)
      : root_(root_seed),
        state_(mix_key(root_seed, run, particle, stage,
                       static_cast<std::uint64_t>(role))) {}

  // Fresh stream keyed from the same root seed at new coordinates.
  RngStream substream(std::uint64_t run, std::uint64_t particle,
                      std::uint64_t stage, Role role) const {
    return RngStream(root_, run, particle, stage, role);
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); never returns exactly 0.
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal (Box-Muller, one value per pair of uniforms).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma(shape, scale=1) via Marsaglia-Tsang, with the shape<1 boost.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape <= 0");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Inverse gamma with density proportional to x^{-shape-1} exp(-rate / x).
  double inverse_gamma(double shape, double rate) {
    return rate / gamma(shape);
  }

 private:
  static std::uint64_t mix_key(std::uint64_t seed, std::uint64_t run,
                               std::uint64_t particle, std::uint64_t stage,
                               std::uint64_t role) {
    std::uint64_t h = seed;
    const std::uint64_t coords[4] = {run, particle, stage, role};
    for (std::uint64_t c : coords) {
      h ^= c + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h = (h ^ (h >> 33)) * 0xff51afd7ed558ccdULL;
      h = (h ^ (h >> 33)) * 0xc4ceb9fe1a85ec53ULL;
      h ^= h >> 33;
    }
    return h;
  }

  std::uint64_t root_;
  std::uint64_t state_;
};

}  // namespace aisil
