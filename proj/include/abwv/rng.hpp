#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "abwv/errors.hpp"

namespace abwv {

/// Addressing for reproducible random streams. A (master_seed, stream_id)
/// pair fully determines every draw; distinct stream_ids give independent
/// streams, so parallel trials never share or race a generator.
struct RngSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
};

namespace detail {

// Stafford mix 13, the finalizer used by SplitMix64.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Gamma derivation from SplittableRandom: distinct odd increments keep
// streams on distinct orbits of the underlying Weyl sequence.
inline std::uint64_t mix_gamma(std::uint64_t z) {
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
  z = (z ^ (z >> 33)) | 1ULL;
  int ones = __builtin_popcountll(z ^ (z >> 1));
  return (ones < 24) ? z ^ 0xAAAAAAAAAAAAAAAAULL : z;
}

}  // namespace detail

/// Counter-style splittable generator (SplitMix64 core with a per-stream
/// gamma). State advances by a fixed increment, so jump-ahead is a single
/// multiply and draws are independent of scheduling order.
class StreamRng {
 public:
  explicit StreamRng(RngSpec spec)
      : state_(detail::mix64(spec.master_seed ^ detail::mix64(spec.stream_id + 0x9E3779B97F4A7C15ULL))),
        gamma_(detail::mix_gamma(detail::mix64(spec.stream_id) ^ spec.master_seed)) {}

  std::uint64_t next_u64() {
    state_ += gamma_;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal deviate, Box-Muller (trig form), one value cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  /// Poisson deviate. Inversion below mean 10, Hormann's PTRS transformed
  /// rejection above; exact distribution over the full range.
  std::int64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw ConfigError("poisson: mean must be >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      std::int64_t k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      double u = uniform() - 0.5;
      double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const double k = kf;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          k * log_mean - mean - std::lgamma(k + 1.0)) {
        return static_cast<std::int64_t>(kf);
      }
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t gamma_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace abwv
