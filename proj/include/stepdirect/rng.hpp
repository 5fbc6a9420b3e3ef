#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "stepdirect/errors.hpp"
#include "stepdirect/logspace.hpp"

namespace stepdirect {

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the cipher key; the 128-bit counter is split into a
/// 64-bit block index and a 64-bit stream index, so every (seed, stream) pair
/// addresses a disjoint sequence without any jump-ahead bookkeeping. An Rng is
/// owned by one chain at a time; it may be moved between threads but not shared.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ >= 2) refill();
    const std::uint64_t hi = block_[2 * pos_ + 1];
    const std::uint64_t lo = block_[2 * pos_];
    ++pos_;
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  // Raw Philox4x32-10 block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  void refill() noexcept {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    block_ = philox(ctr, key);
    ++counter_;
    pos_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 2;
};

inline Rng rng_new(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(seed, stream); }

inline double draw_uniform(Rng& rng, double a, double b) {
  if (!(a < b)) throw DomainError("draw_uniform: requires a < b");
  const double x = a + (b - a) * rng.uniform();
  return x < b ? x : std::nextafter(b, a);
}

inline double draw_standard_normal(Rng& rng) {
  // Box-Muller, one variate per call.
  const double r = std::sqrt(-2.0 * std::log(rng.uniform_open()));
  return r * std::cos(2.0 * std::numbers::pi * rng.uniform());
}

inline double draw_normal(Rng& rng, double mean, double sd) {
  if (!(sd > 0.0)) throw DomainError("draw_normal: requires sd > 0");
  return mean + sd * draw_standard_normal(rng);
}

/// Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 uses the U^(1/shape) boost.
inline double draw_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("draw_gamma: requires shape, rate > 0");
  double boost = 1.0;
  double a = shape;
  if (a < 1.0) {
    boost = std::pow(rng.uniform_open(), 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = draw_standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v / rate;
  }
}

inline double draw_inverse_gamma(Rng& rng, double shape, double rate) {
  return rate / draw_gamma(rng, shape, 1.0);
}

/// Inverse Gamma(shape, rate) restricted to (0, hi], by inverse CDF on the
/// restricted probability range. hi may be +infinity.
inline double draw_inverse_gamma_trunc(Rng& rng, double shape, double rate, double hi) {
  if (!(shape > 0.0) || !(rate > 0.0) || !(hi > 0.0)) {
    throw DomainError("draw_inverse_gamma_trunc: requires shape, rate, hi > 0");
  }
  // P(X <= x) = Q(shape, rate / x) where Q is the upper regularized gamma.
  const double mass = std::isinf(hi) ? 1.0 : boost::math::gamma_q(shape, rate / hi);
  if (!(mass >= 1e-300)) {
    throw InfeasibleTruncation("draw_inverse_gamma_trunc: truncation mass below working precision");
  }
  const double phi = rng.uniform_open() * mass;
  double z = 0.0;
  try {
    z = boost::math::gamma_q_inv(shape, phi);
  } catch (const std::exception& e) {
    throw NumericError(std::string("draw_inverse_gamma_trunc: ") + e.what());
  }
  const double x = rate / z;
  return std::isinf(hi) ? x : std::min(x, hi);
}

/// Exponential(rate) restricted to [lo, hi], by closed-form inverse CDF.
inline double draw_truncated_exponential(Rng& rng, double rate, double lo, double hi) {
  if (!(rate > 0.0) || !(lo < hi)) throw DomainError("draw_truncated_exponential: bad arguments");
  const double v = rng.uniform_open();
  // F(x) = (1 - exp(-rate (x - lo))) / (1 - exp(-rate (hi - lo)))
  const double span_mass = -std::expm1(-rate * (hi - lo));
  const double x = lo - std::log1p(-v * span_mass) / rate;
  return std::clamp(x, lo, hi);
}

/// Normal(mean, sd^2) restricted to [lo, hi] by plain rejection. Intended for
/// proposals whose mean lies inside the interval.
inline double draw_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0) || !(lo < hi)) throw DomainError("draw_truncated_normal: bad arguments");
  for (int tries = 0; tries < 1000000; ++tries) {
    const double x = draw_normal(rng, mean, sd);
    if (x >= lo && x <= hi) return x;
  }
  throw SamplerStall("draw_truncated_normal: no candidate inside the interval");
}

}  // namespace stepdirect
