#pragma once

// Small planted targets shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "stepdirect/logspace.hpp"
#include "stepdirect/target.hpp"

namespace testing_targets {

using stepdirect::GeometricBase;
using stepdirect::Interval;
using stepdirect::kNegInf;
using stepdirect::UniformBase;

// w = 1 on the whole base support, so f = g.
class ConstantUniform {
 public:
  using base_type = UniformBase;
  ConstantUniform(double lo = 0.0, double hi = 1.0) : base_(lo, hi) {}
  const UniformBase& base() const { return base_; }
  double log_weight(double) const { return 0.0; }
  double log_c() const { return 0.0; }
  double mode() const { return base_.lo(); }
  Interval interval(double t) const {
    if (t < 0.0) return {base_.lo(), base_.hi()};
    return {base_.lo(), base_.lo()};
  }

 private:
  UniformBase base_;
};

// A_u is a fixed set for every u < 1.
template <class Base>
class FixedSet {
 public:
  using base_type = Base;
  FixedSet(Base b, Interval iv) : base_(b), iv_(iv) {}
  const Base& base() const { return base_; }
  double log_weight(double x) const { return (x > iv_.lo && x < iv_.hi) ? 0.0 : kNegInf; }
  double log_c() const { return 0.0; }
  double mode() const { return 0.5 * (iv_.lo + iv_.hi); }
  Interval interval(double t) const {
    if (t < 0.0) return iv_;
    return {mode(), mode()};
  }

 private:
  Base base_;
  Interval iv_;
};

// log w(x) = -k x on Uniform(0, 1): P(A_u) = min(1, -log(u) / k), so
// P(A_u) = P(A_0) exactly for u <= exp(-k).
class ExpDecay {
 public:
  using base_type = UniformBase;
  explicit ExpDecay(double k) : k_(k) {}
  const UniformBase& base() const { return base_; }
  double log_weight(double x) const { return (x < 0.0 || x > 1.0) ? kNegInf : -k_ * x; }
  double log_c() const { return 0.0; }
  double mode() const { return 0.0; }
  Interval interval(double t) const {
    if (t == kNegInf) return {0.0, 1.0};
    if (t >= 0.0) return {0.0, 0.0};
    return {0.0, std::min(1.0, -t / k_)};
  }
  double log_prob(double log_u) const {
    if (log_u >= 0.0) return kNegInf;
    return std::log(std::min(1.0, -log_u / k_));
  }

 private:
  double k_;
  UniformBase base_{0.0, 1.0};
};

// Gaussian bump log w(x) = -(x - m)^2 / (2 s^2) on a Geometric(p) base.
class DiscreteBump {
 public:
  using base_type = GeometricBase;
  DiscreteBump(double p, std::int64_t m, double s) : base_(p), m_(m), s_(s) {}
  const GeometricBase& base() const { return base_; }
  double log_weight(double x) const {
    const double d = x - static_cast<double>(m_);
    return -d * d / (2.0 * s_ * s_);
  }
  double log_c() const { return 0.0; }
  double mode() const { return static_cast<double>(m_); }
  Interval interval(double t) const {
    auto lw = [this](double x) { return log_weight(x); };
    const Interval iv = stepdirect::discrete_interval(lw, m_, t);
    return iv;
  }
  double log_pmf_unnorm(std::int64_t x) const {
    return log_weight(static_cast<double>(x)) + base_.log_pmf(x);
  }

 private:
  GeometricBase base_;
  std::int64_t m_;
  double s_;
};

// Concave log w(x) = -(x - m)^2 / (2 s^2) on Uniform(lo, hi).
class ContinuousBump {
 public:
  using base_type = UniformBase;
  ContinuousBump(double lo, double hi, double m, double s) : base_(lo, hi), m_(m), s_(s) {}
  const UniformBase& base() const { return base_; }
  double log_weight(double x) const {
    if (x < base_.lo() || x > base_.hi()) return kNegInf;
    const double d = x - m_;
    return -d * d / (2.0 * s_ * s_);
  }
  double log_c() const { return log_weight(mode()); }
  double mode() const { return std::clamp(m_, base_.lo(), base_.hi()); }
  Interval interval(double t) const {
    if (t == kNegInf) return {base_.lo(), base_.hi()};
    if (!(log_weight(mode()) > t)) return {mode(), mode()};
    const double half = s_ * std::sqrt(-2.0 * t);
    return {std::max(base_.lo(), m_ - half), std::min(base_.hi(), m_ + half)};
  }

 private:
  UniformBase base_;
  double m_;
  double s_;
};

}  // namespace testing_targets
