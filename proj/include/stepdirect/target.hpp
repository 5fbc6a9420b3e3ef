#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numbers>
#include <type_traits>

#include "stepdirect/errors.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/rng.hpp"
#include "stepdirect/search.hpp"

namespace stepdirect {

/// Boundary (x1, x2) of A_u = {x : log w(x) > threshold}. For discrete targets
/// the members are the integers strictly inside; for continuous targets the
/// open interval. x1 == x2 means the set is empty.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntWindow {
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  bool empty() const noexcept { return lo > hi; }
  std::int64_t size() const noexcept { return empty() ? 0 : hi - lo + 1; }
};

// Integers strictly inside (x1, x2), clipped to the nonnegative integers.
inline IntWindow integer_window(double x1, double x2) {
  constexpr double kMaxInt = 9.0e18;
  const double lo = std::max(std::floor(x1) + 1.0, 0.0);
  const double hi = std::ceil(x2) - 1.0;
  if (hi < lo) return {};
  if (lo > kMaxInt) throw NumericError("integer_window: window exceeds 64-bit range");
  // An unbounded right end stands for the whole upper tail.
  const std::int64_t top =
      hi > kMaxInt ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(hi);
  return {static_cast<std::int64_t>(lo), top};
}

/// Natural-log probability with -inf for zero.
struct LogProb {
  double value = kNegInf;
  bool is_zero() const noexcept { return value == kNegInf; }
  double prob() const noexcept { return std::exp(value); }
};

/// Geometric distribution on {0, 1, ...} with success probability p.
class GeometricBase {
 public:
  using value_type = std::int64_t;
  static constexpr bool discrete = true;

  explicit GeometricBase(double p) : p_(p) {
    if (!(p > 0.0) || !(p <= 1.0)) throw DomainError("GeometricBase: requires 0 < p <= 1");
    log_p_ = std::log(p);
    log_q_ = std::log1p(-p);
  }

  // Success probability 1 / (1 + theta), built without cancellation.
  static GeometricBase from_odds(double theta) {
    if (!(theta > 0.0)) throw DomainError("GeometricBase: requires theta > 0");
    GeometricBase g(1.0 / (1.0 + theta));
    g.log_q_ = -std::log1p(1.0 / theta);
    g.log_p_ = -std::log1p(theta);
    return g;
  }

  // Success probability 1 / (1 + exp(log_theta)), for odds beyond double range.
  static GeometricBase from_log_odds(double log_theta) {
    GeometricBase g(0.5);
    g.log_q_ = -softplus(-log_theta);
    g.log_p_ = -softplus(log_theta);
    g.p_ = std::exp(g.log_p_);
    if (!(g.log_q_ < 0.0)) throw DomainError("GeometricBase: success probability rounds to 0");
    return g;
  }

  double p() const noexcept { return p_; }
  double log_q() const noexcept { return log_q_; }

  double log_pmf(std::int64_t x) const {
    if (x < 0) return kNegInf;
    return log_p_ + static_cast<double>(x) * log_q_;
  }

  double log_cdf(double x) const {
    if (x < 0.0) return kNegInf;
    return log1m_exp((std::floor(x) + 1.0) * log_q_);
  }

  double log_sf(double x) const {
    if (x < 0.0) return 0.0;
    return (std::floor(x) + 1.0) * log_q_;
  }

  // Least support point with log G(x) >= lp.
  std::int64_t quantile(double lp) const {
    if (lp == kNegInf) return 0;
    if (lp >= 0.0) throw DomainError("GeometricBase::quantile: probability 1 has no finite quantile");
    const double guess = std::ceil(log1m_exp(lp) / log_q_ - 1.0);
    std::int64_t x = to_index(guess);
    while (x > 0 && log_cdf(static_cast<double>(x - 1)) >= lp) --x;
    while (log_cdf(static_cast<double>(x)) < lp) ++x;
    return x;
  }

  // Least support point with log S(x) <= ls.
  std::int64_t quantile_sf(double ls) const {
    if (ls >= log_q_) return 0;
    if (ls == kNegInf) throw DomainError("GeometricBase::quantile_sf: survival 0 has no finite quantile");
    const double guess = std::ceil(ls / log_q_ - 1.0);
    std::int64_t x = to_index(guess);
    while (x > 0 && log_sf(static_cast<double>(x - 1)) <= ls) --x;
    while (log_sf(static_cast<double>(x)) > ls) ++x;
    return x;
  }

 private:
  static std::int64_t to_index(double v) {
    if (!(v < 9.0e18)) throw NumericError("GeometricBase: quantile exceeds 64-bit range");
    return static_cast<std::int64_t>(std::max(v, 0.0));
  }

  double p_;
  double log_p_;
  double log_q_;
};

/// Uniform distribution on [lo, hi].
class UniformBase {
 public:
  using value_type = double;
  static constexpr bool discrete = false;

  UniformBase(double lo, double hi) : lo_(lo), hi_(hi), log_width_(std::log(hi - lo)) {
    if (!(lo < hi)) throw DomainError("UniformBase: requires lo < hi");
  }

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

  double log_pdf(double x) const { return (x < lo_ || x > hi_) ? kNegInf : -log_width_; }

  double log_cdf(double x) const {
    if (x <= lo_) return kNegInf;
    if (x >= hi_) return 0.0;
    return std::log(x - lo_) - log_width_;
  }

  double log_sf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return kNegInf;
    return std::log(hi_ - x) - log_width_;
  }

  double quantile(double lp) const {
    return std::clamp(lo_ + std::exp(lp) * (hi_ - lo_), lo_, hi_);
  }

  double quantile_sf(double ls) const {
    return std::clamp(hi_ - std::exp(ls) * (hi_ - lo_), lo_, hi_);
  }

 private:
  double lo_;
  double hi_;
  double log_width_;
};

template <class B>
concept BaseDistribution = requires(const B& b, double x, double lp) {
  typename B::value_type;
  { B::discrete } -> std::convertible_to<bool>;
  { b.log_cdf(x) } -> std::convertible_to<double>;
  { b.log_sf(x) } -> std::convertible_to<double>;
  { b.quantile(lp) } -> std::convertible_to<typename B::value_type>;
  { b.quantile_sf(lp) } -> std::convertible_to<typename B::value_type>;
};

/// What the sampler needs from one univariate target f(x) ∝ w(x) g(x).
///
/// log_weight is the log weight (continuous extension for integer support),
/// log_c its supremum attained at mode(), and interval(t) returns (x1, x2)
/// bounding {x : log w(x) > t} with x1 <= mode() <= x2.
template <class T>
concept WeightedTarget = requires(const T& t, double x) {
  typename T::base_type;
  requires BaseDistribution<typename T::base_type>;
  { t.base() } -> std::convertible_to<const typename T::base_type&>;
  { t.log_weight(x) } -> std::convertible_to<double>;
  { t.log_c() } -> std::convertible_to<double>;
  { t.mode() } -> std::convertible_to<double>;
  { t.interval(x) } -> std::convertible_to<Interval>;
};

template <class T>
using target_value_t = typename T::base_type::value_type;

namespace detail {

inline constexpr double kLogHalf = -std::numbers::ln2;

// log(G(b) - G(a)) for a < b, using survival functions in the upper tail.
template <BaseDistribution B>
double log_mass_between(const B& base, double a, double b) {
  const double lb = base.log_cdf(b);
  if (lb <= kLogHalf) return log_diff_exp(lb, base.log_cdf(a));
  return log_diff_exp(base.log_sf(a), base.log_sf(b));
}

// Inverse-CDF draw from g restricted to (a, b].
template <BaseDistribution B>
typename B::value_type quantile_between(const B& base, double a, double b, double v) {
  const double log_v = std::log(v);
  const double lb = base.log_cdf(b);
  if (lb <= kLogHalf) {
    const double la = base.log_cdf(a);
    return base.quantile(log_add_exp(la, log_v + log_diff_exp(lb, la)));
  }
  const double sa = base.log_sf(a);
  const double sb = base.log_sf(b);
  return base.quantile_sf(log_diff_exp(sa, log_v + log_diff_exp(sa, sb)));
}

}  // namespace detail

// Base-measure log probability of the set bounded by iv.
template <BaseDistribution B>
double log_base_mass(const B& base, const Interval& iv) {
  if constexpr (B::discrete) {
    const IntWindow w = integer_window(iv.lo, iv.hi);
    if (w.empty()) return kNegInf;
    return detail::log_mass_between(base, static_cast<double>(w.lo) - 1.0,
                                    static_cast<double>(w.hi));
  } else {
    if (!(iv.lo < iv.hi)) return kNegInf;
    return detail::log_mass_between(base, iv.lo, iv.hi);
  }
}

/// log P(A_u) with u supplied as log u, so thresholds far below exp(-745) work.
template <WeightedTarget T>
double log_prob_at_log_u(const T& target, double log_u) {
  if (log_u >= 0.0) return kNegInf;
  if (log_u == kNegInf) {
    return log_base_mass(target.base(), target.interval(kNegInf));
  }
  return log_base_mass(target.base(), target.interval(log_u + target.log_c()));
}

template <WeightedTarget T>
LogProb log_prob_Au(const T& target, double u) {
  if (!(u >= 0.0) || !(u <= 1.0)) throw DomainError("log_prob_Au: requires 0 <= u <= 1");
  return {log_prob_at_log_u(target, std::log(u))};
}

/// Draw from g restricted to A_u, with u given as log u.
template <WeightedTarget T>
target_value_t<T> truncated_draw_log_u(const T& target, double log_u, Rng& rng) {
  using B = typename T::base_type;
  const B& base = target.base();
  const Interval iv = target.interval(log_u == kNegInf ? kNegInf : log_u + target.log_c());
  const double v = rng.uniform_open();
  if constexpr (B::discrete) {
    const IntWindow w = log_u >= 0.0 ? IntWindow{} : integer_window(iv.lo, iv.hi);
    if (w.empty()) throw EmptySetError("truncated_draw: A_u has no support points");
    if (w.lo == w.hi) return w.lo;
    const double a = static_cast<double>(w.lo) - 1.0;
    const double b = static_cast<double>(w.hi);
    if (detail::log_mass_between(base, a, b) == kNegInf) {
      throw EmptySetError("truncated_draw: A_u has no base mass");
    }
    return std::clamp<std::int64_t>(detail::quantile_between(base, a, b, v), w.lo, w.hi);
  } else {
    if (log_u >= 0.0 || !(iv.lo < iv.hi)) throw EmptySetError("truncated_draw: A_u is empty");
    if (detail::log_mass_between(base, iv.lo, iv.hi) == kNegInf) {
      throw EmptySetError("truncated_draw: A_u has no base mass");
    }
    return std::clamp(detail::quantile_between(base, iv.lo, iv.hi, v), iv.lo, iv.hi);
  }
}

template <WeightedTarget T>
target_value_t<T> truncated_draw(const T& target, double u, Rng& rng) {
  if (!(u >= 0.0) || !(u <= 1.0)) throw DomainError("truncated_draw: requires 0 <= u <= 1");
  return truncated_draw_log_u(target, std::log(u), rng);
}

/// A_u endpoints for a unimodal weight on the nonnegative integers.
///
/// mode is the integer argmax. Returns integer-valued (x1, x2) such that the
/// members of A_u are exactly the integers strictly between them; x2_cap is an
/// exclusive upper limit for the doubling search of the right endpoint.
template <class LogW>
Interval discrete_interval(const LogW& log_w, std::int64_t mode, double threshold,
                           std::int64_t x2_cap = std::int64_t{1} << 53) {
  const auto m = static_cast<double>(mode);
  if (threshold == kNegInf) return {-1.0, kInf};
  if (!(log_w(m) > threshold)) return {m, m};
  // Left: least integer in [0, mode] inside the set, minus one.
  double x1 = -1.0;
  if (!(log_w(0.0) > threshold)) {
    const std::int64_t first = least_true_index(
        0, mode, [&](std::int64_t i) { return log_w(static_cast<double>(i)) > threshold; });
    x1 = static_cast<double>(first - 1);
  }
  // Right: first integer past the mode outside the set.
  std::int64_t step = 1;
  std::int64_t lo = mode;
  std::int64_t hi = mode + 1;
  while (log_w(static_cast<double>(hi)) > threshold) {
    lo = hi;
    if (hi >= x2_cap) throw NumericError("discrete_interval: right endpoint beyond supported range");
    step *= 2;
    hi = std::min(mode + step, x2_cap);
  }
  const std::int64_t x2 = least_true_index(
      lo, hi, [&](std::int64_t i) { return !(log_w(static_cast<double>(i)) > threshold); });
  return {x1, static_cast<double>(x2)};
}

/// Root of f on a bracket where f changes sign, by Newton steps safeguarded
/// with bisection. f_lo_positive tells which end is inside the superlevel set.
template <class F, class DF>
double safeguarded_root(const F& f, const DF& df, double lo, double hi, bool f_lo_positive,
                        double x0, double tol = 1e-12) {
  double x = x0;
  for (int it = 0; it < 400; ++it) {
    if (hi - lo <= tol * std::max(1.0, std::abs(x))) break;
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0.0) == f_lo_positive) {
      lo = x;
    } else {
      hi = x;
    }
    const double d = df(x);
    double next = x - fx / d;
    if (!std::isfinite(next) || !(next > lo) || !(next < hi)) next = lo + 0.5 * (hi - lo);
    if (std::abs(next - x) <= 0.25 * tol * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return lo + 0.5 * (hi - lo);
}

/// A_u endpoints for a concave log weight on [lo, hi] with maximum at mode.
template <class LogW, class DLogW>
Interval continuous_interval(const LogW& log_w, const DLogW& dlog_w, double mode, double lo,
                             double hi, double threshold, double tol = 1e-12) {
  if (threshold == kNegInf) return {lo, hi};
  if (!(log_w(mode) > threshold)) return {mode, mode};
  auto f = [&](double x) { return log_w(x) - threshold; };
  double x1 = lo;
  if (mode > lo && !(log_w(lo) > threshold)) {
    x1 = safeguarded_root(f, dlog_w, lo, mode, false, lo + 0.5 * (mode - lo), tol);
  }
  double x2 = hi;
  if (mode < hi && !(log_w(hi) > threshold)) {
    x2 = safeguarded_root(f, dlog_w, mode, hi, true, mode + 0.5 * (hi - mode), tol);
  }
  return {x1, x2};
}

}  // namespace stepdirect
