#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "stepdirect/errors.hpp"

namespace stepdirect {

inline constexpr int kMaxBisectIterations = 10000;

/// A bisection problem over a monotone 0 -> 1 step predicate.
///
/// Requires zeta(lo) == false and zeta(hi) == true. mid(x, y) must return a
/// point in [x, y] and dist(x, y) a nonnegative separation; the search stops
/// once dist(lo, hi) <= tol.
template <class Point, class Zeta, class Mid, class Dist>
struct BisectionSpec {
  Point lo;
  Point hi;
  Zeta zeta;
  Mid mid;
  Dist dist;
  double tol;
  int max_iter = kMaxBisectIterations;
};

template <class Point>
struct BisectionResult {
  Point point;  // final midpoint
  Point lo;     // final bracket, zeta(lo) == false
  Point hi;     // zeta(hi) == true
  int iterations = 0;
};

template <class Point, class Zeta, class Mid, class Dist>
BisectionResult<Point> bisect(const BisectionSpec<Point, Zeta, Mid, Dist>& spec) {
  if (!(spec.tol > 0.0)) throw DomainError("bisect: tolerance must be positive");
  Point lo = spec.lo;
  Point hi = spec.hi;
  if (spec.zeta(lo) || !spec.zeta(hi)) {
    throw BracketError("bisect: predicate must be 0 at the lower bound and 1 at the upper bound");
  }
  Point x = spec.mid(lo, hi);
  int it = 0;
  while (spec.dist(lo, hi) > spec.tol) {
    if (++it > spec.max_iter) {
      throw NonConvergence("bisect: iteration cap of " + std::to_string(spec.max_iter) +
                           " exceeded");
    }
    if (spec.zeta(x)) {
      hi = x;
    } else {
      lo = x;
    }
    x = spec.mid(lo, hi);
  }
  return {x, lo, hi, it};
}

inline double arithmetic_midpoint(double x, double y) { return x + 0.5 * (y - x); }

inline double geometric_midpoint(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("geometric_midpoint: requires positive arguments");
  if (x == y) return x;
  return std::exp(0.5 * (std::log(x) + std::log(y)));
}

inline std::int64_t floor_midpoint(std::int64_t i, std::int64_t j) { return i + (j - i) / 2; }

inline double abs_distance(double x, double y) { return std::abs(y - x); }

inline double log_distance(double x, double y) { return std::abs(std::log(y) - std::log(x)); }

// |x - y| relative to max(1, |x|, |y|).
inline double rel_distance(double x, double y) {
  return std::abs(y - x) / std::max({1.0, std::abs(x), std::abs(y)});
}

inline double index_distance(std::int64_t i, std::int64_t j) {
  return static_cast<double>(j > i ? j - i : i - j);
}

/// Least integer in [lo, hi] where zeta is true, given zeta(lo) false and zeta(hi) true.
template <class Zeta>
std::int64_t least_true_index(std::int64_t lo, std::int64_t hi, Zeta zeta) {
  const auto r = bisect(BisectionSpec<std::int64_t, Zeta, decltype(&floor_midpoint),
                                      decltype(&index_distance)>{
      lo, hi, zeta, &floor_midpoint, &index_distance, 1.0});
  return r.hi;
}

/// Root of a decreasing function on [lo, hi] with f(lo) > 0 >= f(hi), by bisection
/// with relative tolerance. Returns the final bracket midpoint.
template <class F>
double decreasing_root(F f, double lo, double hi, double tol = 1e-13) {
  auto zeta = [&](double x) { return f(x) <= 0.0; };
  return bisect(BisectionSpec<double, decltype(zeta), decltype(&arithmetic_midpoint),
                              decltype(&rel_distance)>{lo, hi, zeta, &arithmetic_midpoint,
                                                       &rel_distance, tol})
      .point;
}

}  // namespace stepdirect
