#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <numbers>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "stepdirect/errors.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/search.hpp"
#include "stepdirect/target.hpp"

namespace stepdirect {

enum class Midpoint { arithmetic, geometric };

inline std::string_view to_string(Midpoint m) {
  return m == Midpoint::arithmetic ? "arithmetic" : "geometric";
}

inline Midpoint parse_midpoint(std::string_view s) {
  if (s == "arithmetic" || s == "arith") return Midpoint::arithmetic;
  if (s == "geometric" || s == "geom") return Midpoint::geometric;
  throw DomainError("unknown midpoint kind: " + std::string(s));
}

/// Midpoint of [exp(a), exp(b)] returned as a log. The geometric midpoint
/// falls back to the arithmetic one when the lower end is u = 0.
inline double log_midpoint(double log_a, double log_b, Midpoint kind) {
  if (kind == Midpoint::geometric && log_a != kNegInf) return 0.5 * (log_a + log_b);
  return log_add_exp(log_a, log_b) - std::numbers::ln2;
}

/// Knots u_0 < ... < u_N with log P(A_{u_j}). Knots are held as log u so that
/// thresholds far below the smallest double remain distinct; log_u[0] may be
/// -inf (u_0 = 0).
struct KnotTable {
  std::vector<double> log_u;
  std::vector<double> log_p;
  Midpoint midpoint = Midpoint::geometric;
  double omega = 0.5;

  std::size_t size() const noexcept { return log_u.size(); }
  double u(std::size_t j) const { return std::exp(log_u.at(j)); }
};

// log |R_j| = log(P_{j-1} - P_j) + log(u_j - u_{j-1}) for j >= 1.
inline double log_rect_area(const KnotTable& kt, std::size_t j) {
  return log_diff_exp(kt.log_p[j - 1], kt.log_p[j]) + log_diff_exp(kt.log_u[j], kt.log_u[j - 1]);
}

inline double log_total_rect_area(const KnotTable& kt) {
  LogSumAccumulator acc;
  for (std::size_t j = 1; j < kt.size(); ++j) acc.add(log_rect_area(kt, j));
  return acc.value();
}

inline double total_rect_area(const KnotTable& kt) { return std::exp(log_total_rect_area(kt)); }

namespace detail {

inline constexpr double kEqualLogTol = 1e-12;

inline bool log_equal(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= kEqualLogTol * std::max(1.0, std::abs(b));
}

}  // namespace detail

// Knots live in log u, so the scan can go far below the smallest double.
inline constexpr double kMaxLogUScan = 1073741824.0;  // 2^30

struct ULoResult {
  double log_u = 0.0;
  double log_p0 = 0.0;  // log P(A_0)
};

/// Locates u_L: the largest u (to tolerance) at which P(A_u) still equals P(A_0).
///
/// Scans log u = -j for j in {0, 1, 2, 4, ..., 2^30} until P(A_u) matches
/// P(A_0), then bisects in log u (a geometric midpoint in u). The lower end of
/// the final bracket is returned so that h* stays above P(A_u) on [0, u_L).
template <WeightedTarget T>
ULoResult find_log_u_lo(const T& target, double tol = 1e-10) {
  const double lp0 = log_prob_at_log_u(target, kNegInf);
  if (lp0 == kNegInf) throw DegenerateTarget("find_u_lo: P(A_0) is zero");
  auto dropped = [&](double lu) { return !detail::log_equal(log_prob_at_log_u(target, lu), lp0); };
  double prev = 0.0;
  double found = 1.0;  // sentinel: not found
  for (double j = 0.0; j <= kMaxLogUScan; j = (j == 0.0 ? 1.0 : 2.0 * j)) {
    if (!dropped(-j)) {
      found = -j;
      break;
    }
    prev = -j;
  }
  if (found > 0.0) throw DegenerateTarget("find_u_lo: P(A_u) below P(A_0) for all u >= exp(-2^30)");
  const auto r = bisect(BisectionSpec<double, decltype(dropped), decltype(&arithmetic_midpoint),
                                      decltype(&rel_distance)>{found, prev, dropped,
                                                               &arithmetic_midpoint, &rel_distance,
                                                               tol});
  return {r.lo, lp0};
}

/// Locates u_H: the smallest u (to tolerance) with P(A_u) = 0, by bisection in
/// log u over [u_L, 1]. Returns the upper bracket end, where P(A_u) = 0.
template <WeightedTarget T>
double find_log_u_hi(const T& target, double log_u_lo, double tol = 1e-10) {
  auto empty = [&](double lu) { return log_prob_at_log_u(target, lu) == kNegInf; };
  if (log_u_lo == kNegInf) throw BracketError("find_u_hi: u_L must be positive");
  if (empty(log_u_lo)) throw BracketError("find_u_hi: P(A_{u_L}) is zero");
  // Continuous targets keep mass up to u = 1; the bisection would only walk toward 0.
  if (log_u_lo < -tol && !empty(-tol)) return 0.0;
  const auto r = bisect(BisectionSpec<double, decltype(empty), decltype(&arithmetic_midpoint),
                                      decltype(&rel_distance)>{log_u_lo, 0.0, empty,
                                                               &arithmetic_midpoint, &rel_distance,
                                                               tol});
  return r.hi;
}

template <WeightedTarget T>
double find_u_lo(const T& target) {
  return std::exp(find_log_u_lo(target).log_u);
}

template <WeightedTarget T>
double find_u_hi(const T& target, double u_lo) {
  return std::exp(find_log_u_hi(target, std::log(u_lo)));
}

namespace detail {

struct RectEntry {
  double key;
  double left;   // log u of the left knot
  double right;  // log u of the right knot
};

struct RectOrder {
  // Max-heap on key; among equal keys the leftmost interval comes first.
  bool operator()(const RectEntry& a, const RectEntry& b) const {
    if (a.key != b.key) return a.key < b.key;
    return a.left > b.left;
  }
};

inline double rect_key(double omega, double lp_left, double lp_right, double lu_left,
                       double lu_right) {
  const double dp = log_diff_exp(lp_left, lp_right);
  const double du = log_diff_exp(lu_right, lu_left);
  if (dp == kNegInf) return kNegInf;
  return omega * dp + (1.0 - omega) * du;
}

// Keeps log P nonincreasing across knots despite rounding in the endpoint solves.
inline void enforce_monotone(std::vector<double>& log_p) {
  for (std::size_t j = 1; j < log_p.size(); ++j) log_p[j] = std::min(log_p[j], log_p[j - 1]);
}

}  // namespace detail

/// Greedy knot selection: split the highest-priority rectangle at its
/// midpoint until N + 1 knots exist. The priority is
/// omega * log(P_{j-1} - P_j) + (1 - omega) * log(u_j - u_{j-1}).
///
/// If split_areas is non-null it receives the total rectangle area after the
/// initial two knots and after every split.
template <WeightedTarget T>
KnotTable select_knots_log(const T& target, double log_u_lo, double log_u_hi, int n,
                           Midpoint midpoint, double omega,
                           std::vector<double>* split_areas = nullptr) {
  if (n < 1) throw DomainError("select_knots: N must be at least 1");
  if (!(omega > 0.0 && omega < 1.0)) throw DomainError("select_knots: omega must lie in (0, 1)");
  if (!(log_u_lo < log_u_hi)) throw DomainError("select_knots: requires u_lo < u_hi");

  std::map<double, double> knots;  // log u -> log P
  knots[log_u_lo] = log_prob_at_log_u(target, log_u_lo);
  knots[log_u_hi] = log_prob_at_log_u(target, log_u_hi);

  std::priority_queue<detail::RectEntry, std::vector<detail::RectEntry>, detail::RectOrder> queue;
  auto push = [&](double l, double r) {
    queue.push({detail::rect_key(omega, knots[l], knots[r], l, r), l, r});
  };
  push(log_u_lo, log_u_hi);

  auto current_area = [&] {
    LogSumAccumulator acc;
    for (auto it = std::next(knots.begin()); it != knots.end(); ++it) {
      const auto prev = std::prev(it);
      acc.add(log_diff_exp(prev->second, it->second) + log_diff_exp(it->first, prev->first));
    }
    return std::exp(acc.value());
  };
  if (split_areas) split_areas->push_back(current_area());

  while (static_cast<int>(knots.size()) < n + 1 && !queue.empty()) {
    const detail::RectEntry e = queue.top();
    queue.pop();
    const auto it = knots.find(e.left);
    if (it == knots.end() || std::next(it) == knots.end() || std::next(it)->first != e.right) {
      continue;  // stale entry
    }
    const double m = log_midpoint(e.left, e.right, midpoint);
    if (!(m > e.left && m < e.right)) continue;  // interval too narrow to split
    knots[m] = log_prob_at_log_u(target, m);
    push(e.left, m);
    push(m, e.right);
    if (split_areas) split_areas->push_back(current_area());
  }

  KnotTable kt;
  kt.midpoint = midpoint;
  kt.omega = omega;
  for (const auto& [lu, lp] : knots) {
    kt.log_u.push_back(lu);
    kt.log_p.push_back(lp);
  }
  detail::enforce_monotone(kt.log_p);
  return kt;
}

template <WeightedTarget T>
KnotTable select_knots(const T& target, double u_lo, double u_hi, int n, Midpoint midpoint,
                       double omega = 0.5) {
  return select_knots_log(target, std::log(u_lo), std::log(u_hi), n, midpoint, omega);
}

/// Knots u_j = u_L + (j / N)(u_H - u_L).
template <WeightedTarget T>
KnotTable equal_spaced_knots_log(const T& target, double log_u_lo, double log_u_hi, int n) {
  if (n < 1) throw DomainError("equal_spaced_knots: N must be at least 1");
  if (!(log_u_lo < log_u_hi)) throw DomainError("equal_spaced_knots: requires u_lo < u_hi");
  KnotTable kt;
  kt.midpoint = Midpoint::arithmetic;
  const double log_width = log_diff_exp(log_u_hi, log_u_lo);
  for (int j = 0; j <= n; ++j) {
    double lu = log_u_lo;
    if (j == n) {
      lu = log_u_hi;
    } else if (j > 0) {
      lu = log_add_exp(log_u_lo, std::log(static_cast<double>(j) / n) + log_width);
    }
    if (!kt.log_u.empty() && !(lu > kt.log_u.back())) continue;
    kt.log_u.push_back(lu);
    kt.log_p.push_back(log_prob_at_log_u(target, lu));
  }
  detail::enforce_monotone(kt.log_p);
  return kt;
}

template <WeightedTarget T>
KnotTable equal_spaced_knots(const T& target, double u_lo, double u_hi, int n) {
  return equal_spaced_knots_log(target, std::log(u_lo), std::log(u_hi), n);
}

/// Step envelope h*(u) over a knot table, with its normalizer a and the
/// piecewise-linear CDF H and quantile H^{-1}.
class StepApprox {
 public:
  StepApprox() = default;
  explicit StepApprox(KnotTable kt) : kt_(std::move(kt)) {
    if (kt_.size() < 2) throw DomainError("StepApprox: at least two knots are required");
    for (std::size_t j = 1; j < kt_.size(); ++j) {
      if (!(kt_.log_u[j] > kt_.log_u[j - 1])) throw DomainError("StepApprox: knots must ascend");
      if (kt_.log_p[j] > kt_.log_p[j - 1]) throw DomainError("StepApprox: log P must not increase");
    }
    if (!(kt_.log_u.back() <= 0.0)) throw DomainError("StepApprox: knots must lie in [0, 1]");
    rebuild();
  }

  const KnotTable& knots() const noexcept { return kt_; }
  std::size_t n_knots() const noexcept { return kt_.size(); }
  double log_a() const noexcept { return log_a_; }
  double a() const noexcept { return std::exp(log_a_); }
  // H(u_j), j = 0..N; the last entry is exactly 1.
  const std::vector<double>& cdf_table() const noexcept { return h_; }

  double log_u_lo() const noexcept { return kt_.log_u.front(); }
  double log_u_hi() const noexcept { return kt_.log_u.back(); }

  /// log h*(u) for u = exp(log_u).
  double logpdf_unnorm_log(double log_u) const {
    if (log_u < kt_.log_u.front()) return kt_.log_p.front();
    if (log_u >= kt_.log_u.back()) return kNegInf;
    return kt_.log_p[piece(log_u)];
  }

  double cdf_log(double log_u) const {
    if (log_u == kNegInf) return 0.0;
    if (log_u >= kt_.log_u.back()) return 1.0;
    if (log_u < kt_.log_u.front()) return h_.front() * std::exp(log_u - kt_.log_u.front());
    const std::size_t l = piece(log_u);
    const double frac = std::exp(log_diff_exp(log_u, kt_.log_u[l]) -
                                 log_diff_exp(kt_.log_u[l + 1], kt_.log_u[l]));
    return h_[l] + (h_[l + 1] - h_[l]) * frac;
  }

  /// log H^{-1}(phi).
  double quantile_log(double phi) const {
    if (!(phi >= 0.0) || !(phi <= 1.0)) throw DomainError("step_quantile: requires 0 <= phi <= 1");
    if (phi == 0.0) return kNegInf;
    if (phi >= 1.0) return kt_.log_u.back();
    if (phi < h_.front()) return kt_.log_u.front() + std::log(phi / h_.front());
    const auto n = static_cast<std::int64_t>(h_.size()) - 1;
    const std::int64_t m = least_true_index(
        0, n, [&](std::int64_t i) { return h_[static_cast<std::size_t>(i)] > phi; });
    const auto l = static_cast<std::size_t>(m - 1);
    const double frac = (phi - h_[l]) / (h_[l + 1] - h_[l]);
    if (frac <= 0.0) return kt_.log_u[l];
    return log_add_exp(kt_.log_u[l],
                       std::log(frac) + log_diff_exp(kt_.log_u[l + 1], kt_.log_u[l]));
  }

  double cdf(double u) const { return cdf_log(std::log(u)); }
  double quantile(double phi) const { return std::exp(quantile_log(phi)); }
  double logpdf_unnorm(double u) const { return logpdf_unnorm_log(std::log(u)); }

  double log_total_area() const { return log_total_rect_area(kt_); }
  double total_area() const { return std::exp(log_total_area()); }

  // Computable bound sum |R_j| / a on the rejection probability.
  double rejection_bound() const { return std::min(1.0, std::exp(log_total_area() - log_a_)); }

  bool has_knot(double log_u) const {
    return std::binary_search(kt_.log_u.begin(), kt_.log_u.end(), log_u);
  }

  /// Adds a knot at log_u with log P(A_u) = log_p. Knots outside (u_0, u_N)
  /// or already present are ignored; returns whether the table changed.
  bool insert(double log_u, double log_p) {
    if (!(log_u > kt_.log_u.front() && log_u < kt_.log_u.back())) return false;
    const auto pos = std::lower_bound(kt_.log_u.begin(), kt_.log_u.end(), log_u);
    if (*pos == log_u) return false;
    const auto idx = static_cast<std::size_t>(pos - kt_.log_u.begin());
    log_p = std::clamp(log_p, kt_.log_p[idx], kt_.log_p[idx - 1]);
    kt_.log_u.insert(pos, log_u);
    kt_.log_p.insert(kt_.log_p.begin() + static_cast<std::ptrdiff_t>(idx), log_p);
    rebuild();
    return true;
  }

 private:
  // Index l with u_l <= u < u_{l+1}; requires u_0 <= u < u_N.
  std::size_t piece(double log_u) const {
    const auto it = std::upper_bound(kt_.log_u.begin(), kt_.log_u.end(), log_u);
    return static_cast<std::size_t>(it - kt_.log_u.begin()) - 1;
  }

  void rebuild() {
    const std::size_t n = kt_.size();
    std::vector<double> pieces(n);
    pieces[0] = kt_.log_p[0] + kt_.log_u[0];
    for (std::size_t j = 1; j < n; ++j) {
      pieces[j] = kt_.log_p[j - 1] + log_diff_exp(kt_.log_u[j], kt_.log_u[j - 1]);
    }
    log_a_ = log_sum_exp(pieces);
    if (log_a_ == kNegInf || std::isnan(log_a_)) {
      throw DegenerateTarget("StepApprox: normalizer a is zero");
    }
    h_.assign(n, 0.0);
    LogSumAccumulator acc;
    for (std::size_t j = 0; j < n; ++j) {
      acc.add(pieces[j]);
      const double hj = std::exp(acc.value() - log_a_);
      h_[j] = std::min(1.0, j > 0 ? std::max(hj, h_[j - 1]) : hj);
    }
    h_[n - 1] = 1.0;
  }

  KnotTable kt_;
  double log_a_ = 0.0;
  std::vector<double> h_;
};

inline StepApprox build_step(KnotTable kt) { return StepApprox(std::move(kt)); }
inline double step_cdf(const StepApprox& s, double u) { return s.cdf(u); }
inline double step_quantile(const StepApprox& s, double phi) { return s.quantile(phi); }
inline double step_logpdf_unnorm(const StepApprox& s, double u) { return s.logpdf_unnorm(u); }

/// Copy-on-write knot insertion; returns the updated snapshot.
template <WeightedTarget T>
StepApprox insert_knot(const StepApprox& s, const T& target, double u, bool* inserted = nullptr) {
  StepApprox out = s;
  const double lu = std::log(u);
  const bool changed = out.insert(lu, log_prob_at_log_u(target, lu));
  if (inserted) *inserted = changed;
  return out;
}

}  // namespace stepdirect
