#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "stepdirect/errors.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/search.hpp"
#include "stepdirect/target.hpp"

namespace stepdirect {

/// Conway-Maxwell Poisson: f(x) = lambda^x / (x!)^nu / Z(lambda, nu).
struct CmpParams {
  double lambda = 2.0;
  double nu = 1.0;

  double log_mu() const { return std::log(lambda) / nu; }
};

// geometric_lambda: base Geometric(1/(1+lambda)). geometric_mu: base
// Geometric(1/(1+mu)) with mu = lambda^(1/nu), the default when nu < 1.
enum class CmpDecomposition { geometric_lambda, geometric_mu };

inline std::string_view to_string(CmpDecomposition d) {
  return d == CmpDecomposition::geometric_lambda ? "lambda" : "mu";
}

inline CmpDecomposition default_decomposition(const CmpParams& p) {
  return p.nu >= 1.0 ? CmpDecomposition::geometric_lambda : CmpDecomposition::geometric_mu;
}

namespace detail {

inline void check_cmp(const CmpParams& p) {
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) throw DomainError("CMP: requires lambda > 0");
  if (!(p.nu > 0.0) || !std::isfinite(p.nu)) throw DomainError("CMP: requires nu > 0");
}

// log w(x) = k0 + x * drift - nu * lgamma(x + 1).
struct CmpWeightCoef {
  double k0;
  double drift;
};

inline CmpWeightCoef cmp_coef(const CmpParams& p, CmpDecomposition d) {
  if (d == CmpDecomposition::geometric_lambda) {
    const double l = std::log1p(p.lambda);
    return {l, l};
  }
  // (x+1) log(1+mu) + x (nu-1) log mu, regrouped to avoid cancellation when mu is extreme.
  const double lmu = p.log_mu();
  return {softplus(lmu), std::log(p.lambda) + softplus(-lmu)};
}

}  // namespace detail

inline double cmp_log_weight(double x, const CmpParams& p, CmpDecomposition d) {
  const auto c = detail::cmp_coef(p, d);
  return c.k0 + x * c.drift - p.nu * std::lgamma(x + 1.0);
}

struct CmpMode {
  double x_mode = 0.0;  // root of the derivative on the continuous extension
  double log_c = 0.0;
};

/// Root of drift - nu * digamma(x + 1) by doubling bracket and bisection.
inline CmpMode cmp_mode(const CmpParams& p, CmpDecomposition d) {
  detail::check_cmp(p);
  const auto c = detail::cmp_coef(p, d);
  auto deriv = [&](double x) { return c.drift - p.nu * boost::math::digamma(x + 1.0); };
  constexpr double kCap = 9007199254740992.0;  // 2^53
  double hi = 1.0;
  while (deriv(hi) > 0.0) {
    hi *= 2.0;
    if (hi > kCap) throw NumericError("cmp_mode: mode exceeds 2^53");
  }
  const double lo = hi == 1.0 ? 0.0 : 0.5 * hi;
  const double x = deriv(lo) <= 0.0 ? lo : decreasing_root(deriv, lo, hi);
  return {x, cmp_log_weight(x, p, d)};
}

class CmpTarget {
 public:
  using base_type = GeometricBase;

  explicit CmpTarget(CmpParams p, std::optional<CmpDecomposition> decomp = std::nullopt)
      : params_(p),
        decomp_(decomp.value_or(default_decomposition(p))),
        base_(make_base(p, decomp_)),
        coef_(detail::cmp_coef(p, decomp_)) {
    const CmpMode m = cmp_mode(p, decomp_);
    mode_ = m.x_mode;
    log_c_ = m.log_c;
    const double f = std::floor(m.x_mode);
    int_mode_ = static_cast<std::int64_t>(log_weight(f + 1.0) > log_weight(f) ? f + 1.0 : f);
  }

  const CmpParams& params() const noexcept { return params_; }
  CmpDecomposition decomposition() const noexcept { return decomp_; }
  const GeometricBase& base() const noexcept { return base_; }

  double log_weight(double x) const {
    return coef_.k0 + x * coef_.drift - params_.nu * std::lgamma(x + 1.0);
  }

  // c is the supremum over the continuous extension, so u_H = w(int_mode) / c < 1.
  double log_c() const noexcept { return log_c_; }
  double mode() const noexcept { return mode_; }
  // Integer argmax of w over the support.
  std::int64_t int_mode() const noexcept { return int_mode_; }

  Interval interval(double threshold) const {
    auto lw = [this](double x) { return log_weight(x); };
    const Interval iv = discrete_interval(lw, int_mode_, threshold);
    if (iv.lo == iv.hi) return {mode_, mode_};
    return iv;
  }

  // log w(x) + log g(x), the unnormalized log pmf.
  double log_pmf_unnorm(std::int64_t x) const {
    return log_weight(static_cast<double>(x)) + base_.log_pmf(x);
  }

 private:
  static GeometricBase make_base(const CmpParams& p, CmpDecomposition d) {
    detail::check_cmp(p);
    if (d == CmpDecomposition::geometric_lambda) return GeometricBase::from_odds(p.lambda);
    return GeometricBase::from_log_odds(p.log_mu());
  }

  CmpParams params_;
  CmpDecomposition decomp_;
  GeometricBase base_;
  detail::CmpWeightCoef coef_;
  double mode_ = 0.0;
  double log_c_ = 0.0;
  std::int64_t int_mode_ = 0;
};

inline CmpTarget cmp_target(const CmpParams& p,
                            std::optional<CmpDecomposition> override_decomp = std::nullopt) {
  return CmpTarget(p, override_decomp);
}

/// Normalized CMP pmf from direct series summation, with log Z.
struct CmpPmf {
  std::vector<double> log_pmf;  // index = x
  double log_z = 0.0;

  std::vector<double> pmf() const {
    std::vector<double> out(log_pmf.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_pmf[i]);
    return out;
  }

  // log P(X <= x).
  double log_cdf(std::int64_t x) const {
    if (x < 0) return kNegInf;
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(x) + 1, log_pmf.size());
    LogSumAccumulator acc;
    for (std::size_t i = 0; i < top; ++i) acc.add(log_pmf[i]);
    return acc.value();
  }

  // Least x with P(X <= x) >= p.
  std::int64_t quantile(double p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < log_pmf.size(); ++i) {
      s += std::exp(log_pmf[i]);
      if (s >= p) return static_cast<std::int64_t>(i);
    }
    return static_cast<std::int64_t>(log_pmf.size()) - 1;
  }
};

/// Sums lambda^x / (x!)^nu in log space until the remaining tail, bounded by a
/// geometric series with the current term ratio, falls below tail_eps times
/// the running sum. nu = 0 is accepted (geometric series, lambda < 1).
inline CmpPmf cmp_pmf_oracle(const CmpParams& p, double tail_eps = 1e-12,
                             std::int64_t max_terms = 10000000) {
  if (!(p.lambda > 0.0)) throw DomainError("cmp_pmf_oracle: requires lambda > 0");
  if (!(p.nu >= 0.0)) throw DomainError("cmp_pmf_oracle: requires nu >= 0");
  if (p.nu == 0.0 && !(p.lambda < 1.0)) throw DomainError("cmp_pmf_oracle: nu = 0 needs lambda < 1");
  const double ll = std::log(p.lambda);
  const double log_eps = std::log(tail_eps);
  std::vector<double> terms;
  LogSumAccumulator acc;
  for (std::int64_t x = 0;; ++x) {
    if (x >= max_terms) throw NonConvergence("cmp_pmf_oracle: series did not converge");
    const auto xd = static_cast<double>(x);
    const double t = xd * ll - p.nu * std::lgamma(xd + 1.0);
    terms.push_back(t);
    acc.add(t);
    // Ratio of the next term to this one; nonincreasing in x.
    const double log_r = ll - p.nu * std::log(xd + 1.0);
    if (log_r < 0.0) {
      const double log_tail = t + log_r - log1m_exp(log_r);
      if (log_tail < log_eps + acc.value()) break;
    }
  }
  CmpPmf out;
  out.log_z = acc.value();
  out.log_pmf.resize(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) out.log_pmf[i] = terms[i] - out.log_z;
  return out;
}

struct CmpMismatch {
  double log_p_x_le_7306 = 0.0;
  double log_p_s_gt_7086 = 0.0;
  std::int64_t mu_base_q025 = 0;
  std::int64_t mu_base_q975 = 0;
  std::int64_t x_q025 = 0;
  std::int64_t x_q975 = 0;
};

/// How poorly each geometric base covers CMP(2, 0.075).
inline CmpMismatch cmp_mismatch_demo() {
  const CmpParams p{2.0, 0.075};
  const CmpPmf pmf = cmp_pmf_oracle(p);
  CmpMismatch out;
  out.log_p_x_le_7306 = pmf.log_cdf(7306);
  out.log_p_s_gt_7086 = GeometricBase::from_odds(p.lambda).log_sf(7086.0);
  const GeometricBase g_mu = GeometricBase::from_log_odds(p.log_mu());
  out.mu_base_q025 = g_mu.quantile(std::log(0.025));
  out.mu_base_q975 = g_mu.quantile(std::log(0.975));
  out.x_q025 = pmf.quantile(0.025);
  out.x_q975 = pmf.quantile(0.975);
  return out;
}

}  // namespace stepdirect
