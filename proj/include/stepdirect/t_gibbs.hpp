#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "stepdirect/direct_sampler.hpp"
#include "stepdirect/errors.hpp"
#include "stepdirect/linalg.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/rng.hpp"
#include "stepdirect/search.hpp"
#include "stepdirect/stats.hpp"
#include "stepdirect/target.hpp"

namespace stepdirect {

/// y = X beta + gamma, gamma_i ~ N(0, s_i), s_i ~ IG(nu/2, nu sigma2 / 2).
struct TregData {
  Vector y;
  Matrix X;

  std::size_t n() const noexcept { return y.size(); }
  std::size_t d() const noexcept { return X.cols(); }
};

struct TregHyper {
  double sigma_beta2 = 100.0;
  double a_sigma = 1.0;
  double b_sigma = 1.0;
  double a_nu = 0.01;
  double b_nu = 200.0;
};

struct TregState {
  Vector beta;
  double sigma2 = 1.0;
  Vector s;
  double nu = 5.0;
};

struct NuTargetParams {
  std::int64_t n = 0;
  double A = 0.0;
  double a_nu = 0.01;
  double b_nu = 200.0;
};

inline void validate_treg_data(const TregData& data) {
  if (data.X.rows() != data.n()) throw ValidationError("TregData: X must have n rows");
  if (data.d() < 1 || data.n() < data.d()) throw ValidationError("TregData: need n >= d >= 1");
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (!std::isfinite(data.y[i])) throw ValidationError("TregData: y[" + std::to_string(i) + "] not finite");
    for (std::size_t j = 0; j < data.d(); ++j) {
      if (!std::isfinite(data.X(i, j))) {
        throw ValidationError("TregData: X(" + std::to_string(i) + "," + std::to_string(j) +
                              ") not finite");
      }
    }
  }
}

inline void validate_treg_hyper(const TregHyper& h) {
  if (!(h.sigma_beta2 > 0.0) || !(h.a_sigma > 0.0) || !(h.b_sigma > 0.0) || !(h.a_nu > 0.0)) {
    throw DomainError("TregHyper: hyperparameters must be positive");
  }
  if (!(h.a_nu < h.b_nu) || !std::isfinite(h.b_nu)) throw DomainError("TregHyper: need a_nu < b_nu < inf");
}

/// A = 1/2 sum log(s_i / sigma2) + 1/2 sum sigma2 / s_i.
inline double compute_A(const Vector& s, double sigma2) {
  if (!(sigma2 > 0.0)) throw DomainError("compute_A: requires sigma2 > 0");
  double a = 0.0;
  for (double si : s) {
    if (!(si > 0.0)) throw DomainError("compute_A: requires s_i > 0");
    const double r = sigma2 / si;
    a += 0.5 * (r - std::log(r));
  }
  return a;
}

/// f(nu | rest) with Uniform(a_nu, b_nu) base and
/// log w(nu) = n [(nu/2) log(nu/2) - lgamma(nu/2)] - A nu.
class NuTarget {
 public:
  using base_type = UniformBase;

  explicit NuTarget(const NuTargetParams& p) : p_(p), base_(p.a_nu, p.b_nu) {
    if (p.n < 1) throw DomainError("NuTarget: requires n >= 1");
    if (!(p.a_nu > 0.0) || !std::isfinite(p.b_nu)) throw DomainError("NuTarget: requires 0 < a_nu < b_nu < inf");
    const double half_n = 0.5 * static_cast<double>(p.n);
    // Small relative slack for A computed as a floating-point sum.
    if (!(p.A >= half_n * (1.0 - 1e-12)) || !std::isfinite(p.A)) {
      throw DomainError("NuTarget: requires A >= n/2");
    }
    if (dlog_weight(p.b_nu) >= 0.0) {
      mode_ = p.b_nu;
    } else if (dlog_weight(p.a_nu) <= 0.0) {
      mode_ = p.a_nu;
    } else {
      auto f = [this](double v) { return dlog_weight(v); };
      auto df = [this](double v) { return d2log_weight(v); };
      mode_ = safeguarded_root(f, df, p.a_nu, p.b_nu, true, 0.5 * (p.a_nu + p.b_nu));
    }
    log_c_ = log_weight(mode_);
  }

  const NuTargetParams& params() const noexcept { return p_; }
  const UniformBase& base() const noexcept { return base_; }

  double log_weight(double nu) const {
    if (nu < p_.a_nu || nu > p_.b_nu) return kNegInf;
    return unbounded_log_weight(nu);
  }

  // Without the prior indicator, for nu > 0.
  double unbounded_log_weight(double nu) const {
    const double h = 0.5 * nu;
    return static_cast<double>(p_.n) * (h * std::log(h) - std::lgamma(h)) - p_.A * nu;
  }

  double dlog_weight(double nu) const {
    const double h = 0.5 * nu;
    const double half_n = 0.5 * static_cast<double>(p_.n);
    return half_n * (std::log(h) - boost::math::digamma(h)) + half_n - p_.A;
  }

  double d2log_weight(double nu) const {
    const double half_n = 0.5 * static_cast<double>(p_.n);
    return half_n * (1.0 / nu - 0.5 * boost::math::trigamma(0.5 * nu));
  }

  double log_c() const noexcept { return log_c_; }
  double mode() const noexcept { return mode_; }

  Interval interval(double threshold) const {
    auto lw = [this](double v) { return log_weight(v); };
    auto dlw = [this](double v) { return dlog_weight(v); };
    return continuous_interval(lw, dlw, mode_, p_.a_nu, p_.b_nu, threshold);
  }

 private:
  NuTargetParams p_;
  UniformBase base_;
  double mode_ = 0.0;
  double log_c_ = 0.0;
};

inline NuTarget nu_target(const NuTargetParams& p) { return NuTarget(p); }

struct NuDirectResult {
  double nu = 0.0;
  DirectDrawReport<double> report;
};

inline NuDirectResult draw_nu_direct(const NuTargetParams& p, Rng& rng, const SamplerConfig& cfg) {
  const NuTarget target(p);
  BuiltSampler built = build_sampler(target, cfg);
  NuDirectResult out;
  out.report = direct_draw(target, built.step, rng, cfg);
  out.nu = out.report.x;
  return out;
}

struct GewekeRoot {
  double nu_star = 0.0;
  bool bracketed = true;  // false: no sign change in the bracket, boundary used
};

/// Root of n/2 [log(nu/2) + 1 - digamma(nu/2)] + 1/nu - A on [1e-6, b_nu].
inline GewekeRoot geweke_nu_star(const NuTargetParams& p) {
  const double half_n = 0.5 * static_cast<double>(p.n);
  auto g = [&](double v) {
    const double h = 0.5 * v;
    return half_n * (std::log(h) + 1.0 - boost::math::digamma(h)) + 1.0 / v - p.A;
  };
  double lo = 1e-6;
  const double hi = p.b_nu;
  if (g(hi) > 0.0) return {hi, false};
  if (g(lo) <= 0.0) return {lo, false};
  // Move the lower end inward by doubling while the sign stays positive.
  while (2.0 * lo < hi && g(2.0 * lo) > 0.0) lo *= 2.0;
  const double up = std::min(2.0 * lo, hi);
  return {decreasing_root(g, lo, up), true};
}

struct NuGewekeResult {
  double nu = 0.0;
  std::int64_t n_rejected = 0;
  double nu_star = 0.0;
  bool bracketed = true;
};

/// Rejection sampler with a truncated Exponential(1/nu*) proposal on [a_nu, b_nu].
inline NuGewekeResult draw_nu_geweke(const NuTargetParams& p, Rng& rng,
                                     std::int64_t max_rejects = 100000000) {
  const NuTarget target(p);
  const GewekeRoot root = geweke_nu_star(p);
  const double ns = root.nu_star;
  const double log_top = target.unbounded_log_weight(ns) + 1.0;
  NuGewekeResult out;
  out.nu_star = ns;
  out.bracketed = root.bracketed;
  for (;;) {
    const double cand = draw_truncated_exponential(rng, 1.0 / ns, p.a_nu, p.b_nu);
    const double log_ratio = target.unbounded_log_weight(cand) + cand / ns - log_top;
    if (std::log(rng.uniform_open()) < log_ratio) {
      out.nu = cand;
      return out;
    }
    if (++out.n_rejected > max_rejects) throw SamplerStall("draw_nu_geweke: too many rejections");
  }
}

/// beta ~ N(theta, Omega^{-1}), Omega = X' D_s^{-1} X + I / sigma_beta2, theta = Omega^{-1} X' D_s^{-1} y.
inline Vector draw_beta_t(const TregState& st, const TregData& data, const TregHyper& hyper,
                          Rng& rng) {
  Vector w(data.n());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / st.s[i];
  SymMatrix omega = crossprod(data.X, w);
  for (std::size_t j = 0; j < data.d(); ++j) omega.add(j, j, 1.0 / hyper.sigma_beta2);
  Vector wy(data.n());
  for (std::size_t i = 0; i < wy.size(); ++i) wy[i] = w[i] * data.y[i];
  return draw_mvn_precision(rng, omega, tmatvec(data.X, wy));
}

/// sigma2 ~ Gamma(a_sigma + n nu / 2, b_sigma + nu / 2 sum 1 / s_i).
inline double draw_sigma2_t(const TregState& st, const TregData& data, const TregHyper& hyper,
                            Rng& rng) {
  double inv = 0.0;
  for (double si : st.s) inv += 1.0 / si;
  const double n = static_cast<double>(data.n());
  return draw_gamma(rng, hyper.a_sigma + 0.5 * n * st.nu, hyper.b_sigma + 0.5 * st.nu * inv);
}

/// s_i ~ IG((nu + 1) / 2, nu sigma2 / 2 + (y_i - x_i' beta)^2 / 2), independently.
inline Vector draw_s(const TregState& st, const TregData& data, Rng& rng) {
  const Vector xb = matvec(data.X, st.beta);
  Vector s(data.n());
  const double shape = 0.5 * (st.nu + 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = data.y[i] - xb[i];
    s[i] = draw_inverse_gamma(rng, shape, 0.5 * (st.nu * st.sigma2 + r * r));
  }
  return s;
}

enum class NuMethod { direct, geweke };

inline std::string to_string(NuMethod m) { return m == NuMethod::direct ? "direct" : "geweke"; }

struct TregRunConfig {
  int iters = 10000;
  int burnin = 5000;
  int thin = 1;
  NuMethod method = NuMethod::direct;
  SamplerConfig sampler{30, Midpoint::geometric, 0.5, KnotMethod::select, true};
};

struct TregRunResult {
  ChainOutput chain;
  std::vector<std::int64_t> nu_rejects;  // per iteration, burn-in included
  std::int64_t total_nu_rejects = 0;
};

inline std::vector<std::string> treg_column_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("beta_" + std::to_string(j));
  names.insert(names.end(), {"sigma2", "nu"});
  return names;
}

inline TregState treg_default_state(const TregData& data, const TregHyper& hyper) {
  TregState st;
  st.beta.assign(data.d(), 0.0);
  st.s.assign(data.n(), 1.0);
  st.sigma2 = 1.0;
  st.nu = std::clamp(5.0, hyper.a_nu, hyper.b_nu);
  return st;
}

/// Gibbs sampler scanning beta, s, sigma2, nu. Saved columns hold beta, sigma2, nu.
inline TregRunResult treg_gibbs_run(const TregData& data, const TregHyper& hyper,
                                    const TregRunConfig& cfg, Rng& rng,
                                    std::optional<TregState> init = std::nullopt) {
  if (cfg.iters < 0 || cfg.burnin < 0 || cfg.thin < 1) {
    throw DomainError("treg_gibbs_run: need iters >= 0, burnin >= 0, thin >= 1");
  }
  validate_treg_hyper(hyper);
  validate_treg_data(data);
  TregRunResult out;
  out.chain = ChainOutput(treg_column_names(data.d()), cfg.burnin, cfg.thin);
  if (cfg.iters == 0) return out;
  TregState st = init.value_or(treg_default_state(data, hyper));
  if (st.beta.size() != data.d() || st.s.size() != data.n()) {
    throw DomainError("treg_gibbs_run: initial state has wrong dimensions");
  }
  out.nu_rejects.reserve(static_cast<std::size_t>(cfg.iters));
  std::vector<double> row;
  for (int it = 1; it <= cfg.iters; ++it) {
    st.beta = draw_beta_t(st, data, hyper, rng);
    st.s = draw_s(st, data, rng);
    st.sigma2 = draw_sigma2_t(st, data, hyper, rng);
    // A >= n/2 holds mathematically; clamp the rounding.
    const double half_n = 0.5 * static_cast<double>(data.n());
    const NuTargetParams p{static_cast<std::int64_t>(data.n()),
                           std::max(compute_A(st.s, st.sigma2), half_n), hyper.a_nu, hyper.b_nu};
    std::int64_t rej = 0;
    if (cfg.method == NuMethod::direct) {
      const NuDirectResult r = draw_nu_direct(p, rng, cfg.sampler);
      st.nu = r.nu;
      rej = r.report.n_rejected;
    } else {
      const NuGewekeResult r = draw_nu_geweke(p, rng);
      st.nu = r.nu;
      rej = r.n_rejected;
    }
    out.nu_rejects.push_back(rej);
    out.total_nu_rejects += rej;
    if (is_saved_iteration(it, cfg.burnin, cfg.thin)) {
      row.assign(st.beta.begin(), st.beta.end());
      row.insert(row.end(), {st.sigma2, st.nu});
      out.chain.push(it, row);
    }
  }
  return out;
}

struct TregTruth {
  double phi1 = 0.746;
  double phi2 = 274.7;
  double nu = 2.0;
  double sigma = 1.25;
};

inline double blood_flow_mean(double r, double phi1, double phi2) {
  if (r <= 0.0) return 0.0;
  return r * (1.0 - phi1 * std::exp(-phi2 / r));
}

/// Cubic B-spline basis at r: boundary knots at min/max of the reference
/// points, internal knots at their empirical quantiles. d = n_internal + 4
/// columns, which together reproduce constants.
class CubicBasis {
 public:
  CubicBasis(const Vector& r_ref, int n_internal) {
    if (n_internal < 0) throw DomainError("cubic_basis: n_internal_knots must be >= 0");
    if (r_ref.empty()) throw DomainError("cubic_basis: no points");
    const auto [mn, mx] = std::minmax_element(r_ref.begin(), r_ref.end());
    lo_ = *mn;
    hi_ = *mx;
    if (!(lo_ < hi_)) throw DomainError("cubic_basis: all points are equal");
    knots_.assign(4, lo_);
    for (int j = 1; j <= n_internal; ++j) {
      knots_.push_back(quantile(r_ref, static_cast<double>(j) / (n_internal + 1)));
    }
    knots_.insert(knots_.end(), 4, hi_);
    for (std::size_t j = 1; j < knots_.size(); ++j) {
      if (knots_[j] < knots_[j - 1]) throw NumericError("cubic_basis: knots out of order");
    }
  }

  std::size_t dim() const noexcept { return knots_.size() - 4; }
  const Vector& knots() const noexcept { return knots_; }

  /// Basis values at x, clamped to the boundary knots.
  Vector eval(double x) const {
    x = std::clamp(x, lo_, hi_);
    const std::size_t m = knots_.size();
    // Degree-0 indicators; the last nonempty span is closed on the right.
    std::size_t span = 3;
    for (std::size_t j = 3; j + 4 < m; ++j) {
      if (knots_[j] < knots_[j + 1] && x >= knots_[j]) span = j;
    }
    Vector b(m - 1, 0.0);
    b[span] = 1.0;
    for (int deg = 1; deg <= 3; ++deg) {
      Vector nb(m - 1 - deg, 0.0);
      for (std::size_t j = 0; j < nb.size(); ++j) {
        double v = 0.0;
        const double d1 = knots_[j + deg] - knots_[j];
        const double d2 = knots_[j + deg + 1] - knots_[j + 1];
        if (d1 > 0.0) v += (x - knots_[j]) / d1 * b[j];
        if (d2 > 0.0) v += (knots_[j + deg + 1] - x) / d2 * b[j + 1];
        nb[j] = v;
      }
      b = std::move(nb);
    }
    return b;
  }

  Matrix design(const Vector& r) const {
    Matrix X(r.size(), dim());
    for (std::size_t i = 0; i < r.size(); ++i) {
      const Vector b = eval(r[i]);
      for (std::size_t j = 0; j < b.size(); ++j) X(i, j) = b[j];
    }
    return X;
  }

 private:
  Vector knots_;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

inline Matrix cubic_basis(const Vector& r, int n_internal_knots) {
  return CubicBasis(r, n_internal_knots).design(r);
}

struct TregSynthetic {
  TregData data;
  Vector r;
  Vector mu;  // true mean at each r
};

/// r_i ~ Uniform(0, 10), y_i = mu(r_i) + sigma t_nu, X = cubic basis of r.
inline TregSynthetic treg_synthetic(int n, const TregTruth& truth, Rng& rng, int n_internal_knots = 0) {
  if (n < 1) throw DomainError("treg_synthetic: requires n >= 1");
  if (!(truth.nu > 0.0) || !(truth.sigma > 0.0)) throw DomainError("treg_synthetic: nu, sigma must be positive");
  TregSynthetic out;
  const auto nn = static_cast<std::size_t>(n);
  out.r.resize(nn);
  out.mu.resize(nn);
  out.data.y.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    out.r[i] = draw_uniform(rng, 0.0, 10.0);
    out.mu[i] = blood_flow_mean(out.r[i], truth.phi1, truth.phi2);
    const double z = draw_standard_normal(rng);
    const double chi = 2.0 * draw_gamma(rng, 0.5 * truth.nu, 1.0);  // chi^2_nu
    out.data.y[i] = out.mu[i] + truth.sigma * z / std::sqrt(chi / truth.nu);
  }
  out.data.X = cubic_basis(out.r, n_internal_knots);
  return out;
}

}  // namespace stepdirect
