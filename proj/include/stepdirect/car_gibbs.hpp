#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stepdirect/csv.hpp"
#include "stepdirect/direct_sampler.hpp"
#include "stepdirect/errors.hpp"
#include "stepdirect/linalg.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/rng.hpp"
#include "stepdirect/stats.hpp"
#include "stepdirect/target.hpp"

namespace stepdirect {

/// y = X beta + S eta + eps, eps ~ N(0, sigma2 I), eta ~ N(0, tau2 (D - rho A)^{-1}).
struct CarData {
  Vector y;
  Matrix X;  // n x d
  Matrix S;  // n x k
  SymMatrix A;
  Vector D;  // row sums of A
  bool s_identity = false;

  std::size_t n() const noexcept { return y.size(); }
  std::size_t d() const noexcept { return X.cols(); }
  std::size_t k() const noexcept { return D.size(); }
};

struct CarHyper {
  double sigma_beta2 = 1000.0;
  double m_sigma = 1000.0;
  double m_tau = 1000.0;
  // Uniform(0, M) priors on sigma2 and tau2 give IG shapes n/2 - 1 and k/2 - 1.
  // false: shapes n/2 and k/2 (flat priors on log sigma2, log tau2), which leave
  // the posterior improper when eta can absorb the residual.
  bool uniform_variance_priors = true;

  double sigma2_shape(std::size_t n) const { return 0.5 * static_cast<double>(n) - offset(); }
  double tau2_shape(std::size_t k) const { return 0.5 * static_cast<double>(k) - offset(); }

 private:
  double offset() const { return uniform_variance_priors ? 1.0 : 0.0; }
};

struct CarState {
  Vector beta;
  Vector eta;
  double sigma2 = 1.0;
  double tau2 = 1.0;
  double rho = 0.5;
};

inline constexpr double kRhoMax = 1.0 - 1e-12;

/// Checks A (0/1, symmetric, zero diagonal, no isolated areas) and D = row sums.
inline void validate_adjacency(const SymMatrix& A) {
  const std::size_t k = A.dim();
  if (k == 0) throw ValidationError("adjacency: no areas");
  for (std::size_t i = 0; i < k; ++i) {
    if (A(i, i) != 0.0) {
      throw ValidationError("adjacency: nonzero diagonal at (" + std::to_string(i) + "," +
                            std::to_string(i) + ")");
    }
    double deg = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double a = A(i, j);
      if (a != 0.0 && a != 1.0) {
        throw ValidationError("adjacency: entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is not 0 or 1");
      }
      if (a != A(j, i)) {
        throw ValidationError("adjacency: asymmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
      deg += a;
    }
    if (deg == 0.0) throw ValidationError("adjacency: area " + std::to_string(i) + " has no neighbors");
  }
}

inline Vector adjacency_degrees(const SymMatrix& A) {
  Vector d(A.dim(), 0.0);
  for (std::size_t i = 0; i < A.dim(); ++i)
    for (std::size_t j = 0; j < A.dim(); ++j) d[i] += A(i, j);
  return d;
}

inline void validate_car_data(const CarData& data) {
  validate_adjacency(data.A);
  const std::size_t n = data.n();
  const std::size_t k = data.k();
  if (data.A.dim() != k) throw ValidationError("CarData: A and D sizes differ");
  if (n == 0) throw ValidationError("CarData: no observations");
  if (data.X.rows() != n || data.X.cols() == 0) throw ValidationError("CarData: X must be n x d, d >= 1");
  if (data.S.rows() != n || data.S.cols() != k) throw ValidationError("CarData: S must be n x k");
  const Vector deg = adjacency_degrees(data.A);
  for (std::size_t i = 0; i < k; ++i) {
    if (deg[i] != data.D[i]) {
      throw ValidationError("CarData: D[" + std::to_string(i) + "] is not the row sum of A");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data.y[i])) throw ValidationError("CarData: y[" + std::to_string(i) + "] not finite");
    for (std::size_t j = 0; j < data.d(); ++j) {
      if (!std::isfinite(data.X(i, j))) {
        throw ValidationError("CarData: X(" + std::to_string(i) + "," + std::to_string(j) +
                              ") not finite");
      }
    }
  }
}

/// Rook adjacency on a side x side grid; area index = row * side + col.
inline SymMatrix car_rook_lattice(int side) {
  if (side < 2) throw DomainError("car_rook_lattice: side must be at least 2");
  const auto s = static_cast<std::size_t>(side);
  SymMatrix A(s * s);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < s; ++c) {
      const std::size_t i = r * s + c;
      if (c + 1 < s) A.set(i, i + 1, 1.0);
      if (r + 1 < s) A.set(i, i + s, 1.0);
    }
  }
  return A;
}

/// Eigenvalues of D^{-1} A, descending, from the symmetric D^{-1/2} A D^{-1/2}.
inline Vector car_eigen_precompute(const SymMatrix& A, const Vector& D) {
  const std::size_t k = A.dim();
  if (D.size() != k) throw DomainError("car_eigen_precompute: size mismatch");
  SymMatrix M(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(D[i] > 0.0)) throw DomainError("car_eigen_precompute: every area needs a neighbor");
    for (std::size_t j = 0; j <= i; ++j) {
      if (A(i, j) != 0.0) M.set(i, j, A(i, j) / std::sqrt(D[i] * D[j]));
    }
  }
  Vector ev = sym_eigenvalues(M);
  // The spectrum lies in [-1, 1]; snap rounding overshoot so 1 - rho * lambda stays positive on [0, 1).
  for (double& v : ev) {
    if (std::abs(v - 1.0) < 1e-9) v = 1.0;
    if (std::abs(v + 1.0) < 1e-9) v = -1.0;
  }
  return ev;
}

/// Eigenvalues merged into (value, multiplicity) groups.
struct CarSpectrum {
  Vector values;
  Vector mult;

  static CarSpectrum compress(const Vector& eigenvalues, double tol = 1e-12) {
    Vector sorted = eigenvalues;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    CarSpectrum s;
    for (double v : sorted) {
      if (!s.values.empty() && std::abs(s.values.back() - v) <= tol) {
        s.mult.back() += 1.0;
      } else {
        s.values.push_back(v);
        s.mult.push_back(1.0);
      }
    }
    return s;
  }

  // sum_i log(1 - rho lambda_i)
  double log_det_term(double rho) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double t = rho * values[i];
      if (t >= 1.0) return kNegInf;
      s += mult[i] * std::log1p(-t);
    }
    return s;
  }
};

/// f(rho | rest) on [0, 1] with Uniform(0, 1) base and
/// log w(rho) = 1/2 sum log(1 - rho lambda_i) + rho q / (2 tau2), q = eta' A eta.
class RhoTarget {
 public:
  using base_type = UniformBase;

  RhoTarget(const CarSpectrum& spectrum, double eta_a_eta, double tau2)
      : spec_(&spectrum), slope_(eta_a_eta / (2.0 * tau2)) {
    if (!(tau2 > 0.0)) throw DomainError("RhoTarget: requires tau2 > 0");
    if (!std::isfinite(slope_)) throw DomainError("RhoTarget: eta' A eta / tau2 not finite");
    const double d0 = dlog_weight(0.0);
    if (d0 <= 0.0) {
      mode_ = 0.0;
    } else {
      auto f = [this](double r) { return dlog_weight(r); };
      auto df = [this](double r) { return d2log_weight(r); };
      mode_ = safeguarded_root(f, df, 0.0, 1.0, true, 0.5);
      mode_ = std::min(mode_, kRhoMax);
    }
    log_c_ = log_weight(mode_);
  }

  const UniformBase& base() const noexcept { return base_; }
  double slope() const noexcept { return slope_; }

  double log_weight(double rho) const {
    if (rho < 0.0 || rho > 1.0) return kNegInf;
    return 0.5 * spec_->log_det_term(rho) + rho * slope_;
  }

  double dlog_weight(double rho) const {
    double s = 0.0;
    for (std::size_t i = 0; i < spec_->values.size(); ++i) {
      const double l = spec_->values[i];
      const double t = 1.0 - rho * l;
      if (t <= 0.0) return kNegInf;
      s += spec_->mult[i] * l / t;
    }
    return -0.5 * s + slope_;
  }

  double d2log_weight(double rho) const {
    double s = 0.0;
    for (std::size_t i = 0; i < spec_->values.size(); ++i) {
      const double l = spec_->values[i];
      const double t = 1.0 - rho * l;
      if (t <= 0.0) return kNegInf;
      s += spec_->mult[i] * (l / t) * (l / t);
    }
    return -0.5 * s;
  }

  double log_c() const noexcept { return log_c_; }
  double mode() const noexcept { return mode_; }

  Interval interval(double threshold) const {
    auto lw = [this](double r) { return log_weight(r); };
    auto dlw = [this](double r) { return dlog_weight(r); };
    return continuous_interval(lw, dlw, mode_, 0.0, 1.0, threshold);
  }

 private:
  const CarSpectrum* spec_;
  double slope_;
  UniformBase base_{0.0, 1.0};
  double mode_ = 0.0;
  double log_c_ = 0.0;
};

inline RhoTarget rho_target(const CarSpectrum& spectrum, double eta_a_eta, double tau2) {
  return RhoTarget(spectrum, eta_a_eta, tau2);
}

namespace detail {

inline Vector car_resid_without_eta(const CarData& data, const CarState& st) {
  Vector r = data.y;
  const Vector xb = matvec(data.X, st.beta);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= xb[i];
  return r;
}

inline Vector car_s_eta(const CarData& data, const Vector& eta) {
  return data.s_identity ? eta : matvec(data.S, eta);
}

inline double eta_a_eta(const SymMatrix& A, const Vector& eta) { return quad_form(A, eta); }

}  // namespace detail

// Cached per-run quantities.
struct CarPrecomp {
  SymMatrix xtx;
  SymMatrix sts;
  CarSpectrum spectrum;
  Vector eigenvalues;

  static CarPrecomp make(const CarData& data) {
    CarPrecomp p;
    p.xtx = crossprod(data.X);
    p.sts = crossprod(data.S);
    p.eigenvalues = car_eigen_precompute(data.A, data.D);
    p.spectrum = CarSpectrum::compress(p.eigenvalues);
    return p;
  }
};

/// beta ~ N(theta, Omega^{-1}), Omega = X'X / sigma2 + I / sigma_beta2,
/// theta = Omega^{-1} X'(y - S eta) / sigma2.
inline Vector draw_beta_car(const CarState& st, const CarData& data, const CarPrecomp& pc,
                            const CarHyper& hyper, Rng& rng) {
  const std::size_t d = data.d();
  SymMatrix omega(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) omega.set(i, j, pc.xtx(i, j) / st.sigma2);
  for (std::size_t i = 0; i < d; ++i) omega.add(i, i, 1.0 / hyper.sigma_beta2);
  Vector r = data.y;
  const Vector se = detail::car_s_eta(data, st.eta);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (r[i] - se[i]) / st.sigma2;
  return draw_mvn_precision(rng, omega, tmatvec(data.X, r));
}

/// eta ~ N(theta, Omega^{-1}), Omega = S'S / sigma2 + (D - rho A) / tau2,
/// theta = Omega^{-1} S'(y - X beta) / sigma2.
inline Vector draw_eta(const CarState& st, const CarData& data, const CarPrecomp& pc, Rng& rng) {
  const std::size_t k = data.k();
  SymMatrix omega(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double prior = (i == j ? data.D[i] : 0.0) - st.rho * data.A(i, j);
      omega.set(i, j, pc.sts(i, j) / st.sigma2 + prior / st.tau2);
    }
  }
  Vector r = detail::car_resid_without_eta(data, st);
  for (double& v : r) v /= st.sigma2;
  const Vector lin = data.s_identity ? r : tmatvec(data.S, r);
  return draw_mvn_precision(rng, omega, lin);
}

/// sigma2 ~ IG(a_sigma, ||y - X beta - S eta||^2 / 2) restricted to (0, M_sigma].
inline double draw_sigma2_car(const CarState& st, const CarData& data, const CarHyper& hyper,
                              Rng& rng) {
  Vector r = detail::car_resid_without_eta(data, st);
  const Vector se = detail::car_s_eta(data, st.eta);
  double ss = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) ss += (r[i] - se[i]) * (r[i] - se[i]);
  return draw_inverse_gamma_trunc(rng, hyper.sigma2_shape(data.n()), 0.5 * ss, hyper.m_sigma);
}

/// tau2 ~ IG(a_tau, eta'(D - rho A) eta / 2) restricted to (0, M_tau].
inline double draw_tau2(const CarState& st, const CarData& data, const CarHyper& hyper, Rng& rng,
                        double eta_a_eta) {
  double q = -st.rho * eta_a_eta;
  for (std::size_t i = 0; i < data.k(); ++i) q += data.D[i] * st.eta[i] * st.eta[i];
  return draw_inverse_gamma_trunc(rng, hyper.tau2_shape(data.k()), 0.5 * q, hyper.m_tau);
}

inline double draw_tau2(const CarState& st, const CarData& data, const CarHyper& hyper, Rng& rng) {
  return draw_tau2(st, data, hyper, rng, detail::eta_a_eta(data.A, st.eta));
}

struct RhoDirectResult {
  double rho = 0.0;
  DirectDrawReport<double> report;
};

/// Exact draw of rho from its full conditional with a freshly built envelope.
inline RhoDirectResult draw_rho_direct(const CarSpectrum& spectrum, double eta_a_eta, double tau2,
                                       Rng& rng, const SamplerConfig& cfg) {
  const RhoTarget target(spectrum, eta_a_eta, tau2);
  BuiltSampler built = build_sampler(target, cfg);
  RhoDirectResult out;
  out.report = direct_draw(target, built.step, rng, cfg);
  out.rho = std::min(out.report.x, kRhoMax);
  return out;
}

struct RhoMhResult {
  double rho = 0.0;
  bool accepted = false;
  double log_ratio = 0.0;
};

/// One Metropolis-Hastings step with a N(rho, sigma_prop^2) proposal truncated
/// to [0, 1]. The ratio is f(rho*) / f(rho) with no proposal correction.
inline RhoMhResult draw_rho_mh(double rho, const CarSpectrum& spectrum, double eta_a_eta,
                               double tau2, double sigma_prop, Rng& rng) {
  if (!(sigma_prop > 0.0)) throw DomainError("draw_rho_mh: requires sigma_prop > 0");
  const RhoTarget target(spectrum, eta_a_eta, tau2);
  const double cand = draw_truncated_normal(rng, rho, sigma_prop, 0.0, 1.0);
  RhoMhResult out;
  out.log_ratio = target.log_weight(cand) - target.log_weight(rho);
  const double log_v = std::log(rng.uniform_open());
  if (cand <= kRhoMax && log_v <= out.log_ratio) {
    out.rho = cand;
    out.accepted = true;
  } else {
    out.rho = rho;
  }
  return out;
}

enum class RhoMethod { direct, mh };

inline std::string to_string(RhoMethod m) { return m == RhoMethod::direct ? "direct" : "mh"; }

struct CarRunConfig {
  int iters = 20000;
  int burnin = 5000;
  int thin = 1;
  RhoMethod method = RhoMethod::direct;
  SamplerConfig sampler{30, Midpoint::geometric, 0.5, KnotMethod::select, true};
  double sigma_prop = 0.05;
};

struct CarRunResult {
  ChainOutput chain;
  std::vector<std::int64_t> rho_rejects;  // per iteration, burn-in included
  std::int64_t total_rho_rejects = 0;
  std::int64_t mh_accepted = 0;
};

inline std::vector<std::string> car_column_names(std::size_t d, std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("beta_" + std::to_string(j));
  for (std::size_t j = 0; j < k; ++j) names.push_back("eta_" + std::to_string(j));
  names.insert(names.end(), {"sigma2", "tau2", "rho"});
  return names;
}

inline CarState car_default_state(const CarData& data) {
  CarState st;
  st.beta.assign(data.d(), 0.0);
  st.eta.assign(data.k(), 0.0);
  return st;
}

/// Gibbs sampler scanning beta, eta, sigma2, tau2, rho.
inline CarRunResult car_gibbs_run(const CarData& data, const CarHyper& hyper,
                                  const CarRunConfig& cfg, Rng& rng,
                                  std::optional<CarState> init = std::nullopt) {
  if (cfg.iters < 0 || cfg.burnin < 0 || cfg.thin < 1) {
    throw DomainError("car_gibbs_run: need iters >= 0, burnin >= 0, thin >= 1");
  }
  if (!(hyper.sigma_beta2 > 0.0) || !(hyper.m_sigma > 0.0) || !(hyper.m_tau > 0.0)) {
    throw DomainError("car_gibbs_run: hyperparameters must be positive");
  }
  validate_car_data(data);
  if (!(hyper.sigma2_shape(data.n()) > 0.0) || !(hyper.tau2_shape(data.k()) > 0.0)) {
    throw DomainError("car_gibbs_run: uniform variance priors need n > 2 and k > 2");
  }
  CarRunResult out;
  out.chain = ChainOutput(car_column_names(data.d(), data.k()), cfg.burnin, cfg.thin);
  if (cfg.iters == 0) return out;

  const CarPrecomp pc = CarPrecomp::make(data);
  CarState st = init.value_or(car_default_state(data));
  if (st.beta.size() != data.d() || st.eta.size() != data.k()) {
    throw DomainError("car_gibbs_run: initial state has wrong dimensions");
  }
  st.rho = std::clamp(st.rho, 0.0, kRhoMax);
  out.rho_rejects.reserve(static_cast<std::size_t>(cfg.iters));
  std::vector<double> row;
  for (int it = 1; it <= cfg.iters; ++it) {
    st.beta = draw_beta_car(st, data, pc, hyper, rng);
    st.eta = draw_eta(st, data, pc, rng);
    st.sigma2 = draw_sigma2_car(st, data, hyper, rng);
    const double q = detail::eta_a_eta(data.A, st.eta);
    st.tau2 = draw_tau2(st, data, hyper, rng, q);
    std::int64_t rej = 0;
    if (cfg.method == RhoMethod::direct) {
      const RhoDirectResult r = draw_rho_direct(pc.spectrum, q, st.tau2, rng, cfg.sampler);
      st.rho = r.rho;
      rej = r.report.n_rejected;
    } else {
      const RhoMhResult r = draw_rho_mh(st.rho, pc.spectrum, q, st.tau2, cfg.sigma_prop, rng);
      st.rho = r.rho;
      rej = r.accepted ? 0 : 1;
      out.mh_accepted += r.accepted ? 1 : 0;
    }
    out.rho_rejects.push_back(rej);
    out.total_rho_rejects += rej;
    if (is_saved_iteration(it, cfg.burnin, cfg.thin)) {
      row.clear();
      row.insert(row.end(), st.beta.begin(), st.beta.end());
      row.insert(row.end(), st.eta.begin(), st.eta.end());
      row.insert(row.end(), {st.sigma2, st.tau2, st.rho});
      out.chain.push(it, row);
    }
  }
  return out;
}

struct CarTruth {
  Vector beta{1.0, 0.5};
  double rho = 0.9;
  double tau2 = 0.25;
  double sigma2 = 0.05;
};

struct CarSynthetic {
  CarData data;
  Vector eta;  // the generated random effects
};

/// Lattice data from the model: X = [1, N(0,1) columns], S = I.
inline CarSynthetic car_synthetic(int side, const CarTruth& truth, Rng& rng) {
  if (truth.beta.empty()) throw DomainError("car_synthetic: beta must be nonempty");
  if (!(truth.rho >= 0.0 && truth.rho < 1.0)) throw DomainError("car_synthetic: rho must be in [0, 1)");
  if (!(truth.tau2 > 0.0) || !(truth.sigma2 > 0.0)) {
    throw DomainError("car_synthetic: variances must be positive");
  }
  CarSynthetic out;
  CarData& d = out.data;
  d.A = car_rook_lattice(side);
  d.D = adjacency_degrees(d.A);
  const std::size_t k = d.A.dim();
  const std::size_t p = truth.beta.size();
  d.S = Matrix::identity(k);
  d.s_identity = true;
  d.X = Matrix(k, p);
  for (std::size_t i = 0; i < k; ++i) {
    d.X(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) d.X(i, j) = draw_standard_normal(rng);
  }
  SymMatrix prec(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      prec.set(i, j, ((i == j ? d.D[i] : 0.0) - truth.rho * d.A(i, j)) / truth.tau2);
    }
  }
  out.eta = draw_mvn_precision(rng, prec, Vector(k, 0.0));
  const Vector xb = matvec(d.X, truth.beta);
  const double sd = std::sqrt(truth.sigma2);
  d.y.resize(k);
  for (std::size_t i = 0; i < k; ++i) d.y[i] = xb[i] + out.eta[i] + sd * draw_standard_normal(rng);
  return out;
}

/// Reads y (one column), X (d columns) and an (i, j) edge list, 0-indexed;
/// S = I so observation i belongs to area i.
inline CarData car_load_csv(const std::string& y_path, const std::string& x_path,
                            const std::string& adjacency_path) {
  const auto yrows = numeric_rows(read_csv(y_path), y_path);
  const auto xrows = numeric_rows(read_csv(x_path), x_path);
  const CsvTable adj = read_csv(adjacency_path);
  if (!yrows.empty() && yrows.front().size() != 1) throw ValidationError(y_path + ": expected one column");
  if (yrows.size() != xrows.size()) throw ValidationError("y and X have different row counts");
  if (adj.header.size() != 2) throw ValidationError(adjacency_path + ": expected columns i,j");
  CarData d;
  const std::size_t n = yrows.size();
  if (n == 0) throw ValidationError(y_path + ": no rows");
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.y[i] = yrows[i][0];
  d.X = Matrix(n, xrows.front().size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < xrows[i].size(); ++j) d.X(i, j) = xrows[i][j];
  d.A = SymMatrix(n);
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  for (std::size_t r = 0; r < adj.rows.size(); ++r) {
    const std::string where = adjacency_path + ": row " + std::to_string(r + 1);
    std::int64_t i = 0;
    std::int64_t j = 0;
    try {
      i = parse_int(adj.rows[r][0]);
      j = parse_int(adj.rows[r][1]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    const auto nn = static_cast<std::int64_t>(n);
    if (i < 0 || j < 0 || i >= nn || j >= nn) throw ValidationError(where + ": index out of range");
    if (i == j) throw ValidationError(where + ": self-loop at " + std::to_string(i));
    edges.emplace_back(i, j);
  }
  // An edge list may list each pair once or in both directions; anything else is asymmetric.
  std::vector<std::vector<int>> seen(n, std::vector<int>(n, 0));
  for (const auto& [i, j] : edges) seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += 1;
  bool any_twoway = false;
  bool any_oneway = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int a = seen[i][j];
      const int b = seen[j][i];
      if (a > 1 || b > 1) {
        throw ValidationError(adjacency_path + ": duplicate edge (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
      if (a && b) any_twoway = true;
      if (a != b) any_oneway = true;
      if (a || b) d.A.set(i, j, 1.0);
    }
  }
  if (any_twoway && any_oneway) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (seen[i][j] != seen[j][i]) {
          throw ValidationError(adjacency_path + ": asymmetric adjacency at (" + std::to_string(i) +
                                "," + std::to_string(j) + ")");
        }
  }
  d.D = adjacency_degrees(d.A);
  d.S = Matrix::identity(n);
  d.s_identity = true;
  validate_car_data(d);
  return d;
}

/// Writes y.csv, X.csv and adjacency.csv (each edge once, i < j) under dir.
inline void car_write_csv(const CarData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  CsvWriter y({"y"});
  for (double v : data.y) y.row({format_double(v)});
  std::vector<std::string> xh;
  for (std::size_t j = 0; j < data.d(); ++j) xh.push_back("x" + std::to_string(j));
  CsvWriter x(xh);
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::vector<std::string> r;
    for (std::size_t j = 0; j < data.d(); ++j) r.push_back(format_double(data.X(i, j)));
    x.row(r);
  }
  CsvWriter a({"i", "j"});
  for (std::size_t i = 0; i < data.k(); ++i)
    for (std::size_t j = i + 1; j < data.k(); ++j)
      if (data.A(i, j) != 0.0) a.row({std::to_string(i), std::to_string(j)});
  y.save((fs::path(dir) / "y.csv").string());
  x.save((fs::path(dir) / "X.csv").string());
  a.save((fs::path(dir) / "adjacency.csv").string());
}

}  // namespace stepdirect
