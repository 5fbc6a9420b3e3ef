#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stepdirect/errors.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/rng.hpp"
#include "stepdirect/step_approx.hpp"
#include "stepdirect/target.hpp"

namespace stepdirect {

enum class KnotMethod { select, equal };

struct SamplerConfig {
  int n_knots = 10;
  Midpoint midpoint = Midpoint::geometric;
  double omega = 0.5;
  KnotMethod method = KnotMethod::select;
  bool adapt = false;
  std::int64_t max_rejects = 1000000;
  std::size_t max_table_knots = 4096;
};

struct SamplerDiagnostics {
  double log_u_lo = 0.0;
  double log_u_hi = 0.0;
  double log_p0 = 0.0;
  double total_area = 0.0;
  double log_total_area = kNegInf;
  double log_a = 0.0;
  double bound = 0.0;
};

struct BuiltSampler {
  StepApprox step;
  SamplerDiagnostics diag;
};

template <class Value>
struct DirectDrawReport {
  Value x{};
  double log_u = 0.0;  // accepted u, as a log
  std::int64_t n_rejected = 0;
  std::int64_t knots_inserted = 0;
  std::int64_t inserts_skipped = 0;  // rejected u outside (u_0, u_N) or table full

  double u() const { return std::exp(log_u); }
};

inline SamplerDiagnostics describe(const StepApprox& step) {
  SamplerDiagnostics d;
  d.log_u_lo = step.log_u_lo();
  d.log_u_hi = step.log_u_hi();
  d.log_p0 = step.knots().log_p.front();
  d.log_total_area = step.log_total_area();
  d.total_area = std::exp(d.log_total_area);
  d.log_a = step.log_a();
  d.bound = step.rejection_bound();
  return d;
}

/// find u_L, find u_H, place knots, build the envelope.
template <WeightedTarget T>
BuiltSampler build_sampler(const T& target, const SamplerConfig& cfg) {
  if (cfg.n_knots < 1) throw DomainError("build_sampler: N must be at least 1");
  const ULoResult lo = find_log_u_lo(target);
  const double log_u_hi = find_log_u_hi(target, lo.log_u);
  KnotTable kt = cfg.method == KnotMethod::equal
                     ? equal_spaced_knots_log(target, lo.log_u, log_u_hi, cfg.n_knots)
                     : select_knots_log(target, lo.log_u, log_u_hi, cfg.n_knots, cfg.midpoint,
                                        cfg.omega);
  BuiltSampler out{StepApprox(std::move(kt)), {}};
  out.diag = describe(out.step);
  out.diag.log_p0 = lo.log_p0;
  return out;
}

inline double rejection_bound(const StepApprox& step) { return step.rejection_bound(); }

/// One exact draw from f by rejection against the step envelope.
///
/// With cfg.adapt set, each rejected u inside (u_0, u_N) becomes a new knot.
template <WeightedTarget T>
DirectDrawReport<target_value_t<T>> direct_draw(const T& target, StepApprox& step, Rng& rng,
                                                const SamplerConfig& cfg) {
  DirectDrawReport<target_value_t<T>> rep;
  for (;;) {
    const double lu = step.quantile_log(rng.uniform_open());
    const double log_v = std::log(rng.uniform_open());
    const double lp = log_prob_at_log_u(target, lu);
    const double lh = step.logpdf_unnorm_log(lu);
    if (lp != kNegInf && lh != kNegInf && log_v <= lp - lh) {
      rep.log_u = lu;
      break;
    }
    if (++rep.n_rejected > cfg.max_rejects) {
      throw SamplerStall("direct_draw: " + std::to_string(cfg.max_rejects) +
                         " consecutive rejections");
    }
    if (cfg.adapt) {
      if (step.n_knots() < cfg.max_table_knots && step.insert(lu, lp)) {
        ++rep.knots_inserted;
      } else {
        ++rep.inserts_skipped;
      }
    }
  }
  rep.x = truncated_draw_log_u(target, rep.log_u, rng);
  return rep;
}

template <class Value>
struct SampleRun {
  std::vector<Value> draws;
  std::int64_t n_rejected = 0;
  std::int64_t knots_inserted = 0;
  std::int64_t inserts_skipped = 0;
  SamplerDiagnostics diag;  // at build time
  StepApprox step;          // final envelope (differs from the initial one when adapting)
};

/// Builds a sampler for target and takes n draws from it with one shared envelope.
template <WeightedTarget T>
SampleRun<target_value_t<T>> direct_sample_many(const T& target, const SamplerConfig& cfg,
                                                std::int64_t n, Rng& rng) {
  if (n < 0) throw DomainError("direct_sample_many: n must be nonnegative");
  SampleRun<target_value_t<T>> run;
  if (n == 0) return run;
  BuiltSampler built = build_sampler(target, cfg);
  run.diag = built.diag;
  run.step = std::move(built.step);
  run.draws.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto rep = direct_draw(target, run.step, rng, cfg);
    run.draws.push_back(rep.x);
    run.n_rejected += rep.n_rejected;
    run.knots_inserted += rep.knots_inserted;
    run.inserts_skipped += rep.inserts_skipped;
  }
  return run;
}

}  // namespace stepdirect
