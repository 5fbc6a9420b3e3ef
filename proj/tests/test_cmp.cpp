#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stepdirect/cmp.hpp"
#include "stepdirect/direct_sampler.hpp"
#include "stepdirect/stats.hpp"

using namespace stepdirect;

namespace {

std::vector<double> normalized_target_pmf(const CmpTarget& t, std::size_t top) {
  std::vector<double> lp(top);
  for (std::size_t x = 0; x < top; ++x) lp[x] = t.log_pmf_unnorm(static_cast<std::int64_t>(x));
  const double z = log_sum_exp(lp);
  for (double& v : lp) v = std::exp(v - z);
  return lp;
}

}  // namespace

TEST(CmpWeight, HandValues) {
  const CmpParams p{2.0, 1.0};
  EXPECT_NEAR(cmp_log_weight(0.0, p, CmpDecomposition::geometric_lambda), std::log(3.0), 1e-15);
  const CmpParams q{2.0, 0.5};
  EXPECT_NEAR(cmp_log_weight(3.0, q, CmpDecomposition::geometric_lambda),
              4.0 * std::log(3.0) - 0.5 * std::log(6.0), 1e-13);
}

TEST(CmpWeight, MuFormReducesAtNuOne) {
  const CmpParams p{2.0, 1.0};
  for (double x = 0.0; x < 50.0; x += 0.5) {
    EXPECT_NEAR(cmp_log_weight(x, p, CmpDecomposition::geometric_mu),
                cmp_log_weight(x, p, CmpDecomposition::geometric_lambda), 1e-12);
  }
}

TEST(CmpTarget, PoissonAtNuOne) {
  const CmpTarget t(CmpParams{0.5, 1.0});
  const auto pmf = normalized_target_pmf(t, 40);
  double fact = 1.0;
  for (int x = 0; x < 20; ++x) {
    if (x > 0) fact *= x;
    EXPECT_NEAR(pmf[x], std::exp(-0.5) * std::pow(0.5, x) / fact, 1e-14);
  }
}

TEST(CmpTarget, GeometricLimit) {
  // The mode runs off to infinity as nu -> 0, so check w g and the series directly.
  const CmpParams p{0.5, 1e-8};
  const GeometricBase g = GeometricBase::from_log_odds(p.log_mu());
  std::vector<double> lp(400);
  for (std::size_t x = 0; x < lp.size(); ++x) {
    lp[x] = cmp_log_weight(static_cast<double>(x), p, CmpDecomposition::geometric_mu) +
            g.log_pmf(static_cast<std::int64_t>(x));
  }
  const double z = log_sum_exp(lp);
  const CmpPmf oracle = cmp_pmf_oracle(p);
  for (int x = 0; x < 20; ++x) {
    EXPECT_NEAR(std::exp(lp[x] - z), 0.5 * std::pow(0.5, x), 1e-6);
    EXPECT_NEAR(std::exp(oracle.log_pmf[x]), 0.5 * std::pow(0.5, x), 1e-6);
  }
}

TEST(CmpTarget, BernoulliLimit) {
  const CmpTarget t(CmpParams{2.0, 50.0});
  const auto pmf = normalized_target_pmf(t, 10);
  EXPECT_NEAR(pmf[0], 1.0 / 3.0, 1e-3);
  EXPECT_NEAR(pmf[1], 2.0 / 3.0, 1e-3);
}

TEST(CmpTarget, DefaultDecomposition) {
  EXPECT_EQ(CmpTarget(CmpParams{2.0, 1.0}).decomposition(), CmpDecomposition::geometric_lambda);
  EXPECT_EQ(CmpTarget(CmpParams{2.0, 0.99}).decomposition(), CmpDecomposition::geometric_mu);
  EXPECT_THROW(CmpTarget(CmpParams{-1.0, 1.0}), DomainError);
  EXPECT_THROW(CmpTarget(CmpParams{1.0, 0.0}), DomainError);
}

TEST(CmpMode, RootAndGridArgmax) {
  for (double lambda : {0.1, 2.0, 30.0}) {
    for (double nu : {0.2, 0.5, 1.0, 3.0}) {
      for (auto d : {CmpDecomposition::geometric_lambda, CmpDecomposition::geometric_mu}) {
        const CmpParams p{lambda, nu};
        if (d == CmpDecomposition::geometric_mu && lambda == 0.1 && nu == 0.2) {
          // mu = 1e-5 pushes the weight's mode past 2^53
          EXPECT_THROW(cmp_mode(p, d), NumericError);
          continue;
        }
        const CmpMode m = cmp_mode(p, d);
        auto lw = [&](double x) { return cmp_log_weight(x, p, d); };
        // derivative sign change across the root
        const double h = 1e-6 * std::max(1.0, m.x_mode);
        if (m.x_mode > h) EXPECT_GE(lw(m.x_mode), lw(m.x_mode - h));
        EXPECT_GE(lw(m.x_mode), lw(m.x_mode + h));
        // dense grid argmax
        double best = -1e300;
        const double top = 3.0 * m.x_mode + 10.0;
        for (double x = 0.0; x <= top; x += top / 20000.0) best = std::max(best, lw(x));
        EXPECT_GE(m.log_c, best - 1e-9) << lambda << " " << nu;
      }
    }
  }
}

TEST(CmpMode, DerivativePositiveAtZero) {
  constexpr double kEulerGamma = 0.57721566490153286;
  EXPECT_NEAR(boost::math::digamma(1.0), -kEulerGamma, 1e-15);
  for (double lambda : {1e-3, 0.5, 2.0}) {
    for (double nu : {0.01, 1.0, 10.0}) {
      EXPECT_GT(std::log1p(lambda) - nu * boost::math::digamma(1.0), 0.0);
    }
  }
  // mu = 1: drift log 2 at x = 0
  const CmpParams p{1.0, 0.5};
  EXPECT_NEAR(cmp_log_weight(1.0, p, CmpDecomposition::geometric_mu) -
                  cmp_log_weight(0.0, p, CmpDecomposition::geometric_mu),
              std::log(2.0), 1e-14);
}

TEST(CmpTarget, LogConcaveOnIntegers) {
  for (double nu : {0.05, 0.5, 2.0, 5.0}) {
    const CmpTarget t(CmpParams{2.0, nu});
    for (int x = 1; x < 2000; ++x) {
      const double d2 = t.log_weight(x + 1.0) - 2.0 * t.log_weight(x) + t.log_weight(x - 1.0);
      ASSERT_LT(d2, 0.0) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(CmpTarget, IntervalBracketsMode) {
  const CmpTarget t(CmpParams{2.0, 0.3});
  for (double lu : {-0.5, -3.0, -20.0}) {
    const double thr = lu + t.log_c();
    const Interval iv = t.interval(thr);
    const IntWindow w = integer_window(iv.lo, iv.hi);
    ASSERT_FALSE(w.empty());
    EXPECT_LE(iv.lo, t.mode());
    EXPECT_GE(iv.hi, t.mode());
    EXPECT_GT(t.log_weight(static_cast<double>(w.lo)), thr);
    EXPECT_GT(t.log_weight(static_cast<double>(w.hi)), thr);
    if (w.lo > 0) EXPECT_LE(t.log_weight(static_cast<double>(w.lo - 1)), thr);
    EXPECT_LE(t.log_weight(static_cast<double>(w.hi + 1)), thr);
  }
}

TEST(CmpOracle, LogZValues) {
  EXPECT_NEAR(cmp_pmf_oracle(CmpParams{2.0, 1.0}).log_z, 2.0, 1e-10);
  EXPECT_NEAR(cmp_pmf_oracle(CmpParams{2.0, 0.075}).log_z, 780.515, 0.01);
  EXPECT_NEAR(cmp_pmf_oracle(CmpParams{0.5, 0.0}).log_z, std::log(2.0), 1e-10);
  const CmpPmf p = cmp_pmf_oracle(CmpParams{2.0, 0.5});
  double s = 0.0;
  for (double v : p.pmf()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(CmpOracle, Errors) {
  EXPECT_THROW(cmp_pmf_oracle(CmpParams{2.0, 0.0}), DomainError);
  EXPECT_THROW(cmp_pmf_oracle(CmpParams{0.0, 1.0}), DomainError);
  EXPECT_THROW(cmp_pmf_oracle(CmpParams{2.0, 0.001}, 1e-12, 1000), NonConvergence);
}

TEST(CmpOracle, MismatchDemo) {
  const CmpMismatch m = cmp_mismatch_demo();
  EXPECT_NEAR(m.log_p_x_le_7306, -40.0, 0.5);
  EXPECT_NEAR(m.log_p_s_gt_7086, -2873.531, 0.5);
  EXPECT_EQ(m.mu_base_q025, 261);
  EXPECT_EQ(m.mu_base_q975, 38075);
  // Reported, not asserted exactly: the X quantiles sit near (9607, 11061).
  EXPECT_NEAR(static_cast<double>(m.x_q025), 9607.0, 50.0);
  EXPECT_NEAR(static_cast<double>(m.x_q975), 11061.0, 50.0);
}

TEST(CmpSampler, MatchesOracle) {
  Rng rng(71);
  for (double nu : {0.5, 2.0}) {
    const CmpTarget t(CmpParams{2.0, nu});
    const auto run = direct_sample_many(t, SamplerConfig{}, 100000, rng);
    const auto oracle = cmp_pmf_oracle(CmpParams{2.0, nu}).pmf();
    EXPECT_LT(total_variation(empirical_pmf<std::int64_t>(run.draws), oracle), 0.01) << nu;
  }
}

TEST(CmpSampler, DecompositionInvariance) {
  Rng rng(72);
  const CmpParams p{2.0, 0.9};
  const auto a = direct_sample_many(CmpTarget(p, CmpDecomposition::geometric_lambda),
                                    SamplerConfig{}, 100000, rng);
  const auto b = direct_sample_many(CmpTarget(p, CmpDecomposition::geometric_mu),
                                    SamplerConfig{}, 100000, rng);
  EXPECT_LT(total_variation(empirical_pmf<std::int64_t>(a.draws),
                            empirical_pmf<std::int64_t>(b.draws)),
            0.01);
}
