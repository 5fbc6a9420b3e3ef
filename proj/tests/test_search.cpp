#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "stepdirect/rng.hpp"
#include "stepdirect/search.hpp"

using namespace stepdirect;

TEST(Bisect, ArithmeticThreshold) {
  auto zeta = [](double x) { return x >= 0.5; };
  const auto r = bisect(BisectionSpec<double, decltype(zeta), decltype(&arithmetic_midpoint),
                                      decltype(&abs_distance)>{0.0, 1.0, zeta,
                                                               &arithmetic_midpoint,
                                                               &abs_distance, 1e-9});
  EXPECT_NEAR(r.point, 0.5, 1e-9);
  EXPECT_FALSE(zeta(r.lo));
  EXPECT_TRUE(zeta(r.hi));
}

TEST(Bisect, GeometricFindsTinyThreshold) {
  auto zeta = [](double x) { return x >= 1e-50; };
  const auto r = bisect(BisectionSpec<double, decltype(zeta), decltype(&geometric_midpoint),
                                      decltype(&log_distance)>{1e-100, 1.0, zeta,
                                                               &geometric_midpoint,
                                                               &log_distance, 1e-6});
  EXPECT_NEAR(std::log(r.point), std::log(1e-50), 1e-6);
}

TEST(Bisect, BracketViolation) {
  auto zeta = [](double x) { return x >= 0.5; };
  using Spec = BisectionSpec<double, decltype(zeta), decltype(&arithmetic_midpoint),
                             decltype(&abs_distance)>;
  EXPECT_THROW(bisect(Spec{0.6, 1.0, zeta, &arithmetic_midpoint, &abs_distance, 1e-9}),
               BracketError);
  EXPECT_THROW(bisect(Spec{0.0, 0.4, zeta, &arithmetic_midpoint, &abs_distance, 1e-9}),
               BracketError);
}

TEST(Bisect, IterationCap) {
  // A midpoint that never moves the upper end cannot converge.
  auto zeta = [](double x) { return x >= 0.5; };
  auto stuck = [](double x, double) { return x; };
  using Spec = BisectionSpec<double, decltype(zeta), decltype(stuck), decltype(&abs_distance)>;
  EXPECT_THROW(bisect(Spec{0.0, 1.0, zeta, stuck, &abs_distance, 1e-9, 100}), NonConvergence);
}

TEST(Bisect, LeastIndexMatchesLinearScan) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> h(1 + static_cast<std::size_t>(rng() % 50));
    double acc = 0.0;
    for (double& v : h) v = (acc += rng.uniform());
    for (double& v : h) v /= acc;
    const double phi = rng.uniform() * h.back();
    auto zeta = [&](std::int64_t i) { return h[static_cast<std::size_t>(i)] >= phi; };
    std::int64_t oracle = 0;
    while (!zeta(oracle)) ++oracle;
    const auto n = static_cast<std::int64_t>(h.size()) - 1;
    const std::int64_t got = oracle == 0 ? 0 : least_true_index(0, n, zeta);
    EXPECT_EQ(got, oracle);
  }
}

TEST(Midpoint, Values) {
  EXPECT_NEAR(std::log(geometric_midpoint(1e-100, 1e-10)), std::log(1e-55), 1e-12);
  EXPECT_NEAR(arithmetic_midpoint(1e-100, 1e-10), 0.5e-10, 1e-24);
  EXPECT_EQ(geometric_midpoint(4.0, 4.0), 4.0);
  EXPECT_THROW(geometric_midpoint(0.0, 1.0), DomainError);
  EXPECT_EQ(floor_midpoint(3, 8), 5);
}

TEST(DecreasingRoot, Linear) {
  const double r = decreasing_root([](double x) { return 2.0 - x; }, 0.0, 10.0);
  EXPECT_NEAR(r, 2.0, 1e-12);
}
