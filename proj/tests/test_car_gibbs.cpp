#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <string>
#include <vector>

#include "stepdirect/car_gibbs.hpp"
#include "stepdirect/stats.hpp"

using namespace stepdirect;

namespace {

SymMatrix graph(std::size_t k, const std::vector<std::pair<int, int>>& edges) {
  SymMatrix a(k);
  for (auto [i, j] : edges) a.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), 1.0);
  return a;
}

CarSpectrum spectrum_of(const SymMatrix& a) {
  return CarSpectrum::compress(car_eigen_precompute(a, adjacency_degrees(a)));
}

// Bin probabilities of f(rho) ∝ w(rho) on [0, 1] by a midpoint rule.
// Bin masses of w(rho) exp(extra(rho)) on [0, 1].
std::vector<double> rho_bins(const RhoTarget& t, int bins, const std::function<double(double)>& extra = {},
                             int grid = 10000) {
  std::vector<double> p(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> lw(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    const double r = (i + 0.5) / grid;
    lw[static_cast<std::size_t>(i)] = t.log_weight(r) + (extra ? extra(r) : 0.0);
  }
  const double top = *std::max_element(lw.begin(), lw.end());
  double z = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double v = std::exp(lw[static_cast<std::size_t>(i)] - top);
    p[static_cast<std::size_t>(i * bins / grid)] += v;
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> histogram(const std::vector<double>& x, int bins) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (double v : x) h[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(v * bins)))] += 1.0;
  for (double& v : h) v /= static_cast<double>(x.size());
  return h;
}

const Vector kEta{1.0, -0.5, 0.8, 0.2};

}  // namespace

TEST(CarSpectrum, PairGraph) {
  const SymMatrix a = graph(2, {{0, 1}});
  const Vector ev = car_eigen_precompute(a, adjacency_degrees(a));
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0], 1.0);
  EXPECT_EQ(ev[1], -1.0);
}

TEST(CarSpectrum, PathDeterminantIdentity) {
  const SymMatrix a = graph(3, {{0, 1}, {1, 2}});
  const Vector d = adjacency_degrees(a);
  const CarSpectrum s = spectrum_of(a);
  for (double rho : {0.0, 0.5, 0.9}) {
    // det(D - rho A) by cofactor expansion
    const double m00 = d[0], m11 = d[1], m22 = d[2], m01 = -rho, m12 = -rho;
    const double det = m00 * (m11 * m22 - m12 * m12) - m01 * (m01 * m22);
    const double via = std::log(d[0] * d[1] * d[2]) + s.log_det_term(rho);
    EXPECT_NEAR(via, std::log(det), 1e-10 * std::abs(std::log(det)) + 1e-14) << rho;
  }
}

TEST(CarSpectrum, LargestEigenvalueIsOne) {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    // random connected graph: a spanning path plus random chords
    const std::size_t k = 5 + rng() % 10;
    SymMatrix a(k);
    for (std::size_t i = 0; i + 1 < k; ++i) a.set(i, i + 1, 1.0);
    for (int c = 0; c < 8; ++c) {
      const std::size_t i = rng() % k, j = rng() % k;
      if (i != j) a.set(i, j, 1.0);
    }
    const Vector d = adjacency_degrees(a);
    const Vector ev = car_eigen_precompute(a, d);
    EXPECT_EQ(ev.front(), 1.0);
    // power iteration on (M + I) / 2, whose top eigenvalue is (1 + 1) / 2
    Vector v(k, 1.0);
    double lam = 0.0;
    for (int it = 0; it < 5000; ++it) {
      Vector w(k, 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        w[i] = 0.5 * v[i];
        for (std::size_t j = 0; j < k; ++j) w[i] += 0.5 * a(i, j) * v[j] / std::sqrt(d[i] * d[j]);
      }
      lam = std::sqrt(dot(w, w) / dot(v, v));
      const double nrm = std::sqrt(dot(w, w));
      for (std::size_t i = 0; i < k; ++i) v[i] = w[i] / nrm;
    }
    EXPECT_NEAR(2.0 * lam - 1.0, 1.0, 1e-6);
  }
}

TEST(CarLattice, SideTwoIsFourCycle) {
  const SymMatrix a = car_rook_lattice(2);
  ASSERT_EQ(a.dim(), 4u);
  for (double d : adjacency_degrees(a)) EXPECT_EQ(d, 2.0);
  const Vector ev = car_eigen_precompute(a, adjacency_degrees(a));
  EXPECT_NEAR(ev[0], 1.0, 1e-12);
  EXPECT_NEAR(ev[1], 0.0, 1e-12);
  EXPECT_NEAR(ev[2], 0.0, 1e-12);
  EXPECT_NEAR(ev[3], -1.0, 1e-12);
  EXPECT_EQ(spectrum_of(a).values.size(), 3u);
}

TEST(CarValidation, AdjacencyErrors) {
  SymMatrix diag = graph(3, {{0, 1}, {1, 2}});
  diag.set(1, 1, 1.0);
  EXPECT_THROW(validate_adjacency(diag), ValidationError);
  SymMatrix weighted = graph(3, {{0, 1}, {1, 2}});
  weighted.set(0, 1, 0.5);
  EXPECT_THROW(validate_adjacency(weighted), ValidationError);
  const SymMatrix isolated = graph(3, {{0, 1}});
  try {
    validate_adjacency(isolated);
    FAIL() << "isolated area accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}

TEST(RhoTarget, PairGraphDerivative) {
  const SymMatrix a = graph(2, {{0, 1}});
  const CarSpectrum s = spectrum_of(a);
  const double q = 0.7, tau2 = 0.4;
  const RhoTarget t(s, q, tau2);
  for (double rho : {0.0, 0.3, 0.8}) {
    const double hand = 0.5 * (-1.0 / (1.0 - rho) + 1.0 / (1.0 + rho)) + q / (2.0 * tau2);
    EXPECT_NEAR(t.dlog_weight(rho), hand, 1e-12);
    const double lw = 0.5 * (std::log1p(-rho) + std::log1p(rho)) + rho * q / (2.0 * tau2);
    EXPECT_NEAR(t.log_weight(rho), lw, 1e-14);
  }
}

TEST(RhoTarget, ConcaveAndModeAtZeroWithoutSignal) {
  const CarSpectrum s = spectrum_of(car_rook_lattice(3));
  const RhoTarget flat(s, 0.0, 1.0);
  EXPECT_EQ(flat.mode(), 0.0);
  double prev = flat.log_weight(0.0);
  for (int i = 1; i < 100; ++i) {
    const double v = flat.log_weight(i / 100.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
  const RhoTarget peaked(s, 3.0, 0.5);
  for (int i = 0; i < 100; ++i) EXPECT_LT(peaked.d2log_weight(i / 100.0), 0.0);
  EXPECT_GT(peaked.mode(), 0.0);
  EXPECT_NEAR(peaked.dlog_weight(peaked.mode()), 0.0, 1e-8);
}

TEST(RhoDirect, CycleMatchesQuadrature) {
  const SymMatrix a = car_rook_lattice(2);
  const CarSpectrum s = spectrum_of(a);
  const double q = quad_form(a, kEta);
  const double tau2 = 0.5;
  SamplerConfig cfg;
  cfg.n_knots = 30;
  Rng rng(82);
  std::vector<double> x(100000);
  for (double& v : x) v = draw_rho_direct(s, q, tau2, rng, cfg).rho;
  EXPECT_LT(total_variation(histogram(x, 20), rho_bins(RhoTarget(s, q, tau2), 20)), 0.01);
}

TEST(RhoDirect, NoSignalConcentratesNearZero) {
  const CarSpectrum s = spectrum_of(car_rook_lattice(2));
  Rng rng(83);
  SamplerConfig cfg;
  std::vector<double> x(50000);
  for (double& v : x) v = draw_rho_direct(s, 0.0, 1.0, rng, cfg).rho;
  EXPECT_LT(total_variation(histogram(x, 20), rho_bins(RhoTarget(s, 0.0, 1.0), 20)), 0.015);
  EXPECT_LT(mean(x), 0.5);
}

TEST(RhoMh, DegenerateProposal) {
  const CarSpectrum s = spectrum_of(car_rook_lattice(2));
  Rng rng(84);
  const RhoMhResult r = draw_rho_mh(0.4, s, 1.0, 0.5, 1e-10, rng);
  EXPECT_NEAR(r.log_ratio, 0.0, 1e-6);
  EXPECT_THROW(draw_rho_mh(0.4, s, 1.0, 0.5, 0.0, rng), DomainError);
}

TEST(RhoMh, LongRunStationaryLaw) {
  // Without the proposal correction the chain leaves f(rho) Z(rho) invariant,
  // Z(rho) = P(0 < rho + sigma e < 1): detailed balance gives phi min(f, f') on both sides.
  const SymMatrix a = car_rook_lattice(2);
  const CarSpectrum s = spectrum_of(a);
  const double q = quad_form(a, kEta);
  const double sp = 0.3;
  Rng rng(85);
  std::vector<double> x(1000000);
  double rho = 0.5;
  for (double& v : x) v = rho = draw_rho_mh(rho, s, q, 0.5, sp, rng).rho;
  auto log_z = [sp](double r) {
    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    return std::log(cdf((1.0 - r) / sp) - cdf(-r / sp));
  };
  const RhoTarget t(s, q, 0.5);
  EXPECT_LT(total_variation(histogram(x, 20), rho_bins(t, 20, log_z)), 0.015);
  EXPECT_GT(total_variation(histogram(x, 20), rho_bins(t, 20)), 0.03);
}

TEST(CarConditionals, BetaMatchesGls) {
  Rng rng(86);
  CarSynthetic syn = car_synthetic(4, CarTruth{}, rng);
  const CarData& d = syn.data;
  CarHyper hyper;
  hyper.sigma_beta2 = 1e12;
  const CarPrecomp pc = CarPrecomp::make(d);
  CarState st = car_default_state(d);
  st.eta = syn.eta;
  st.sigma2 = 0.05;
  // closed form: (X'X)^{-1} X'(y - eta)
  Vector r = d.y;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= syn.eta[i];
  const Vector ols = Cholesky(crossprod(d.X)).solve(tmatvec(d.X, r));
  std::vector<double> b0, b1;
  for (int i = 0; i < 20000; ++i) {
    const Vector b = draw_beta_car(st, d, pc, hyper, rng);
    b0.push_back(b[0]);
    b1.push_back(b[1]);
  }
  const double se0 = std::sqrt(variance(b0) / 20000.0);
  const double se1 = std::sqrt(variance(b1) / 20000.0);
  EXPECT_NEAR(mean(b0), ols[0], 4.0 * se0);
  EXPECT_NEAR(mean(b1), ols[1], 4.0 * se1);
}

TEST(CarConditionals, TauSquaredShape) {
  Rng rng(87);
  const SymMatrix a = car_rook_lattice(3);
  CarData d;
  d.A = a;
  d.D = adjacency_degrees(a);
  CarState st;
  st.eta = Vector{0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, 0.6, -0.1};
  st.rho = 0.4;
  double q = -st.rho * quad_form(a, st.eta);
  for (std::size_t i = 0; i < 9; ++i) q += d.D[i] * st.eta[i] * st.eta[i];
  std::vector<double> x(100000);
  CarHyper hyper;
  for (double& v : x) v = draw_tau2(st, d, hyper, rng);
  // Uniform prior: IG(k/2 - 1, q/2) has mean q / (k - 4)
  EXPECT_NEAR(mean(x), q / 5.0, 0.03 * q / 5.0);
  hyper.uniform_variance_priors = false;
  for (double& v : x) v = draw_tau2(st, d, hyper, rng);
  // IG(k/2, q/2) has mean q / (k - 2)
  EXPECT_NEAR(mean(x), q / 7.0, 0.03 * q / 7.0);
}

TEST(CarConditionals, VarianceShapes) {
  CarHyper h;
  EXPECT_EQ(h.tau2_shape(36), 17.0);
  EXPECT_EQ(h.sigma2_shape(36), 17.0);
  h.uniform_variance_priors = false;
  EXPECT_EQ(h.tau2_shape(1), 0.5);
  EXPECT_EQ(h.sigma2_shape(36), 18.0);
  // a 2-area graph has no proper tau2 conditional under the uniform prior
  CarData d;
  d.A = SymMatrix(2);
  d.A.set(1, 0, 1.0);
  d.D = adjacency_degrees(d.A);
  d.X = Matrix(2, 1, 1.0);
  d.y = Vector{0.1, 0.2};
  d.S = Matrix::identity(2);
  d.s_identity = true;
  Rng rng(89);
  CarRunConfig cfg;
  cfg.iters = 5;
  cfg.burnin = 0;
  try {
    car_gibbs_run(d, CarHyper{}, cfg, rng);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("k > 2"), std::string::npos) << e.what();
  }
  CarHyper log_flat;
  log_flat.uniform_variance_priors = false;
  EXPECT_EQ(car_gibbs_run(d, log_flat, cfg, rng).chain.size(), 5u);
}

TEST(CarGibbs, ZeroIterations) {
  Rng rng(88);
  const CarSynthetic syn = car_synthetic(3, CarTruth{}, rng);
  CarRunConfig cfg;
  cfg.iters = 0;
  cfg.burnin = 0;
  const CarRunResult r = car_gibbs_run(syn.data, CarHyper{}, cfg, rng);
  EXPECT_EQ(r.chain.size(), 0u);
  EXPECT_EQ(r.total_rho_rejects, 0);
}

TEST(CarGibbs, ShortRunDeterministicAndShaped) {
  CarRunConfig cfg;
  cfg.iters = 300;
  cfg.burnin = 100;
  cfg.thin = 2;
  auto run = [&](RhoMethod m) {
    Rng data_rng(89, 100);
    const CarSynthetic syn = car_synthetic(4, CarTruth{}, data_rng);
    Rng rng(89);
    CarRunConfig c = cfg;
    c.method = m;
    return car_gibbs_run(syn.data, CarHyper{}, c, rng);
  };
  const CarRunResult a = run(RhoMethod::direct);
  const CarRunResult b = run(RhoMethod::direct);
  EXPECT_EQ(a.chain.size(), 100u);
  EXPECT_EQ(a.chain.column("rho"), b.chain.column("rho"));
  EXPECT_EQ(a.rho_rejects.size(), 300u);
  for (double r : a.chain.column("rho")) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, kRhoMax);
  }
  const CarRunResult m = run(RhoMethod::mh);
  EXPECT_GT(m.mh_accepted, 0);
  EXPECT_EQ(m.chain.names().size(), 2u + 16u + 3u);
}

TEST(CarCsv, RoundTrip) {
  Rng rng(90);
  const CarSynthetic syn = car_synthetic(3, CarTruth{}, rng);
  const auto dir = std::filesystem::temp_directory_path() / "stepdirect_car_roundtrip";
  std::filesystem::create_directories(dir);
  car_write_csv(syn.data, dir.string());
  const CarData back = car_load_csv((dir / "y.csv").string(), (dir / "X.csv").string(),
                                    (dir / "adjacency.csv").string());
  EXPECT_EQ(back.y, syn.data.y);
  EXPECT_EQ(back.X, syn.data.X);
  EXPECT_EQ(back.A, syn.data.A);
  EXPECT_EQ(back.D, syn.data.D);
  std::filesystem::remove_all(dir);
}

TEST(CarCsv, MalformedInputs) {
  const auto dir = std::filesystem::temp_directory_path() / "stepdirect_car_bad";
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream((dir / name).string()) << body;
    return (dir / name).string();
  };
  const std::string y = write("y.csv", "y\n1\n2\n3\n");
  const std::string x = write("X.csv", "x0\n1\n1\n1\n");
  const std::string good = write("good.csv", "i,j\n0,1\n1,2\n");
  EXPECT_NO_THROW(car_load_csv(y, x, good));
  const std::string both = write("both.csv", "i,j\n0,1\n1,0\n1,2\n2,1\n");
  EXPECT_NO_THROW(car_load_csv(y, x, both));
  const std::string asym = write("asym.csv", "i,j\n0,1\n1,0\n1,2\n");
  EXPECT_THROW(car_load_csv(y, x, asym), ValidationError);
  EXPECT_THROW(car_load_csv(y, x, write("self.csv", "i,j\n0,0\n1,2\n")), ValidationError);
  EXPECT_THROW(car_load_csv(y, x, write("range.csv", "i,j\n0,5\n1,2\n")), ValidationError);
  EXPECT_THROW(car_load_csv(y, x, write("iso.csv", "i,j\n0,1\n")), ValidationError);
  EXPECT_THROW(car_load_csv(y, x, write("dup.csv", "i,j\n0,1\n0,1\n1,2\n")), ValidationError);
  EXPECT_THROW(car_load_csv(y, x, write("nan.csv", "i,j\n0,a\n1,2\n")), ValidationError);
  EXPECT_THROW(car_load_csv(y, write("xshort.csv", "x0\n1\n1\n"), good), ValidationError);
  try {
    car_load_csv(y, write("xbad.csv", "x0\n1\n1\nfoo\n"), good);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  std::filesystem::remove_all(dir);
}
