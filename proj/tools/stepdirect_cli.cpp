// Command-line driver: CMP sampling and step diagnostics, CAR and t-regression
// Gibbs runs, and the nu-sampler rejection comparison. Every run writes
// config.txt next to its CSV outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stepdirect/stepdirect.hpp"

namespace fs = std::filesystem;
using namespace stepdirect;

namespace {

constexpr std::uint64_t kDataStream = 100;
constexpr std::uint64_t kPredictStream = 200;

struct Common {
  std::uint64_t seed = 1;
  std::string out = "out";
  int threads = 0;
  std::string config;
  bool timing = false;
};

// Flat key=value record of a run, written sorted.
class RunRecord {
 public:
  void set(const std::string& k, const std::string& v) { kv_[k] = v; }
  void set(const std::string& k, double v) { kv_[k] = format_double(v); }
  void set(const std::string& k, std::int64_t v) { kv_[k] = std::to_string(v); }
  void set(const std::string& k, int v) { kv_[k] = std::to_string(v); }
  void set(const std::string& k, std::uint64_t v) { kv_[k] = std::to_string(v); }
  void set(const std::string& k, bool v) { kv_[k] = v ? "true" : "false"; }
  void set(const std::string& k, const char* v) { kv_[k] = v; }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    for (const auto& [k, v] : kv_) out << k << '=' << v << '\n';
  }

 private:
  std::map<std::string, std::string> kv_;
};

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(xs[i]);
    } else {
      s += std::to_string(xs[i]);
    }
  }
  return s;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--threads", c.threads, "worker threads (default: STEPDIRECT_THREADS or 1)");
  sub->add_option("--config", c.config, "key=value file; command-line flags override it");
  sub->add_flag("--timing", c.timing, "record wall-clock time (outputs then vary between runs)");
}

RunRecord base_record(const std::string& command, const Common& c) {
  RunRecord r;
  r.set("command", command);
  r.set("version", kVersion);
  r.set("seed", c.seed);
  return r;
}

fs::path prepare_out(const Common& c) {
  const fs::path p(c.out);
  fs::create_directories(p);
  return p;
}

class Stopwatch {
 public:
  explicit Stopwatch(bool on) : on_(on), t0_(std::chrono::steady_clock::now()) {}
  std::string ms() const {
    if (!on_) return "NA";
    const auto d = std::chrono::steady_clock::now() - t0_;
    return format_double(std::chrono::duration<double, std::milli>(d).count());
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point t0_;
};

void write_summary(const ChainOutput& chain, const std::vector<std::string>& names,
                   const fs::path& path) {
  CsvWriter w({"param", "mean", "sd", "q025", "q975", "mc_se"});
  for (const auto& nm : names) {
    const auto& col = chain.column(nm);
    const SummaryRow s = summarize(col);
    w.row({nm, format_double(s.mean), format_double(s.sd), format_double(s.q025),
           format_double(s.q975), format_double(batch_means_se(col))});
  }
  w.save(path.string());
}

void write_chain(const ChainOutput& chain, const fs::path& path) {
  std::vector<std::string> header{"iter"};
  header.insert(header.end(), chain.names().begin(), chain.names().end());
  CsvWriter w(header);
  std::vector<std::string> row;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    row.assign(1, std::to_string(chain.iterations()[i]));
    for (std::size_t j = 0; j < chain.names().size(); ++j) row.push_back(format_double(chain.column(j)[i]));
    w.row(row);
  }
  w.save(path.string());
}

void write_rejects(const std::vector<std::int64_t>& rejects, const std::string& col,
                   const fs::path& path) {
  CsvWriter w({"iter", col});
  for (std::size_t i = 0; i < rejects.size(); ++i) {
    w.row({std::to_string(i + 1), std::to_string(rejects[i])});
  }
  w.save(path.string());
}

std::optional<CmpDecomposition> parse_decomp(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "lambda") return CmpDecomposition::geometric_lambda;
  if (s == "mu") return CmpDecomposition::geometric_mu;
  throw DomainError("--decomp must be auto, lambda or mu");
}

// ---------------------------------------------------------------- cmp-sample

struct CmpSampleOpts {
  double lambda = 2.0;
  double nu = 0.5;
  std::int64_t n_draws = 20000;
  int n_knots = 10;
  std::string midpoint = "geometric";
  double omega = 0.5;
  std::string decomp = "auto";
  bool no_adapt = false;
};

void cmd_cmp_sample(const CmpSampleOpts& o, const Common& c) {
  const fs::path out = prepare_out(c);
  const Stopwatch sw(c.timing);
  const CmpParams p{o.lambda, o.nu};
  const CmpTarget target(p, parse_decomp(o.decomp));
  SamplerConfig cfg;
  cfg.n_knots = o.n_knots;
  cfg.midpoint = parse_midpoint(o.midpoint);
  cfg.omega = o.omega;
  cfg.adapt = !o.no_adapt;
  if (o.n_draws < 0) throw DomainError("--n-draws must be nonnegative");
  Rng rng(c.seed, 0);
  const auto run = direct_sample_many(target, cfg, o.n_draws, rng);
  const CmpPmf pmf = cmp_pmf_oracle(p);

  std::int64_t max_x = static_cast<std::int64_t>(pmf.log_pmf.size()) - 1;
  for (auto x : run.draws) max_x = std::max(max_x, x);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_x) + 1, 0);
  for (auto x : run.draws) ++counts[static_cast<std::size_t>(x)];
  const double nd = static_cast<double>(o.n_draws);
  double tv = 0.0;
  CsvWriter pw({"x", "count", "empirical", "exact"});
  for (std::size_t x = 0; x < counts.size(); ++x) {
    const double exact = x < pmf.log_pmf.size() ? std::exp(pmf.log_pmf[x]) : 0.0;
    const double emp = o.n_draws > 0 ? static_cast<double>(counts[x]) / nd : 0.0;
    tv += std::abs(emp - exact);
    if (counts[x] > 0 || exact >= 1e-10) {
      pw.row({std::to_string(x), std::to_string(counts[x]), format_double(emp), format_double(exact)});
    }
  }
  tv *= 0.5;
  pw.save((out / "pmf.csv").string());

  CsvWriter dw({"x"});
  for (auto x : run.draws) dw.row({std::to_string(x)});
  dw.save((out / "draws.csv").string());

  CsvWriter rw({"lambda", "nu", "decomposition", "n_draws", "n_knots", "midpoint", "omega", "adapt",
                "rejections", "knots_inserted", "log_z", "tv", "log_u_lo", "log_u_hi", "total_area",
                "rejection_bound", "wall_ms"});
  const bool built = o.n_draws > 0;
  rw.row({format_double(o.lambda), format_double(o.nu), std::string(to_string(target.decomposition())),
          std::to_string(o.n_draws), std::to_string(o.n_knots), std::string(to_string(cfg.midpoint)),
          format_double(o.omega), cfg.adapt ? "true" : "false", std::to_string(run.n_rejected),
          std::to_string(run.knots_inserted), format_double(pmf.log_z), format_double(tv),
          built ? format_double(run.diag.log_u_lo) : "NA", built ? format_double(run.diag.log_u_hi) : "NA",
          built ? format_double(run.diag.total_area) : "NA", built ? format_double(run.diag.bound) : "NA",
          sw.ms()});
  rw.save((out / "report.csv").string());

  RunRecord rec = base_record("cmp-sample", c);
  rec.set("lambda", o.lambda);
  rec.set("nu", o.nu);
  rec.set("n-draws", o.n_draws);
  rec.set("n-knots", o.n_knots);
  rec.set("midpoint", o.midpoint);
  rec.set("omega", o.omega);
  rec.set("decomp", o.decomp);
  rec.set("no-adapt", o.no_adapt);
  rec.save(out / "config.txt");
  std::cout << "cmp-sample: " << run.n_rejected << " rejections, tv " << format_double(tv) << '\n';
}

// ------------------------------------------------------------- cmp-step-diag

struct CmpStepOpts {
  double lambda = 2.0;
  double nu = 0.5;
  int n_knots = 13;
  std::string method = "geom";
  double omega = 0.5;
  std::string decomp = "lambda";
  int curve_points = 200;
};

void cmd_cmp_step_diag(const CmpStepOpts& o, const Common& c) {
  const fs::path out = prepare_out(c);
  const Stopwatch sw(c.timing);
  const CmpTarget target(CmpParams{o.lambda, o.nu}, parse_decomp(o.decomp));
  SamplerConfig cfg;
  cfg.n_knots = o.n_knots;
  cfg.omega = o.omega;
  if (o.method == "equal") {
    cfg.method = KnotMethod::equal;
  } else {
    cfg.method = KnotMethod::select;
    cfg.midpoint = parse_midpoint(o.method);
  }
  if (o.curve_points < 2) throw DomainError("--curve-points must be at least 2");
  const BuiltSampler b = build_sampler(target, cfg);
  const KnotTable& kt = b.step.knots();

  CsvWriter kw({"j", "u", "log_u", "log_p", "p", "rect_area"});
  for (std::size_t j = 0; j < kt.size(); ++j) {
    const double area = j == 0 ? 0.0 : std::exp(log_rect_area(kt, j));
    kw.row({std::to_string(j), format_double(std::exp(kt.log_u[j])), format_double(kt.log_u[j]),
            format_double(kt.log_p[j]), format_double(std::exp(kt.log_p[j])), format_double(area)});
  }
  kw.save((out / "knots.csv").string());

  // P(A_u) and the step envelope on a log-spaced grid over [u_L, u_H].
  CsvWriter cw({"u", "log_u", "p_au", "h_star"});
  const double a = kt.log_u.front();
  const double z = kt.log_u.back();
  for (int i = 0; i < o.curve_points; ++i) {
    const double lu = a + (z - a) * i / (o.curve_points - 1);
    const double lp = log_prob_at_log_u(target, lu);
    const double lh = b.step.logpdf_unnorm_log(lu);
    cw.row({format_double(std::exp(lu)), format_double(lu), format_double(std::exp(lp)),
            format_double(std::exp(lh))});
  }
  cw.save((out / "curve.csv").string());

  CsvWriter rw({"lambda", "nu", "decomposition", "method", "n_knots", "omega", "u_lo", "log_u_lo",
                "u_hi", "log_u_hi", "total_area", "log_total_area", "wall_ms"});
  rw.row({format_double(o.lambda), format_double(o.nu), std::string(to_string(target.decomposition())),
          o.method, std::to_string(o.n_knots), format_double(o.omega), format_double(std::exp(a)),
          format_double(a), format_double(std::exp(z)), format_double(z),
          format_double(b.diag.total_area), format_double(b.diag.log_total_area), sw.ms()});
  rw.save((out / "report.csv").string());

  RunRecord rec = base_record("cmp-step-diag", c);
  rec.set("lambda", o.lambda);
  rec.set("nu", o.nu);
  rec.set("n-knots", o.n_knots);
  rec.set("method", o.method);
  rec.set("omega", o.omega);
  rec.set("decomp", o.decomp);
  rec.set("curve-points", o.curve_points);
  rec.save(out / "config.txt");
  std::cout << "cmp-step-diag: total area " << format_double(b.diag.total_area) << '\n';
}

// ----------------------------------------------------------------------- car

struct CarOpts {
  std::string mode = "synthetic";
  std::string rho_method = "direct";
  int iters = 20000;
  int burnin = 5000;
  int thin = 1;
  int n_knots = 30;
  double sigma_prop = 0.05;
  double sigma_beta2 = 1000.0;
  double m_sigma = 1000.0;
  double m_tau = 1000.0;
  int grid_side = 6;
  double true_rho = 0.9;
  double true_tau2 = 0.25;
  double true_sigma2 = 0.05;
  std::string variance_prior = "uniform";
  std::string y_path;
  std::string x_path;
  std::string adjacency_path;
};

void cmd_car(const CarOpts& o, const Common& c) {
  const fs::path out = prepare_out(c);
  const Stopwatch sw(c.timing);
  CarData data;
  if (o.mode == "synthetic") {
    Rng drng(c.seed, kDataStream);
    CarTruth truth;
    truth.rho = o.true_rho;
    truth.tau2 = o.true_tau2;
    truth.sigma2 = o.true_sigma2;
    data = car_synthetic(o.grid_side, truth, drng).data;
    fs::create_directories(out / "data");
    car_write_csv(data, (out / "data").string());
  } else if (o.mode == "csv") {
    if (o.y_path.empty() || o.x_path.empty() || o.adjacency_path.empty()) {
      throw DomainError("--mode csv needs --y, --x and --adjacency");
    }
    data = car_load_csv(o.y_path, o.x_path, o.adjacency_path);
  } else {
    throw DomainError("--mode must be synthetic or csv");
  }
  CarRunConfig cfg;
  cfg.iters = o.iters;
  cfg.burnin = o.burnin;
  cfg.thin = o.thin;
  cfg.sampler.n_knots = o.n_knots;
  cfg.sigma_prop = o.sigma_prop;
  if (o.rho_method == "direct") {
    cfg.method = RhoMethod::direct;
  } else if (o.rho_method == "mh") {
    cfg.method = RhoMethod::mh;
  } else {
    throw DomainError("--rho-method must be direct or mh");
  }
  CarHyper hyper{o.sigma_beta2, o.m_sigma, o.m_tau};
  if (o.variance_prior == "log-flat") {
    hyper.uniform_variance_priors = false;
  } else if (o.variance_prior != "uniform") {
    throw DomainError("--variance-prior must be uniform or log-flat");
  }
  Rng rng(c.seed, 0);
  const CarRunResult res = car_gibbs_run(data, hyper, cfg, rng);

  write_chain(res.chain, out / "draws.csv");
  write_rejects(res.rho_rejects, "rho_rejects", out / "diagnostics.csv");
  std::vector<std::string> names;
  for (std::size_t j = 0; j < data.d(); ++j) names.push_back("beta_" + std::to_string(j));
  names.insert(names.end(), {"sigma2", "tau2", "rho"});
  if (res.chain.size() > 0) write_summary(res.chain, names, out / "summary.csv");

  const double iters = static_cast<double>(std::max(o.iters, 1));
  CsvWriter rw({"rho_method", "iters", "burnin", "thin", "saved", "rho_rejects", "reject_fraction",
                "mh_accept_fraction", "wall_ms"});
  rw.row({o.rho_method, std::to_string(o.iters), std::to_string(o.burnin), std::to_string(o.thin),
          std::to_string(res.chain.size()), std::to_string(res.total_rho_rejects),
          format_double(static_cast<double>(res.total_rho_rejects) / iters),
          cfg.method == RhoMethod::mh ? format_double(static_cast<double>(res.mh_accepted) / iters) : "NA",
          sw.ms()});
  rw.save((out / "report.csv").string());

  RunRecord rec = base_record("car", c);
  rec.set("mode", o.mode);
  rec.set("rho-method", o.rho_method);
  rec.set("iters", o.iters);
  rec.set("burnin", o.burnin);
  rec.set("thin", o.thin);
  rec.set("n-knots", o.n_knots);
  rec.set("sigma-prop", o.sigma_prop);
  rec.set("sigma-beta2", o.sigma_beta2);
  rec.set("m-sigma", o.m_sigma);
  rec.set("m-tau", o.m_tau);
  rec.set("variance-prior", o.variance_prior);
  if (o.mode == "synthetic") {
    rec.set("grid-side", o.grid_side);
    rec.set("true-rho", o.true_rho);
    rec.set("true-tau2", o.true_tau2);
    rec.set("true-sigma2", o.true_sigma2);
  } else {
    rec.set("y", o.y_path);
    rec.set("x", o.x_path);
    rec.set("adjacency", o.adjacency_path);
  }
  rec.save(out / "config.txt");
  std::cout << "car: " << res.total_rho_rejects << " rho rejections in " << o.iters << " iterations\n";
}

// ---------------------------------------------------------------------- treg

struct TregOpts {
  std::string mode = "synthetic";
  std::string nu_method = "direct";
  int n_knots = 30;
  int iters = 10000;
  int burnin = 5000;
  int thin = 1;
  int n = 200;
  int internal_knots = 0;
  double sigma_beta2 = 100.0;
  double a_sigma = 1.0;
  double b_sigma = 1.0;
  double a_nu = 0.01;
  double b_nu = 200.0;
  double phi1 = 0.746;
  double phi2 = 274.7;
  double true_nu = 2.0;
  double true_sigma = 1.25;
  int curve_points = 101;
  std::string data_path;
};

void cmd_treg(const TregOpts& o, const Common& c) {
  const fs::path out = prepare_out(c);
  const Stopwatch sw(c.timing);
  TregData data;
  std::optional<CubicBasis> basis;
  Vector r;
  bool have_truth = false;
  const TregTruth truth{o.phi1, o.phi2, o.true_nu, o.true_sigma};
  if (o.mode == "synthetic") {
    Rng drng(c.seed, kDataStream);
    TregSynthetic syn = treg_synthetic(o.n, truth, drng, o.internal_knots);
    data = std::move(syn.data);
    r = std::move(syn.r);
    have_truth = true;
    CsvWriter w({"y", "r"});
    for (std::size_t i = 0; i < r.size(); ++i) w.row({format_double(data.y[i]), format_double(r[i])});
    w.save((out / "data.csv").string());
  } else if (o.mode == "csv") {
    if (o.data_path.empty()) throw DomainError("--mode csv needs --data");
    const CsvTable t = read_csv(o.data_path);
    const auto rows = numeric_rows(t, o.data_path);
    if (t.header.size() < 2 || t.header[0] != "y") {
      throw ValidationError(o.data_path + ": first column must be y, followed by r or X columns");
    }
    data.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) data.y[i] = rows[i][0];
    if (t.header.size() == 2 && t.header[1] == "r") {
      r.resize(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) r[i] = rows[i][1];
    } else {
      data.X = Matrix(rows.size(), t.header.size() - 1);
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 1; j < t.header.size(); ++j) data.X(i, j - 1) = rows[i][j];
    }
  } else {
    throw DomainError("--mode must be synthetic or csv");
  }
  if (!r.empty()) {
    basis.emplace(r, o.internal_knots);
    data.X = basis->design(r);
  }
  TregRunConfig cfg;
  cfg.iters = o.iters;
  cfg.burnin = o.burnin;
  cfg.thin = o.thin;
  cfg.sampler.n_knots = o.n_knots;
  if (o.nu_method == "direct") {
    cfg.method = NuMethod::direct;
  } else if (o.nu_method == "geweke") {
    cfg.method = NuMethod::geweke;
  } else {
    throw DomainError("--nu-method must be direct or geweke");
  }
  const TregHyper hyper{o.sigma_beta2, o.a_sigma, o.b_sigma, o.a_nu, o.b_nu};
  Rng rng(c.seed, 0);
  const TregRunResult res = treg_gibbs_run(data, hyper, cfg, rng);

  write_chain(res.chain, out / "draws.csv");
  write_rejects(res.nu_rejects, "nu_rejects", out / "diagnostics.csv");
  if (res.chain.size() > 0) write_summary(res.chain, res.chain.names(), out / "summary.csv");

  if (basis && res.chain.size() > 0) {
    if (o.curve_points < 2) throw DomainError("--curve-points must be at least 2");
    Rng prng(c.seed, kPredictStream);
    const auto [mn, mx] = std::minmax_element(r.begin(), r.end());
    const std::size_t d = data.d();
    const std::size_t m = res.chain.size();
    CsvWriter cw({"r", "mu_true", "mu_hat_q025", "mu_hat_q975", "ypred_q025", "ypred_q975"});
    std::vector<double> mu(m);
    std::vector<double> yp(m);
    for (int g = 0; g < o.curve_points; ++g) {
      const double rg = *mn + (*mx - *mn) * g / (o.curve_points - 1);
      const Vector bx = basis->eval(rg);
      for (std::size_t i = 0; i < m; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < d; ++j) v += bx[j] * res.chain.column(j)[i];
        mu[i] = v;
        const double nu = res.chain.column("nu")[i];
        const double s2 = res.chain.column("sigma2")[i];
        const double t = draw_standard_normal(prng) / std::sqrt(2.0 * draw_gamma(prng, 0.5 * nu, 1.0) / nu);
        yp[i] = v + std::sqrt(s2) * t;
      }
      cw.row({format_double(rg),
              have_truth ? format_double(blood_flow_mean(rg, o.phi1, o.phi2)) : "NA",
              format_double(quantile(mu, 0.025)), format_double(quantile(mu, 0.975)),
              format_double(quantile(yp, 0.025)), format_double(quantile(yp, 0.975))});
    }
    cw.save((out / "curve.csv").string());
  }

  const double iters = static_cast<double>(std::max(o.iters, 1));
  CsvWriter rw({"nu_method", "iters", "burnin", "thin", "saved", "nu_rejects", "rejects_per_draw",
                "wall_ms"});
  rw.row({o.nu_method, std::to_string(o.iters), std::to_string(o.burnin), std::to_string(o.thin),
          std::to_string(res.chain.size()), std::to_string(res.total_nu_rejects),
          format_double(static_cast<double>(res.total_nu_rejects) / iters), sw.ms()});
  rw.save((out / "report.csv").string());

  RunRecord rec = base_record("treg", c);
  rec.set("mode", o.mode);
  rec.set("nu-method", o.nu_method);
  rec.set("n-knots", o.n_knots);
  rec.set("iters", o.iters);
  rec.set("burnin", o.burnin);
  rec.set("thin", o.thin);
  rec.set("internal-knots", o.internal_knots);
  rec.set("sigma-beta2", o.sigma_beta2);
  rec.set("a-sigma", o.a_sigma);
  rec.set("b-sigma", o.b_sigma);
  rec.set("a-nu", o.a_nu);
  rec.set("b-nu", o.b_nu);
  rec.set("curve-points", o.curve_points);
  if (o.mode == "synthetic") {
    rec.set("n", o.n);
    rec.set("phi1", o.phi1);
    rec.set("phi2", o.phi2);
    rec.set("true-nu", o.true_nu);
    rec.set("true-sigma", o.true_sigma);
  } else {
    rec.set("data", o.data_path);
  }
  rec.save(out / "config.txt");
  std::cout << "treg: " << res.total_nu_rejects << " nu rejections in " << o.iters << " iterations\n";
}

// ---------------------------------------------------------------- nu-compare

struct NuCompareOpts {
  int n = 200;
  std::vector<double> a_values{101.0, 120.0, 200.0, 400.0};
  std::vector<int> n_knots{5, 20, 50, 100};
  std::int64_t n_draws = 100000;
  double a_nu = 0.01;
  double b_nu = 200.0;
  std::int64_t ks_subsample = 10000;
};

void cmd_nu_compare(const NuCompareOpts& o, const Common& c) {
  const fs::path out = prepare_out(c);
  const Stopwatch sw(c.timing);
  if (o.n_draws < 1) throw DomainError("--n-draws must be positive");
  if (o.a_values.empty() || o.n_knots.empty()) throw DomainError("--A and --N need at least one value");
  for (double a : o.a_values) NuTarget(NuTargetParams{o.n, a, o.a_nu, o.b_nu});  // validates A >= n/2
  const std::size_t na = o.a_values.size();
  const std::size_t nk = o.n_knots.size();
  const std::size_t per = nk + 1;  // direct runs, then Geweke
  std::vector<std::int64_t> rejects(na * per, 0);
  std::vector<std::vector<double>> first_direct(na);
  std::vector<std::vector<double>> geweke(na);
  const auto keep = static_cast<std::size_t>(std::min(o.ks_subsample, o.n_draws));

  parallel_for(na * per, resolve_threads(c.threads), [&](std::size_t t) {
    const std::size_t ai = t / per;
    const std::size_t ki = t % per;
    const NuTargetParams p{o.n, o.a_values[ai], o.a_nu, o.b_nu};
    Rng rng(c.seed, t + 1);
    if (ki < nk) {
      SamplerConfig cfg;
      cfg.n_knots = o.n_knots[ki];
      cfg.adapt = true;
      const auto run = direct_sample_many(NuTarget(p), cfg, o.n_draws, rng);
      rejects[t] = run.n_rejected;
      if (ki == 0) first_direct[ai].assign(run.draws.begin(), run.draws.begin() + keep);
    } else {
      std::vector<double> kept;
      kept.reserve(keep);
      std::int64_t rej = 0;
      for (std::int64_t i = 0; i < o.n_draws; ++i) {
        const auto g = draw_nu_geweke(p, rng);
        rej += g.n_rejected;
        if (kept.size() < keep) kept.push_back(g.nu);
      }
      rejects[t] = rej;
      geweke[ai] = std::move(kept);
    }
  });

  std::vector<std::string> header{"A"};
  for (int k : o.n_knots) header.push_back("N" + std::to_string(k));
  header.push_back("geweke");
  CsvWriter rw(header);
  CsvWriter kw({"A", "N", "subsample", "ks_statistic", "p_value"});
  for (std::size_t ai = 0; ai < na; ++ai) {
    std::vector<std::string> row{format_double(o.a_values[ai])};
    for (std::size_t ki = 0; ki < per; ++ki) row.push_back(std::to_string(rejects[ai * per + ki]));
    rw.row(row);
    const KsResult ks = ks_two_sample(first_direct[ai], geweke[ai]);
    kw.row({format_double(o.a_values[ai]), std::to_string(o.n_knots.front()), std::to_string(keep),
            format_double(ks.statistic), format_double(ks.p_value)});
  }
  rw.save((out / "rejections.csv").string());
  kw.save((out / "ks.csv").string());
  CsvWriter tw({"n", "n_draws", "wall_ms"});
  tw.row({std::to_string(o.n), std::to_string(o.n_draws), sw.ms()});
  tw.save((out / "report.csv").string());

  RunRecord rec = base_record("nu-compare", c);
  rec.set("n", o.n);
  rec.set("A", join(o.a_values));
  rec.set("N", join(o.n_knots));
  rec.set("n-draws", o.n_draws);
  rec.set("a-nu", o.a_nu);
  rec.set("b-nu", o.b_nu);
  rec.set("ks-subsample", o.ks_subsample);
  rec.save(out / "config.txt");
  std::cout << "nu-compare: wrote " << na << " x " << per << " rejection grid\n";
}

// Reads key=value lines ('#' comments allowed) into --key=value arguments.
std::vector<std::string> config_args(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::vector<std::string> args;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError(path + ": line " + std::to_string(lineno) + " is not key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "version") continue;
    if (key == "command") {
      if (value != command) {
        throw ValidationError(path + ": config is for '" + value + "', not '" + command + "'");
      }
      continue;
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// Finds --config in raw arguments so its entries can be placed before the
// command-line flags (later occurrences win).
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> out{args[0]};
  for (auto& a : config_args(path, args[0])) out.push_back(std::move(a));
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct sampling from weighted distributions with a step-function envelope"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Common common;

  CmpSampleOpts cs;
  auto* s1 = app.add_subcommand("cmp-sample", "draw CMP variates and compare with the exact pmf");
  add_common(s1, common);
  s1->add_option("--lambda", cs.lambda);
  s1->add_option("--nu", cs.nu);
  s1->add_option("--n-draws", cs.n_draws);
  s1->add_option("--n-knots", cs.n_knots, "initial knots N");
  s1->add_option("--midpoint", cs.midpoint, "geometric or arithmetic");
  s1->add_option("--omega", cs.omega);
  s1->add_option("--decomp", cs.decomp, "auto, lambda or mu");
  s1->add_flag("--no-adapt", cs.no_adapt, "do not add rejected u as knots");

  CmpStepOpts sd;
  auto* s2 = app.add_subcommand("cmp-step-diag", "knot table and rectangle areas for a CMP target");
  add_common(s2, common);
  s2->add_option("--lambda", sd.lambda);
  s2->add_option("--nu", sd.nu);
  s2->add_option("--n-knots", sd.n_knots);
  s2->add_option("--method", sd.method, "equal, geom or arith");
  s2->add_option("--omega", sd.omega);
  s2->add_option("--decomp", sd.decomp, "auto, lambda or mu");
  s2->add_option("--curve-points", sd.curve_points);

  CarOpts co;
  auto* s3 = app.add_subcommand("car", "CAR random-effects Gibbs sampler");
  add_common(s3, common);
  s3->add_option("--mode", co.mode, "synthetic or csv");
  s3->add_option("--rho-method", co.rho_method, "direct or mh");
  s3->add_option("--iters", co.iters);
  s3->add_option("--burnin", co.burnin);
  s3->add_option("--thin", co.thin);
  s3->add_option("--n-knots", co.n_knots);
  s3->add_option("--sigma-prop", co.sigma_prop);
  s3->add_option("--sigma-beta2", co.sigma_beta2);
  s3->add_option("--m-sigma", co.m_sigma);
  s3->add_option("--m-tau", co.m_tau);
  s3->add_option("--variance-prior", co.variance_prior,
                 "uniform: Uniform(0, M) on sigma2 and tau2; log-flat: 1/sigma2, 1/tau2");
  s3->add_option("--grid-side", co.grid_side);
  s3->add_option("--true-rho", co.true_rho);
  s3->add_option("--true-tau2", co.true_tau2);
  s3->add_option("--true-sigma2", co.true_sigma2);
  s3->add_option("--y", co.y_path, "csv mode: response file (one column)");
  s3->add_option("--x", co.x_path, "csv mode: design file");
  s3->add_option("--adjacency", co.adjacency_path, "csv mode: edge list i,j (0-indexed)");

  TregOpts to;
  auto* s4 = app.add_subcommand("treg", "t-regression Gibbs sampler");
  add_common(s4, common);
  s4->add_option("--mode", to.mode, "synthetic or csv");
  s4->add_option("--nu-method", to.nu_method, "direct or geweke");
  s4->add_option("--n-knots", to.n_knots);
  s4->add_option("--iters", to.iters);
  s4->add_option("--burnin", to.burnin);
  s4->add_option("--thin", to.thin);
  s4->add_option("--n", to.n);
  s4->add_option("--internal-knots", to.internal_knots);
  s4->add_option("--sigma-beta2", to.sigma_beta2);
  s4->add_option("--a-sigma", to.a_sigma);
  s4->add_option("--b-sigma", to.b_sigma);
  s4->add_option("--a-nu", to.a_nu);
  s4->add_option("--b-nu", to.b_nu);
  s4->add_option("--phi1", to.phi1);
  s4->add_option("--phi2", to.phi2);
  s4->add_option("--true-nu", to.true_nu);
  s4->add_option("--true-sigma", to.true_sigma);
  s4->add_option("--curve-points", to.curve_points);
  s4->add_option("--data", to.data_path, "csv mode: y,r or y,x1,x2,...");

  NuCompareOpts nc;
  auto* s5 = app.add_subcommand("nu-compare", "rejection counts of the two nu samplers");
  add_common(s5, common);
  s5->add_option("--n", nc.n);
  std::string a_list = "101,120,200,400";
  std::string n_list = "5,20,50,100";
  s5->add_option("--A", a_list, "comma-separated values of A");
  s5->add_option("--N", n_list, "comma-separated initial knot counts");
  s5->add_option("--n-draws", nc.n_draws);
  s5->add_option("--a-nu", nc.a_nu);
  s5->add_option("--b-nu", nc.b_nu);
  s5->add_option("--ks-subsample", nc.ks_subsample);

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*s1) cmd_cmp_sample(cs, common);
    if (*s2) cmd_cmp_step_diag(sd, common);
    if (*s3) cmd_car(co, common);
    if (*s4) cmd_treg(to, common);
    if (*s5) {
      nc.a_values.clear();
      nc.n_knots.clear();
      for (const auto& f : csv_split(a_list)) nc.a_values.push_back(parse_double(f));
      for (const auto& f : csv_split(n_list)) {
        const std::int64_t k = parse_int(f);
        if (k < 1 || k > 100000) throw DomainError("--N values must be in [1, 100000]");
        nc.n_knots.push_back(static_cast<int>(k));
      }
      cmd_nu_compare(nc, common);
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
