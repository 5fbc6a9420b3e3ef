#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stepdirect/errors.hpp"

namespace stepdirect {

struct SummaryRow {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

// Type-7 quantile (linear interpolation between order statistics) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile: empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> xs, double p) {
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, p);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline SummaryRow summarize(std::span<const double> draws) {
  if (draws.empty()) throw DomainError("summarize: empty sample");
  std::vector<double> s(draws.begin(), draws.end());
  std::sort(s.begin(), s.end());
  SummaryRow row;
  row.mean = mean(draws);
  row.sd = std::sqrt(variance(draws));
  row.q025 = quantile_sorted(s, 0.025);
  row.q975 = quantile_sorted(s, 0.975);
  return row;
}

// Monte Carlo standard error of the mean by non-overlapping batch means.
inline double batch_means_se(std::span<const double> xs, std::size_t n_batches = 25) {
  if (xs.size() < 2 * n_batches) n_batches = std::max<std::size_t>(2, xs.size() / 2);
  const std::size_t len = xs.size() / n_batches;
  if (len == 0) return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
  std::vector<double> means(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) means[b] = mean(xs.subspan(b * len, len));
  return std::sqrt(variance(means) / static_cast<double>(n_batches));
}

// Total variation distance between two pmfs on the nonnegative integers.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    s += std::abs(a - b);
  }
  return 0.5 * s;
}

// Empirical pmf of integer draws; index = value.
template <class Int>
std::vector<double> empirical_pmf(std::span<const Int> draws) {
  if (draws.empty()) return {};
  const Int top = *std::max_element(draws.begin(), draws.end());
  std::vector<double> pmf(static_cast<std::size_t>(top) + 1, 0.0);
  const double w = 1.0 / static_cast<double>(draws.size());
  for (Int x : draws) pmf[static_cast<std::size_t>(x)] += w;
  return pmf;
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic Kolmogorov survival function Q_KS(lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = mean(ra);
  const double mb = mean(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Column-oriented store of saved MCMC draws.
class ChainOutput {
 public:
  ChainOutput() = default;
  ChainOutput(std::vector<std::string> names, int burnin, int thin)
      : names_(std::move(names)), columns_(names_.size()), burnin_(burnin), thin_(thin) {}

  void push(int iteration, std::span<const double> row) {
    if (row.size() != names_.size()) throw DomainError("ChainOutput: row width mismatch");
    iterations_.push_back(iteration);
    for (std::size_t j = 0; j < row.size(); ++j) columns_[j].push_back(row[j]);
  }

  std::size_t size() const noexcept { return iterations_.size(); }
  int burnin() const noexcept { return burnin_; }
  int thin() const noexcept { return thin_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<int>& iterations() const noexcept { return iterations_; }
  const std::vector<double>& column(std::size_t j) const { return columns_.at(j); }

  const std::vector<double>& column(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j)
      if (names_[j] == name) return columns_[j];
    throw DomainError("ChainOutput: no column named " + std::string(name));
  }

  SummaryRow summary(std::string_view name) const { return summarize(column(name)); }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::vector<int> iterations_;
  int burnin_ = 0;
  int thin_ = 1;
};

// Whether a saved-iteration index i (1-based) is kept under burn-in/thinning.
inline bool is_saved_iteration(int i, int burnin, int thin) {
  return i > burnin && (i - burnin) % thin == 0;
}

}  // namespace stepdirect
