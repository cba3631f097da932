#pragma once

// Small statistics toolkit for the sampler checks.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace fuchsian::stats {

/// Mergeable running mean/variance (Chan et al. update).
struct Accumulator {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const Accumulator& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    double d = o.mean - mean;
    double nt = na + nb;
    mean += d * nb / nt;
    m2 += o.m2 + d * d * na * nb / nt;
    n += o.n;
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_of_mean() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov with Stephens' small-sample correction.
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) return {};
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/// One-sample Kolmogorov-Smirnov against a continuous CDF.
inline TestResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) return {};
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double F = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  double sn = std::sqrt(n);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}

/// Chi-square homogeneity test for two count vectors over the same categories.
inline TestResult chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0, nb = 0;
  for (double x : a) na += x;
  for (double x : b) nb += x;
  if (na == 0 || nb == 0) return {};
  double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
  double chi = 0;
  int df = -1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] + b[i] == 0) continue;
    double d = ka * a[i] - kb * b[i];
    chi += d * d / (a[i] + b[i]);
    ++df;
  }
  if (df < 1) return {chi, 1.0};
  boost::math::chi_squared dist(df);
  return {chi, boost::math::cdf(boost::math::complement(dist, chi))};
}

/// Two-sided z-test for equal means.
inline TestResult z_test(const Accumulator& a, const Accumulator& b) {
  double se = std::sqrt(a.variance() / static_cast<double>(std::max<std::uint64_t>(a.n, 1)) +
                        b.variance() / static_cast<double>(std::max<std::uint64_t>(b.n, 1)));
  if (se == 0) return {0.0, a.mean == b.mean ? 1.0 : 0.0};
  double z = (a.mean - b.mean) / se;
  boost::math::normal N;
  return {z, 2.0 * boost::math::cdf(boost::math::complement(N, std::abs(z)))};
}

/// Two-sided binomial-proportion z-test of an observed count against p.
inline TestResult proportion_test(double count, double n, double p) {
  double se = std::sqrt(n * p * (1 - p));
  if (se == 0) return {0.0, count == n * p ? 1.0 : 0.0};
  double z = (count - n * p) / se;
  boost::math::normal N;
  return {z, 2.0 * boost::math::cdf(boost::math::complement(N, std::abs(z)))};
}

}  // namespace fuchsian::stats
