#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rshom/linalg.hpp"

namespace rshom {

struct SummaryStat {
  double mean = 0.0;
  double stderr_ = 0.0;  // standard error of the mean
  std::size_t n = 0;
};

inline SummaryStat summarize(const std::vector<double>& x) {
  SummaryStat s;
  s.n = x.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw NonFinite("non-finite sample in summarize");
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(s.n - 1) /
                          static_cast<double>(s.n));
  }
  return s;
}

inline double z_score(const SummaryStat& s, double target) {
  if (s.stderr_ == 0.0)
    return s.mean == target ? 0.0
                            : std::numeric_limits<double>::infinity();
  return (s.mean - target) / s.stderr_;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// CDF of |N(0, s^2)| (a Brownian coordinate reflected at the origin).
inline double folded_normal_cdf(double y, double s) {
  if (y <= 0.0) return 0.0;
  return 2.0 * normal_cdf(y / s) - 1.0;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, with the
/// standard asymptotic p-value (Stephens' correction).
inline KsResult ks_test(std::vector<double> sample,
                        const std::function<double(double)>& cdf) {
  KsResult r;
  r.n = sample.size();
  if (r.n == 0) throw ConfigInvalid("ks_test on empty sample");
  std::sort(sample.begin(), sample.end());
  double n = static_cast<double>(r.n);
  for (std::size_t i = 0; i < r.n; ++i) {
    double F = cdf(sample[i]);
    r.statistic = std::max(r.statistic, F - static_cast<double>(i) / n);
    r.statistic = std::max(r.statistic, static_cast<double>(i + 1) / n - F);
  }
  double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * r.statistic;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * (j % 2 == 1 ? 1.0 : -1.0) *
                  std::exp(-2.0 * j * j * lam * lam);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

}  // namespace rshom
