// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "qcov/summation.hpp"

namespace qcov {

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
inline Interval clopper_pearson(std::uint64_t count, std::uint64_t trials, double level = 0.95) {
  if (trials == 0) throw std::invalid_argument("clopper_pearson needs at least one trial");
  if (count > trials) throw std::invalid_argument("clopper_pearson count exceeds trials");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0,1)");
  const double tail = (1.0 - level) / 2.0;
  const auto k = static_cast<double>(count);
  const auto n = static_cast<double>(trials);
  Interval ci;
  ci.low = count == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<double>(k, n - k + 1.0), tail);
  ci.high = count == trials ? 1.0
                            : boost::math::quantile(boost::math::beta_distribution<double>(k + 1.0, n - k), 1.0 - tail);
  return ci;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P{Z > x} for standard normal Z.
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

/// Streaming mean / variance / covariance with compensated sums.
class Moments {
 public:
  void add(double x) {
    ++n_;
    sx_.add(x);
    sxx_.add(static_cast<long double>(x) * x);
  }
  [[nodiscard]] std::size_t count() const { return n_; }
  [[nodiscard]] double mean() const { return n_ ? static_cast<double>(sx_.value() / n_) : 0.0; }
  /// Unbiased sample variance.
  [[nodiscard]] double variance() const {
    if (n_ < 2) return 0.0;
    const long double m = sx_.value() / n_;
    return static_cast<double>((sxx_.value() - n_ * m * m) / (n_ - 1));
  }
  [[nodiscard]] double standard_error() const { return n_ ? std::sqrt(variance() / n_) : 0.0; }

 private:
  std::size_t n_ = 0;
  CompensatedSum sx_;
  CompensatedSum sxx_;
};

struct MeanEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  [[nodiscard]] bool within(double target, double k_se) const {
    return std::fabs(value - target) <= k_se * standard_error;
  }
};

inline MeanEstimate mean_estimate(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.add(x);
  return {m.mean(), m.standard_error()};
}

/// Sample variance with a standard error from the fourth central moment,
/// SE^2 = (m4 - (n-3)/(n-1) s^4) / n.
inline MeanEstimate variance_estimate(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) throw std::invalid_argument("variance_estimate needs at least 4 samples");
  const double mean = mean_estimate(xs).value;
  CompensatedSum s2;
  CompensatedSum s4;
  for (double x : xs) {
    const long double d = x - mean;
    s2.add(d * d);
    s4.add(d * d * d * d);
  }
  const double var = s2.as_double() / static_cast<double>(n - 1);
  const double m4 = s4.as_double() / static_cast<double>(n);
  const double nd = static_cast<double>(n);
  const double se2 = (m4 - (nd - 3.0) / (nd - 1.0) * var * var) / nd;
  return {var, std::sqrt(std::max(se2, 0.0))};
}

/// Sample covariance with SE from the sample variance of the centered products.
inline MeanEstimate covariance_estimate(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3) throw std::invalid_argument("covariance_estimate needs matched samples");
  const double mx = mean_estimate(xs).value;
  const double my = mean_estimate(ys).value;
  std::vector<double> products(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) products[i] = (xs[i] - mx) * (ys[i] - my);
  auto e = mean_estimate(products);
  const double n = static_cast<double>(xs.size());
  e.value *= n / (n - 1.0);
  return e;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double upper = xs[mid];
  if (xs.size() % 2 == 1) return upper;
  const double lower = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Empirical quantile by linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// One-sample Kolmogorov-Smirnov statistic against the standard normal.
inline double ks_statistic_normal(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("ks statistic of empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = normal_cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

/// Asymptotic KS critical value sqrt(-log(a/2)/2)/sqrt(n).
inline double ks_critical(std::size_t n, double significance = 0.01) {
  return std::sqrt(-0.5 * std::log(significance / 2.0)) / std::sqrt(static_cast<double>(n));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("least_squares needs two matched points");
  const double mx = mean_estimate(x).value;
  const double my = mean_estimate(y).value;
  CompensatedSum sxx, sxy, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxx.add(dx * dx);
    sxy.add(dx * dy);
    syy.add(dy * dy);
  }
  if (sxx.value() == 0.0L) throw std::invalid_argument("least_squares needs distinct x values");
  LineFit fit;
  fit.points = x.size();
  fit.slope = static_cast<double>(sxy.value() / sxx.value());
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy.value() == 0.0L ? 1.0 : static_cast<double>(sxy.value() * sxy.value() / (sxx.value() * syy.value()));
  return fit;
}

}  // namespace qcov
