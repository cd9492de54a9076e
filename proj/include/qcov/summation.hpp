// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>

namespace qcov {

/// Neumaier-compensated accumulator carried in extended precision.
///
/// Every series in the library is a running sum of up to n*m terms, and the
/// exact-identity checks compare two such sums at 1e-12 relative error, so
/// plain double accumulation is not enough for long paths.
class CompensatedSum {
 public:
  CompensatedSum() = default;
  explicit CompensatedSum(long double init) : sum_(init) {}

  void add(long double x) {
    const long double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(long double x) {
    add(x);
    return *this;
  }

  [[nodiscard]] long double value() const { return sum_ + comp_; }
  [[nodiscard]] double as_double() const { return static_cast<double>(value()); }

 private:
  long double sum_ = 0.0L;
  long double comp_ = 0.0L;
};

inline double compensated_total(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.as_double();
}

}  // namespace qcov
