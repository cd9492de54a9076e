// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qcov/grid.hpp"
#include "qcov/random.hpp"
#include "qcov/summation.hpp"

namespace qcov {

/// Where a generated path came from. `stride` > 1 means the path was drawn on
/// a grid `stride` times finer and then subsampled.
struct PathProvenance {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::size_t stride = 1;

  friend bool operator==(const PathProvenance&, const PathProvenance&) = default;
};

/// One Brownian trajectory on a fine grid. Immutable after construction.
class SamplePath {
 public:
  /// Wraps caller-supplied values (no provenance). values[0] must be 0.
  static SamplePath from_values(FineGrid grid, std::vector<double> values) {
    return SamplePath(grid, std::move(values), std::nullopt);
  }

  [[nodiscard]] const FineGrid& grid() const { return grid_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double operator[](std::size_t j) const { return values_[j]; }
  [[nodiscard]] std::size_t last_index() const { return values_.size() - 1; }
  [[nodiscard]] double terminal() const { return values_.back(); }
  [[nodiscard]] const std::optional<PathProvenance>& provenance() const { return provenance_; }

  /// Value at coarse node i.
  [[nodiscard]] double coarse(std::size_t i) const { return values_[grid_.coarse_index(i)]; }

  /// Same path seen through a grid whose refinement is divided by `factor`.
  [[nodiscard]] SamplePath subsample(std::size_t factor) const {
    if (factor == 0 || grid_.refinement() % factor != 0) {
      throw std::invalid_argument("subsample factor must divide the refinement");
    }
    FineGrid coarser(grid_.coarse(), grid_.refinement() / factor);
    std::vector<double> v(coarser.node_count());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = values_[j * factor];
    auto prov = provenance_;
    if (prov) prov->stride *= factor;
    return SamplePath(coarser, std::move(v), prov);
  }

  /// Same fine nodes grouped into `cells` coarse cells. The fine step is kept,
  /// so the result is what sample_brownian would produce on the new grid.
  [[nodiscard]] SamplePath repartition(std::size_t cells) const {
    if (cells == 0 || grid_.steps() % cells != 0) {
      throw std::invalid_argument("coarse cell count must divide the number of fine steps");
    }
    FineGrid regrouped(UniformPartition(grid_.horizon(), cells), grid_.steps() / cells);
    return SamplePath(regrouped, values_, provenance_);
  }

 private:
  friend SamplePath sample_brownian(const FineGrid&, std::uint64_t, std::uint64_t);

  SamplePath(FineGrid grid, std::vector<double> values, std::optional<PathProvenance> prov)
      : grid_(grid), values_(std::move(values)), provenance_(prov) {
    if (values_.size() != grid_.node_count()) {
      throw std::invalid_argument("path length does not match its grid");
    }
    if (values_.front() != 0.0) throw std::invalid_argument("path must start at 0");
  }

  FineGrid grid_;
  std::vector<double> values_;
  std::optional<PathProvenance> provenance_;
};

/// Brownian path on `grid`: increments are iid N(0, h) drawn from the counter
/// stream of (seed, replica). Values depend only on (seed, replica, T, n*m).
inline SamplePath sample_brownian(const FineGrid& grid, std::uint64_t seed, std::uint64_t replica) {
  GaussianStream gauss(stream_key(seed, replica));
  const double sd = std::sqrt(grid.step());
  std::vector<double> v(grid.node_count());
  v[0] = 0.0;
  for (std::size_t j = 1; j < v.size(); ++j) v[j] = v[j - 1] + sd * gauss.next();
  return SamplePath(grid, std::move(v), PathProvenance{seed, replica, 1});
}

/// Rebuilds a generated path from its provenance.
inline SamplePath regenerate(const FineGrid& grid, const PathProvenance& prov) {
  if (prov.stride == 1) return sample_brownian(grid, prov.seed, prov.replica);
  FineGrid finer(grid.coarse(), grid.refinement() * prov.stride);
  return sample_brownian(finer, prov.seed, prov.replica).subsample(prov.stride);
}

/// Time reversal: out[j] = X(T - t_j) - X(T).
inline std::vector<double> time_reverse_bar(std::span<const double> x) {
  const std::size_t last = x.size() - 1;
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j <= last; ++j) out[j] = x[last - j] - x[last];
  return out;
}

/// Backward process: out[j] = X(T - t_j).
inline std::vector<double> time_reverse_hat(std::span<const double> x) {
  return {x.rbegin(), x.rend()};
}

inline std::vector<double> time_reverse_bar(const SamplePath& p) { return time_reverse_bar(p.values()); }
inline std::vector<double> time_reverse_hat(const SamplePath& p) { return time_reverse_hat(p.values()); }

/// beta(t) = Wbar(t) + int_0^t What(s)/(T-s) ds on the fine grid.
///
/// The drift integral is a left-endpoint sum, so the singular node s = T is
/// never evaluated; the last cell [T-h, T] uses the integrand at T-h.
inline std::vector<double> beta_from_path(const SamplePath& path) {
  const FineGrid& g = path.grid();
  const std::size_t last = g.steps();
  if (last < 2) throw std::invalid_argument("beta needs a fine grid with at least two cells");
  const double h = g.step();
  const auto v = path.values();
  std::vector<double> beta(last + 1);
  CompensatedSum drift;
  beta[0] = 0.0;
  for (std::size_t k = 1; k <= last; ++k) {
    const std::size_t j = k - 1;
    const double what = v[last - j];
    const double remaining = static_cast<double>(last - j) * h;  // T - u_j
    drift.add(static_cast<long double>(h) * what / remaining);
    beta[k] = static_cast<double>(static_cast<long double>(v[last - k] - v[last]) + drift.value());
  }
  return beta;
}

/// What(t) = W(T)(1 - t/T) + (T - t) int_0^t dbeta(s)/(T - s).
///
/// Left-endpoint weights 1/(T - u_j); the last cell weight is 1/h. The last
/// node returns exactly 0.
inline std::vector<double> reconstruct_hat_w(std::span<const double> beta, double w_T, const FineGrid& grid) {
  const std::size_t last = grid.steps();
  if (beta.size() != grid.node_count()) {
    throw std::invalid_argument("beta length does not match the grid");
  }
  if (last < 2) throw std::invalid_argument("reconstruction needs at least two fine cells");
  const double h = grid.step();
  const double horizon = grid.horizon();
  std::vector<double> out(last + 1);
  CompensatedSum integral;
  out[0] = w_T;
  for (std::size_t k = 1; k <= last; ++k) {
    const std::size_t j = k - 1;
    integral.add(static_cast<long double>(beta[k] - beta[j]) / (static_cast<long double>(last - j) * h));
    const long double remaining = static_cast<long double>(last - k) * h;
    out[k] = static_cast<double>(w_T * (remaining / horizon) + remaining * integral.value());
  }
  out[last] = 0.0;
  return out;
}

/// Partition-wise modulus: max over coarse cells of max over the cell's fine
/// nodes of |W(s) - W(s_{i-1})|. Underestimates the continuous sup by the
/// in-cell fluctuation at scale h.
inline double levy_modulus(const SamplePath& path) {
  const FineGrid& g = path.grid();
  const std::size_t m = g.refinement();
  const auto v = path.values();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.coarse().cells(); ++i) {
    const double anchor = v[i * m];
    for (std::size_t j = i * m + 1; j <= (i + 1) * m; ++j) {
      worst = std::max(worst, std::fabs(v[j] - anchor));
    }
  }
  return worst;
}

/// sup over fine nodes t_j > 0 of |W(t_j)| / sqrt(t_j).
inline double sup_normalized(const SamplePath& path) {
  const FineGrid& g = path.grid();
  const auto v = path.values();
  double worst = 0.0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    worst = std::max(worst, std::fabs(v[j]) / std::sqrt(g.time(j)));
  }
  return worst;
}

}  // namespace qcov
