// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qcov {

/// Uniform partition 0 = s_0 < ... < s_n = T with s_i = i*T/n.
/// The last node is pinned to T rather than accumulated.
class UniformPartition {
 public:
  UniformPartition(double horizon, std::size_t cells) : horizon_(horizon), cells_(cells) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw std::invalid_argument("partition horizon must be positive and finite");
    }
    if (cells == 0) throw std::invalid_argument("partition needs at least one cell");
    width_ = horizon_ / static_cast<double>(cells_);
  }

  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] std::size_t cells() const { return cells_; }
  [[nodiscard]] double width() const { return width_; }

  [[nodiscard]] double node(std::size_t i) const {
    if (i >= cells_) return horizon_;
    return static_cast<double>(i) * width_;
  }

  /// Backward node t_i = T - s_{n-i}.
  [[nodiscard]] double backward_node(std::size_t i) const {
    if (i == 0) return 0.0;
    return horizon_ - node(cells_ - i);
  }

  /// i(t) = min{ j : s_j >= t }.
  [[nodiscard]] std::size_t index_of(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) {
      throw std::out_of_range("time " + std::to_string(t) + " outside [0, T]");
    }
    auto j = static_cast<std::size_t>(std::ceil(t / width_));
    if (j > cells_) j = cells_;
    // ceil on a rounded quotient can land one node off either way
    while (j > 0 && node(j - 1) >= t) --j;
    while (j < cells_ && node(j) < t) ++j;
    return j;
  }

  friend bool operator==(const UniformPartition&, const UniformPartition&) = default;

 private:
  double horizon_;
  std::size_t cells_;
  double width_ = 0.0;
};

/// Per-cell refinement of a coarse partition. Fine node j sits at j*h with
/// h = delta/m; coarse node i is fine node i*m.
class FineGrid {
 public:
  FineGrid(UniformPartition coarse, std::size_t refinement) : coarse_(coarse), refinement_(refinement) {
    if (refinement == 0) throw std::invalid_argument("refinement factor must be at least 1");
    step_ = coarse_.horizon() / static_cast<double>(steps());
  }

  FineGrid(double horizon, std::size_t cells, std::size_t refinement)
      : FineGrid(UniformPartition(horizon, cells), refinement) {}

  [[nodiscard]] const UniformPartition& coarse() const { return coarse_; }
  [[nodiscard]] std::size_t refinement() const { return refinement_; }
  [[nodiscard]] double horizon() const { return coarse_.horizon(); }
  [[nodiscard]] double step() const { return step_; }
  /// Number of fine cells n*m.
  [[nodiscard]] std::size_t steps() const { return coarse_.cells() * refinement_; }
  [[nodiscard]] std::size_t node_count() const { return steps() + 1; }

  [[nodiscard]] double time(std::size_t j) const {
    if (j >= steps()) return horizon();
    return static_cast<double>(j) * step_;
  }

  [[nodiscard]] std::size_t coarse_index(std::size_t i) const { return i * refinement_; }

  friend bool operator==(const FineGrid&, const FineGrid&) = default;

 private:
  UniformPartition coarse_;
  std::size_t refinement_;
  double step_ = 0.0;
};

}  // namespace qcov
