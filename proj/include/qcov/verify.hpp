// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qcov/covariation.hpp"
#include "qcov/montecarlo.hpp"
#include "qcov/parallel.hpp"
#include "qcov/paths.hpp"
#include "qcov/stats.hpp"

namespace qcov {

/// One path/node where a check failed.
struct CheckFailure {
  std::string check;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::size_t cells = 0;
  std::size_t node = 0;
  double value = 0.0;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  bool asserted = true;  // false for tracked-only diagnostics
  double worst = 0.0;    // largest observed error or ratio
  double limit = 0.0;
  std::string detail;
};

struct ConsistencyReport {
  std::vector<CheckResult> checks;
  std::vector<CheckFailure> failures;
  [[nodiscard]] bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return !c.asserted || c.passed; });
  }
};

namespace detail {

/// Largest |a_k - b_k| relative to the series scale, with its node.
inline std::pair<double, std::size_t> worst_node_gap(std::span<const double> a, std::span<const double> b) {
  double scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) scale = std::max({scale, std::fabs(a[k]), std::fabs(b[k])});
  double worst = 0.0;
  std::size_t node = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double g = std::fabs(a[k] - b[k]) / (scale == 0.0 ? 1.0 : scale);
    if (g > worst) {
      worst = g;
      node = k;
    }
  }
  return {worst, node};
}

inline bool strictly_decreasing(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] < xs[i - 1])) return false;
  }
  return true;
}

inline bool nonincreasing(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] > xs[i - 1]) return false;
  }
  return true;
}

inline std::string join(const std::vector<double>& xs) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6g", i ? " > " : "", xs[i]);
    out += buf;
  }
  return out;
}

}  // namespace detail

struct IdentityPanelResult {
  double eq11 = 0.0;   // max relative gap of (Jhat - J) vs L
  double eq10 = 0.0;   // max relative gap of Jhat vs its backward-node form
  double coarse_m1 = 0.0;  // max relative gap of S vs J and Jhat(T) vs -Shat(T) at m = 1
  std::vector<CheckFailure> failures;
};

/// Exact algebraic identities on `paths` paths for each coarse cell count.
inline IdentityPanelResult identity_panel(const ExperimentConfig& cfg, double tolerance) {
  const auto& opt = cfg.consistency;
  const double eps = opt.epsilon;
  IdentityPanelResult out;
  for (std::size_t c = 0; c < opt.cells.size(); ++c) {
    const std::size_t n = opt.cells[c];
    const FineGrid grid(cfg.horizon, n, cfg.refinement);
    const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::consistency, c);
    struct Row {
      double eq11 = 0.0, eq10 = 0.0, m1 = 0.0;
      std::size_t node11 = 0, node10 = 0, node_m1 = 0;
    };
    const auto rows = parallel_map(opt.identity_paths, cfg.threads, [&](std::size_t k) {
      const auto path = sample_brownian(grid, seed, k);
      const auto j = forward_sum(path, cfg.function, eps);
      const auto jhat = backward_sum(path, cfg.function, eps);
      const auto l = discrete_covariation(path, cfg.function, eps);
      std::vector<double> diff(j.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = jhat[i] - j[i];
      Row r;
      std::tie(r.eq11, r.node11) = detail::worst_node_gap(diff, l.values());
      std::tie(r.eq10, r.node10) = detail::worst_node_gap(jhat.values(), backward_sum_reversed(path, cfg.function, eps).values());
      const auto coarse_only = path.subsample(grid.refinement());
      const auto s1 = ito_fine_forward(coarse_only, cfg.function, eps);
      std::tie(r.m1, r.node_m1) = detail::worst_node_gap(s1.values(), j.values());
      const double end_gap = relative_gap(std::vector<double>{jhat.terminal()},
                                          std::vector<double>{-ito_fine_backward(coarse_only, cfg.function, eps).terminal()});
      if (end_gap > r.m1) {
        r.m1 = end_gap;
        r.node_m1 = n;
      }
      return r;
    });
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& r = rows[k];
      out.eq11 = std::max(out.eq11, r.eq11);
      out.eq10 = std::max(out.eq10, r.eq10);
      out.coarse_m1 = std::max(out.coarse_m1, r.m1);
      if (r.eq11 > tolerance) out.failures.push_back({"eq11_identity", seed, k, n, r.node11, r.eq11});
      if (r.eq10 > tolerance) out.failures.push_back({"eq10_reordering", seed, k, n, r.node10, r.eq10});
      if (r.m1 > tolerance) out.failures.push_back({"m1_coincidence", seed, k, n, r.node_m1, r.m1});
    }
  }
  return out;
}

struct InequalityPanelResult {
  double gamma_ratio = 0.0;     // max Gamma(T) / (T osc(eps delta_W)^2)
  double drift_ratio = 0.0;     // max sup|A| / (2 sqrt(T) osc(eps delta) N)
  double mhat_discrepancy = 0.0;
  std::vector<CheckFailure> failures;
};

/// Per-path inequalities for Gamma and A, and the two routes to Mhat.
///
/// The A bound uses the larger of the forward and backward partition moduli:
/// backward cells are anchored at forward cell ends, where in-cell increments
/// are bounded by the modulus of the reversed path.
inline InequalityPanelResult inequality_panel(const ExperimentConfig& cfg, std::size_t cells, std::size_t paths) {
  const double eps = cfg.consistency.epsilon;
  const FineGrid grid(cfg.horizon, cells, cfg.refinement);
  const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::consistency, 100);
  struct Row {
    double gamma_ratio = 0.0, drift_ratio = 0.0, mhat = 0.0;
  };
  const auto& f = cfg.function;
  const auto rows = parallel_map(paths, cfg.threads, [&](std::size_t k) {
    const auto path = sample_brownian(grid, seed, k);
    Row r;
    const double modulus = levy_modulus(path);
    const double g_T = gamma(path, f, eps).terminal();
    const double g_bound = modulus > 0.0 ? cfg.horizon * std::pow(f.osc_bound(eps * modulus), 2) : 0.0;
    r.gamma_ratio = g_T == 0.0 ? 0.0 : (g_bound > 0.0 ? g_T / g_bound : INFINITY);

    const auto beta = beta_from_path(path);
    const auto back = residual_backward(path, f, eps, beta);
    r.mhat = back.discrepancy();
    const auto reversed = SamplePath::from_values(grid, time_reverse_bar(path));
    const double both = std::max(modulus, levy_modulus(reversed));
    const double a_bound = 2.0 * std::sqrt(cfg.horizon) * (both > 0.0 ? f.osc_bound(eps * both) : 0.0) * sup_normalized(path);
    const double a_sup = back.drift.sup_abs();
    r.drift_ratio = a_sup == 0.0 ? 0.0 : (a_bound > 0.0 ? a_sup / a_bound : INFINITY);
    return r;
  });
  InequalityPanelResult out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    out.gamma_ratio = std::max(out.gamma_ratio, r.gamma_ratio);
    out.drift_ratio = std::max(out.drift_ratio, r.drift_ratio);
    out.mhat_discrepancy = std::max(out.mhat_discrepancy, r.mhat);
    if (r.gamma_ratio > 1.0) out.failures.push_back({"gamma_bound", seed, k, cells, cells, r.gamma_ratio});
    if (r.drift_ratio > 1.0) out.failures.push_back({"drift_bound", seed, k, cells, cells, r.drift_ratio});
  }
  return out;
}

struct RefinementMedians {
  std::vector<std::size_t> cells;
  std::vector<double> l_vs_ito;     // |L_disc(T) + S(T) + Shat(T)|
  std::vector<double> s_vs_j;       // |S(T) - J(T)|
  std::vector<double> l_vs_rep;     // |L_disc(T) - L_rep(T)|
};

/// Medians over a fixed fine panel as the coarse partition is refined.
/// The fine grid is shared by all cell counts, so only the coarse estimators
/// change between columns.
inline RefinementMedians refinement_panel(const ExperimentConfig& cfg) {
  const auto& opt = cfg.consistency;
  auto cells = opt.cells;
  std::sort(cells.begin(), cells.end());
  const std::size_t n_max = cells.back();
  const FineGrid grid(cfg.horizon, n_max, cfg.refinement);
  for (std::size_t n : cells) {
    if (grid.steps() % n != 0) throw DomainError("coarse cell counts must divide the finest fine grid");
  }
  const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::consistency, 200);
  const double eps = opt.epsilon;
  const auto& f = cfg.function;
  const auto rows = parallel_map(opt.panel, cfg.threads, [&](std::size_t k) {
    const auto path = sample_brownian(grid, seed, k);
    const double s = ito_fine_forward(path, f, eps).terminal();
    const double shat = ito_fine_backward(path, f, eps).terminal();
    const auto beta = beta_from_path(path);
    const double rep = representation_L(path, f, eps, beta).terminal();
    std::vector<double> row;
    for (std::size_t n : cells) {
      const auto regrouped = path.repartition(n);
      const double l = discrete_covariation(regrouped, f, eps).terminal();
      const double j = forward_sum(regrouped, f, eps).terminal();
      row.push_back(std::fabs(l + s + shat));
      row.push_back(std::fabs(s - j));
      row.push_back(std::fabs(l - rep));
    }
    return row;
  });
  RefinementMedians out;
  out.cells = cells;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<double> a, b, d;
    for (const auto& r : rows) {
      a.push_back(r[3 * c]);
      b.push_back(r[3 * c + 1]);
      d.push_back(r[3 * c + 2]);
    }
    out.l_vs_ito.push_back(median(a));
    out.s_vs_j.push_back(median(b));
    out.l_vs_rep.push_back(median(d));
  }
  return out;
}

struct SmoothOptions {
  TestFunction function = TestFunction::smooth_sin(1.0);
  double epsilon = 0.1;
  std::vector<std::size_t> cells{16, 64, 256};
  std::size_t paths = 500;
};

/// Medians of |eps L_{eps,P}(T) - eps^2 int f'(eps W) ds| for a smooth f as
/// the coarse partition is refined on a fixed fine panel.
inline std::vector<double> smooth_reference_medians(const ExperimentConfig& cfg, const SmoothOptions& opt) {
  auto cells = opt.cells;
  std::sort(cells.begin(), cells.end());
  const FineGrid grid(cfg.horizon, cells.back(), cfg.refinement);
  const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::consistency, 300);
  const auto rows = parallel_map(opt.paths, cfg.threads, [&](std::size_t k) {
    const auto path = sample_brownian(grid, seed, k);
    const double ref = smooth_reference(path, opt.function, opt.epsilon).terminal();
    std::vector<double> row;
    for (std::size_t n : cells) {
      const double l = discrete_covariation(path.repartition(n), opt.function, opt.epsilon).terminal();
      row.push_back(std::fabs(opt.epsilon * l - ref));
    }
    return row;
  });
  std::vector<double> medians;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r[c]);
    medians.push_back(median(col));
  }
  return medians;
}

/// Identity and refinement-consistency suite behind `qcov verify`.
inline ConsistencyReport run_consistency(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& opt = cfg.consistency;
  ConsistencyReport report;
  const double tol = opt.tolerance;

  const auto ids = identity_panel(cfg, tol);
  report.checks.push_back({"eq11_identity", ids.eq11 <= tol, true, ids.eq11, tol, "(Jhat - J) vs sum Df DW"});
  report.checks.push_back({"eq10_reordering", ids.eq10 <= tol, true, ids.eq10, tol, "Jhat vs backward-node form"});
  report.checks.push_back({"m1_coincidence", ids.coarse_m1 <= tol, true, ids.coarse_m1, tol, "S = J and Jhat(T) = -Shat(T) at m = 1"});
  report.failures = ids.failures;

  const std::size_t ineq_cells = *std::min_element(opt.cells.begin(), opt.cells.end());
  const auto ineq = inequality_panel(cfg, ineq_cells, opt.panel);
  report.checks.push_back({"gamma_bound", ineq.gamma_ratio <= 1.0, true, ineq.gamma_ratio, 1.0,
                           "Gamma(T) <= T osc(eps delta_W)^2"});
  report.checks.push_back({"drift_bound", ineq.drift_ratio <= 1.0, true, ineq.drift_ratio, 1.0,
                           "sup|A| <= 2 sqrt(T) osc(eps delta) sup|W|/sqrt(s)"});
  report.checks.push_back({"mhat_two_routes", true, false, ineq.mhat_discrepancy, 0.0,
                           "max |Mhat(sums) - Mhat(beta)|, tracked"});
  report.failures.insert(report.failures.end(), ineq.failures.begin(), ineq.failures.end());

  const auto ref = refinement_panel(cfg);
  report.checks.push_back({"refine_L_vs_ito", detail::strictly_decreasing(ref.l_vs_ito), true, ref.l_vs_ito.back(), 0.0,
                           "median |L + S + Shat|(T): " + detail::join(ref.l_vs_ito)});
  report.checks.push_back({"refine_S_vs_J", detail::strictly_decreasing(ref.s_vs_j), true, ref.s_vs_j.back(), 0.0,
                           "median |S - J|(T): " + detail::join(ref.s_vs_j)});
  report.checks.push_back({"refine_L_vs_rep", detail::strictly_decreasing(ref.l_vs_rep), true, ref.l_vs_rep.back(), 0.0,
                           "median |L - L_rep|(T): " + detail::join(ref.l_vs_rep)});

  const auto smooth = smooth_reference_medians(cfg, SmoothOptions{});
  report.checks.push_back({"refine_smooth_reference", detail::strictly_decreasing(smooth), true, smooth.back(), 0.0,
                           "median |eps L - Q_ref|(T): " + detail::join(smooth)});

  ExperimentConfig beta_cfg = cfg;
  beta_cfg.replicas = std::max<std::size_t>(cfg.beta.panel, 4);
  const auto beta = beta_diagnostics(beta_cfg);
  std::vector<double> recon;
  for (const auto& r : beta.reconstruction) recon.push_back(r.median_error);
  report.checks.push_back({"refine_reconstruction", detail::nonincreasing(recon), true, recon.back(), 0.0,
                           "median max|What_rebuilt - What|: " + detail::join(recon)});
  return report;
}

}  // namespace qcov
