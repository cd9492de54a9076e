// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qcov/bounds.hpp"
#include "qcov/covariation.hpp"
#include "qcov/grid.hpp"
#include "qcov/parallel.hpp"
#include "qcov/paths.hpp"
#include "qcov/stats.hpp"
#include "qcov/testfuncs.hpp"

namespace qcov {

enum class ExperimentKind { sup_tail, levy_tail, beta_diag, martingale_bound, consistency, sup_normalized };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::sup_tail: return "sup_tail";
    case ExperimentKind::levy_tail: return "levy_tail";
    case ExperimentKind::beta_diag: return "beta_diag";
    case ExperimentKind::martingale_bound: return "martingale_bound";
    case ExperimentKind::consistency: return "consistency";
    case ExperimentKind::sup_normalized: return "sup_normalized";
  }
  return "";
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LevyOptions {
  std::vector<double> delta_eps{0.1, 0.03, 0.01};
  /// Replaces q_eps as the exceedance threshold when set.
  std::optional<double> threshold;
};

struct BetaOptions {
  std::size_t cells = 4;
  std::vector<std::size_t> refinements{16, 32, 64};
  std::size_t panel = 100;
  std::size_t ks_samples = 10000;
};

struct MartingaleOptions {
  double epsilon = 0.1;
  std::size_t cells = 16;
  /// Thresholds as multiples of sqrt(r).
  std::vector<double> multiples{0.5, 1.0, 1.5};
};

struct SupNormOptions {
  std::size_t cells = 16;
  std::vector<double> thresholds{2.0, 2.5, 3.0, 3.5, 4.0};
  std::vector<double> probabilities{0.5, 0.9, 0.99};
};

struct ConsistencyOptions {
  double epsilon = 0.1;
  std::vector<std::size_t> cells{8, 64, 512};
  std::size_t identity_paths = 1000;
  std::size_t panel = 100;
  double tolerance = 1e-12;
};

/// Everything that determines an experiment's output.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::sup_tail;
  double horizon = 1.0;
  TestFunction function = TestFunction::holder_abs_pow(0.5, 1.0);
  RateSchedule schedule = RateSchedule::holder(0.5, 0.4, 0.25);
  std::vector<double> epsilons{0.4, 0.2, 0.1, 0.05};
  double threshold = 0.5;
  double gamma = 0.25;
  std::size_t replicas = 2000;
  std::size_t refinement = 64;
  std::uint64_t seed = 20240917;
  unsigned threads = 1;

  LevyOptions levy;
  BetaOptions beta;
  MartingaleOptions martingale;
  SupNormOptions supnorm;
  ConsistencyOptions consistency;

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("T must be positive");
    if (replicas == 0) throw DomainError("replicas must be at least 1");
    if (refinement == 0) throw DomainError("refinement must be at least 1");
  }

  /// Extra constraints of the sup-tail experiment.
  void validate_tail() const {
    validate();
    if (epsilons.empty()) throw DomainError("epsilon list is empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) throw DomainError("epsilon values must lie in (0,1)");
      if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw DomainError("epsilon values must be strictly decreasing");
    }
    const double alpha = function.holder_exponent();
    if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
    if (alpha < 1.0 && !(gamma < alpha)) throw DomainError("gamma must be below the Hölder exponent");
    if (alpha >= 1.0 && !(gamma < 1.0)) throw DomainError("gamma must be below 1");
    if (!(threshold > 0.0)) throw DomainError("threshold must be positive");
  }
};

/// Monte Carlo estimate of a tail probability with its exact 95% interval.
struct TailEstimate {
  std::string experiment;
  double epsilon = kNaN;
  double delta_eps = kNaN;
  std::size_t n_eps = 0;
  double q_eps = kNaN;
  double threshold = kNaN;
  double gamma = kNaN;
  std::size_t replicas = 0;
  std::size_t count = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::uint64_t seed = 0;
  double bound = kNaN;  // analytic reference where one applies

  /// Binomial standard error sqrt(p(1-p)/N).
  [[nodiscard]] double standard_error() const {
    return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(replicas));
  }
};

inline TailEstimate make_tail(std::string experiment, std::size_t count, std::size_t replicas) {
  TailEstimate t;
  t.experiment = std::move(experiment);
  t.count = count;
  t.replicas = replicas;
  t.p_hat = static_cast<double>(count) / static_cast<double>(replicas);
  const auto ci = clopper_pearson(count, replicas);
  t.ci_low = std::min(ci.low, t.p_hat);
  t.ci_high = std::max(ci.high, t.p_hat);
  return t;
}

/// Sub-experiment seeds: kind selects a block, index the row within it.
inline std::uint64_t experiment_seed(std::uint64_t master, ExperimentKind kind, std::size_t index) {
  return derive_seed(master, static_cast<std::uint64_t>(kind) * 1000003ULL + index);
}

inline std::size_t count_true(const std::vector<char>& flags) {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), char{1}));
}

/// P{ eps^{-(1+gamma)} sup_t |Q_eps(t)| > delta } per eps, with Q = eps L_{eps,P}
/// and the sup taken over coarse nodes.
inline std::vector<TailEstimate> estimate_sup_tail(const ExperimentConfig& cfg) {
  cfg.validate_tail();
  std::vector<TailEstimate> rows;
  for (std::size_t e = 0; e < cfg.epsilons.size(); ++e) {
    const double eps = cfg.epsilons[e];
    const auto partition = schedule_partition(cfg.schedule, eps, cfg.horizon);
    const FineGrid grid(partition, cfg.refinement);
    const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::sup_tail, e);
    const double scale = std::pow(eps, -(1.0 + cfg.gamma)) * eps;
    const auto hits = parallel_map(cfg.replicas, cfg.threads, [&](std::size_t k) -> char {
      const auto path = sample_brownian(grid, seed, k);
      return scale * discrete_covariation(path, cfg.function, eps).sup_abs() > cfg.threshold ? 1 : 0;
    });
    auto t = make_tail(to_string(ExperimentKind::sup_tail), count_true(hits), cfg.replicas);
    t.epsilon = eps;
    t.delta_eps = partition.width();
    t.n_eps = partition.cells();
    t.q_eps = partition.width() < 1.0 ? q_eps(partition.width()) : kNaN;
    t.threshold = cfg.threshold;
    t.gamma = cfg.gamma;
    t.seed = seed;
    t.bound = theorem_bound(cfg.schedule, eps, TheoremConstants{1.0, cfg.threshold}, cfg.horizon);
    rows.push_back(t);
  }
  return rows;
}

/// P{ delta_{W,eps} > q_eps } over a sweep of partition widths, with the
/// analytic bound levy_tail_bound(q_eps, delta_eps, T) attached.
inline std::vector<TailEstimate> estimate_levy_tail(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.levy.delta_eps.empty()) throw DomainError("levy sweep is empty");
  std::vector<TailEstimate> rows;
  for (std::size_t e = 0; e < cfg.levy.delta_eps.size(); ++e) {
    const double target = cfg.levy.delta_eps[e];
    if (!(target > 0.0 && target < 1.0)) throw DomainError("levy sweep values must lie in (0,1)");
    const auto cells = static_cast<std::size_t>(std::ceil(cfg.horizon / target - 1e-9));
    const UniformPartition partition(cfg.horizon, std::max<std::size_t>(cells, 1));
    const double width = partition.width();
    if (!(width < 1.0)) throw DomainError("partition width must be below 1 for q_eps");
    const double q = q_eps(width);
    const double level = cfg.levy.threshold.value_or(q);
    const FineGrid grid(partition, cfg.refinement);
    const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::levy_tail, e);
    const auto hits = parallel_map(cfg.replicas, cfg.threads, [&](std::size_t k) -> char {
      return levy_modulus(sample_brownian(grid, seed, k)) > level ? 1 : 0;
    });
    auto t = make_tail(to_string(ExperimentKind::levy_tail), count_true(hits), cfg.replicas);
    t.delta_eps = width;
    t.n_eps = partition.cells();
    t.q_eps = q;
    t.threshold = level;
    t.seed = seed;
    t.bound = std::isfinite(level) ? levy_tail_bound(level, width, cfg.horizon) : 0.0;
    rows.push_back(t);
  }
  return rows;
}

/// Empirical K_2 = max p_hat / delta_eps over a levy sweep.
inline double fitted_k2(const std::vector<TailEstimate>& rows) {
  double k2 = 0.0;
  for (const auto& r : rows) k2 = std::max(k2, r.p_hat / r.delta_eps);
  return k2;
}

struct BetaNodeRow {
  double time = 0.0;
  MeanEstimate variance;      // var beta(t), target t
  MeanEstimate covariance;    // cov(beta(t), W(T)), target 0
  MeanEstimate quadratic_var; // mean of sum (Delta beta)^2 over [0,t], target t
  double qv_band_fraction = 1.0;  // share of paths with |[beta,beta](t) - t| <= 5 sqrt(2 h t)
};

struct ReconstructionRow {
  std::size_t refinement = 0;
  double median_error = 0.0;
};

struct BetaReport {
  std::size_t cells = 0;
  std::size_t refinement = 0;
  std::size_t replicas = 0;
  std::vector<BetaNodeRow> nodes;
  std::vector<ReconstructionRow> reconstruction;
  double ks_statistic = 0.0;
  double ks_critical = 0.0;
  std::size_t ks_samples = 0;
  std::uint64_t seed = 0;
};

/// Diagnostics for beta: variance and covariance with W(T) at every coarse
/// node, discrete quadratic variation, Gaussianity of increments, and the
/// refinement trend of the closed-form reconstruction of What.
inline BetaReport beta_diagnostics(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& opt = cfg.beta;
  if (opt.refinements.empty()) throw DomainError("beta refinement list is empty");
  const std::size_t m_max = *std::max_element(opt.refinements.begin(), opt.refinements.end());
  for (std::size_t m : opt.refinements) {
    if (m == 0 || m_max % m != 0) throw DomainError("beta refinements must divide the largest one");
  }
  const std::size_t m = cfg.refinement;
  const FineGrid grid(cfg.horizon, opt.cells, m);
  if (grid.steps() < 2) throw DomainError("beta diagnostics need at least two fine cells");
  const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::beta_diag, 0);
  const std::size_t n = opt.cells;
  const double h = grid.step();
  const std::size_t usable = grid.steps() - m;  // increments outside the last coarse cell

  struct Sample {
    std::vector<double> beta_at_nodes;
    std::vector<double> qv_at_nodes;
    double w_T = 0.0;
    double increment = 0.0;
  };
  const auto samples = parallel_map(cfg.replicas, cfg.threads, [&](std::size_t k) {
    const auto path = sample_brownian(grid, seed, k);
    const auto beta = beta_from_path(path);
    Sample s;
    s.w_T = path.terminal();
    s.beta_at_nodes.resize(n + 1);
    s.qv_at_nodes.resize(n + 1);
    CompensatedSum qv;
    for (std::size_t j = 0; j < grid.steps(); ++j) {
      const double d = beta[j + 1] - beta[j];
      qv.add(static_cast<long double>(d) * d);
      if ((j + 1) % m == 0) s.qv_at_nodes[(j + 1) / m] = qv.as_double();
    }
    for (std::size_t i = 0; i <= n; ++i) s.beta_at_nodes[i] = beta[i * m];
    if (usable > 0) {
      const std::size_t j = (k * 7919) % usable;
      s.increment = (beta[j + 1] - beta[j]) / std::sqrt(h);
    }
    return s;
  });

  BetaReport report;
  report.cells = n;
  report.refinement = m;
  report.replicas = cfg.replicas;
  report.seed = seed;
  std::vector<double> w_T(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) w_T[k] = samples[k].w_T;
  for (std::size_t i = 0; i <= n; ++i) {
    BetaNodeRow row;
    row.time = grid.coarse().node(i);
    if (i == 0) {
      report.nodes.push_back(row);
      continue;
    }
    std::vector<double> b(samples.size());
    std::vector<double> qv(samples.size());
    std::size_t in_band = 0;
    const double band = 5.0 * std::sqrt(2.0 * h * row.time);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      b[k] = samples[k].beta_at_nodes[i];
      qv[k] = samples[k].qv_at_nodes[i];
      if (std::fabs(qv[k] - row.time) <= band) ++in_band;
    }
    if (samples.size() >= 4) {
      row.variance = variance_estimate(b);
      row.covariance = covariance_estimate(b, w_T);
    }
    row.quadratic_var = mean_estimate(qv);
    row.qv_band_fraction = static_cast<double>(in_band) / static_cast<double>(samples.size());
    report.nodes.push_back(row);
  }

  std::vector<double> increments;
  for (std::size_t k = 0; k < samples.size() && increments.size() < opt.ks_samples; ++k) {
    increments.push_back(samples[k].increment);
  }
  if (!increments.empty()) {
    report.ks_samples = increments.size();
    report.ks_statistic = ks_statistic_normal(increments);
    report.ks_critical = ks_critical(increments.size(), 0.01);
  }

  // Fixed panel drawn at the finest refinement, subsampled for coarser ones.
  const FineGrid finest(cfg.horizon, n, m_max);
  const std::size_t panel = std::min(opt.panel, cfg.replicas);
  const std::uint64_t panel_seed = experiment_seed(cfg.seed, ExperimentKind::beta_diag, 1);
  auto errors = parallel_map(panel, cfg.threads, [&](std::size_t k) {
    const auto path = sample_brownian(finest, panel_seed, k);
    std::vector<double> per_level;
    for (std::size_t level : opt.refinements) {
      const auto sub = path.subsample(m_max / level);
      const auto beta = beta_from_path(sub);
      const auto rebuilt = reconstruct_hat_w(beta, sub.terminal(), sub.grid());
      const auto hat = time_reverse_hat(sub);
      double worst = 0.0;
      for (std::size_t j = 0; j < hat.size(); ++j) worst = std::max(worst, std::fabs(rebuilt[j] - hat[j]));
      per_level.push_back(worst);
    }
    return per_level;
  });
  for (std::size_t l = 0; l < opt.refinements.size(); ++l) {
    std::vector<double> col;
    for (const auto& e : errors) col.push_back(e[l]);
    report.reconstruction.push_back({opt.refinements[l], col.empty() ? 0.0 : median(col)});
  }
  return report;
}

struct MartingaleRow {
  double threshold = 0.0;  // delta
  TailEstimate tail;
  double bound = 0.0;             // martingale_tail_bound(r, delta)
  double reflection_tail = 0.0;   // min(1, 4 P{B(r) > delta})
  [[nodiscard]] bool dominated() const { return tail.p_hat <= bound + 3.0 * tail.standard_error(); }
};

struct MartingaleReport {
  double epsilon = 0.0;
  double r = 0.0;
  std::vector<MartingaleRow> rows;
  [[nodiscard]] bool all_dominated() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.dominated(); });
  }
};

/// Checks P{sup |S_eps| > delta} <= martingale_tail_bound(r, delta) with
/// r = cap^2 T, the sup taken over fine nodes.
inline MartingaleReport verify_martingale_bound(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& opt = cfg.martingale;
  if (!cfg.function.bounded() || !(cfg.function.cap() > 0.0)) {
    throw DomainError("martingale check needs a bounded f with positive cap");
  }
  const double r = cfg.function.cap() * cfg.function.cap() * cfg.horizon;
  const FineGrid grid(cfg.horizon, opt.cells, cfg.refinement);
  const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::martingale_bound, 0);
  const auto sups = parallel_map(cfg.replicas, cfg.threads, [&](std::size_t k) {
    const auto path = sample_brownian(grid, seed, k).repartition(grid.steps());
    return ito_fine_forward(path, cfg.function, opt.epsilon).sup_abs();
  });
  MartingaleReport report;
  report.epsilon = opt.epsilon;
  report.r = r;
  for (double mult : opt.multiples) {
    if (!(mult > 0.0)) throw DomainError("martingale thresholds must be positive");
    const double delta = mult * std::sqrt(r);
    const auto count = static_cast<std::size_t>(std::count_if(sups.begin(), sups.end(), [&](double s) { return s > delta; }));
    MartingaleRow row;
    row.threshold = delta;
    row.tail = make_tail(to_string(ExperimentKind::martingale_bound), count, cfg.replicas);
    row.tail.epsilon = opt.epsilon;
    row.tail.threshold = delta;
    row.tail.seed = seed;
    row.bound = martingale_tail_bound(r, delta);
    row.tail.bound = row.bound;
    row.reflection_tail = std::min(1.0, 4.0 * normal_upper_tail(delta / std::sqrt(r)));
    report.rows.push_back(row);
  }
  return report;
}

struct SupNormReport {
  std::size_t replicas = 0;
  std::vector<std::pair<double, double>> quantiles;  // (probability, value)
  std::vector<TailEstimate> tails;
  std::optional<LineFit> tail_decay;  // log p_hat against threshold^2
  std::uint64_t seed = 0;
};

/// Distribution of N = sup_{t>0} |W(t)|/sqrt(t) over fine nodes.
inline SupNormReport estimate_sup_normalized(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& opt = cfg.supnorm;
  const FineGrid grid(cfg.horizon, opt.cells, cfg.refinement);
  const std::uint64_t seed = experiment_seed(cfg.seed, ExperimentKind::sup_normalized, 0);
  const auto values = parallel_map(cfg.replicas, cfg.threads,
                                   [&](std::size_t k) { return sup_normalized(sample_brownian(grid, seed, k)); });
  SupNormReport report;
  report.replicas = cfg.replicas;
  report.seed = seed;
  for (double p : opt.probabilities) report.quantiles.emplace_back(p, quantile(values, p));
  std::vector<double> x, y;
  for (double level : opt.thresholds) {
    const auto count = static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double v) { return v > level; }));
    auto t = make_tail(to_string(ExperimentKind::sup_normalized), count, cfg.replicas);
    t.threshold = level;
    t.seed = seed;
    report.tails.push_back(t);
    if (count >= 5) {
      x.push_back(level * level);
      y.push_back(std::log(t.p_hat));
    }
  }
  if (x.size() >= 3) report.tail_decay = least_squares(x, y);
  return report;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

struct InsufficientData {
  std::size_t usable_points = 0;
  std::string reason;
};

/// Least squares of log p_hat on log eps over rows with count >= min_count.
inline std::variant<RateFit, InsufficientData> fit_rate(const std::vector<TailEstimate>& rows,
                                                        std::size_t min_count = 5) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.count >= min_count && r.count > 0 && r.epsilon > 0.0) {
      x.push_back(std::log(r.epsilon));
      y.push_back(std::log(r.p_hat));
    }
  }
  if (x.size() < 3) {
    return InsufficientData{x.size(), "need at least 3 points with count >= " + std::to_string(min_count)};
  }
  const auto line = least_squares(x, y);
  return RateFit{line.slope, line.intercept, line.r_squared, line.points};
}

/// p_hat nonincreasing as eps decreases, allowing overlap of the exact
/// intervals between consecutive rows.
inline bool nonincreasing_up_to_ci(const std::vector<TailEstimate>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].p_hat > rows[i - 1].p_hat && rows[i].ci_low > rows[i - 1].ci_high) return false;
  }
  return true;
}

}  // namespace qcov
