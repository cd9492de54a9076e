// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "qcov/bounds.hpp"
#include "qcov/config.hpp"
#include "qcov/montecarlo.hpp"
#include "qcov/output.hpp"
#include "qcov/parallel.hpp"
#include "qcov/verify.hpp"

namespace qcov {

enum ExitCode : int { kExitPass = 0, kExitAssertion = 1, kExitUsage = 2 };

/// Command-line overrides applied on top of a loaded config.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> epsilons;
  std::optional<std::size_t> replicas;
};

inline void apply_overrides(RunConfig& rc, const Overrides& o) {
  if (o.seed) rc.experiment.seed = *o.seed;
  if (o.epsilons) {
    rc.experiment.epsilons = *o.epsilons;
    rc.bounds_epsilons.clear();
  }
  if (o.replicas) {
    rc.experiment.replicas = *o.replicas;
    rc.replicas.clear();
  }
}

/// Tables and plots produced by a command, plus its verdict.
struct CommandOutput {
  int exit_code = kExitPass;
  std::vector<CsvTable> tables;
  std::vector<std::pair<std::string, std::string>> files;  // name -> contents (plots)
  std::vector<std::string> messages;
};

namespace detail {

inline std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

inline void tail_row(CsvTable& t, const TailEstimate& e) {
  t.row()
      .cell(e.experiment)
      .cell(e.epsilon)
      .cell(e.delta_eps)
      .cell(e.n_eps)
      .cell(e.q_eps)
      .cell(e.threshold)
      .cell(e.gamma)
      .cell(e.replicas)
      .cell(e.count)
      .cell(e.p_hat)
      .cell(e.ci_low)
      .cell(e.ci_high)
      .cell(static_cast<std::size_t>(e.seed));
}

}  // namespace detail

inline CommandOutput cmd_verify(const RunConfig& rc, unsigned threads) {
  auto cfg = rc.for_command("verify");
  cfg.threads = threads;
  const auto report = run_consistency(cfg);
  CommandOutput out;
  CsvTable checks("verify", {"check", "asserted", "passed", "worst", "limit", "detail"});
  for (const auto& c : report.checks) {
    checks.row().cell(c.name).cell(c.asserted).cell(c.passed).cell(c.worst).cell(c.limit).cell(c.detail);
    out.messages.push_back(std::string(c.asserted ? (c.passed ? "PASS  " : "FAIL  ") : "INFO  ") + c.name + "  " +
                           detail::fmt("%.3g", c.worst) + "  " + c.detail);
  }
  CsvTable failures("verify_failures", {"check", "seed", "replica", "cells", "node", "value"});
  for (const auto& f : report.failures) {
    failures.row()
        .cell(f.check)
        .cell(static_cast<std::size_t>(f.seed))
        .cell(static_cast<std::size_t>(f.replica))
        .cell(f.cells)
        .cell(f.node)
        .cell(f.value);
  }
  constexpr std::size_t shown = 20;
  for (std::size_t i = 0; i < report.failures.size() && i < shown; ++i) {
    const auto& f = report.failures[i];
    out.messages.push_back("  failure " + f.check + " seed=" + std::to_string(f.seed) + " replica=" +
                           std::to_string(f.replica) + " cells=" + std::to_string(f.cells) + " node=" +
                           std::to_string(f.node) + detail::fmt(" value=%.17g", f.value));
  }
  if (report.failures.size() > shown) {
    out.messages.push_back("  ... " + std::to_string(report.failures.size() - shown) + " more in verify_failures.csv");
  }
  out.tables.push_back(std::move(checks));
  out.tables.push_back(std::move(failures));
  out.exit_code = report.passed() ? kExitPass : kExitAssertion;
  return out;
}

inline CommandOutput cmd_tails(const RunConfig& rc, unsigned threads) {
  auto cfg = rc.for_command("tails");
  cfg.threads = threads;
  const auto rows = estimate_sup_tail(cfg);
  CommandOutput out;
  CsvTable tails("tails", {"experiment", "epsilon", "delta_eps", "n_eps", "q_eps", "threshold", "gamma", "N", "count",
                           "p_hat", "ci_low", "ci_high", "seed"});
  for (const auto& r : rows) detail::tail_row(tails, r);

  CsvTable fit("ratefit", {"slope", "intercept", "r_squared", "npoints"});
  const auto result = fit_rate(rows);
  if (const auto* f = std::get_if<RateFit>(&result)) {
    fit.row().cell(f->slope).cell(f->intercept).cell(f->r_squared).cell(f->points);
    out.messages.push_back(detail::fmt("rate fit: slope %.4g  r^2 %.4g", f->slope, f->r_squared));
  } else {
    const auto& bad = std::get<InsufficientData>(result);
    fit.note("insufficient data: " + bad.reason);
    fit.row().cell(kNaN).cell(kNaN).cell(kNaN).cell(bad.usable_points);
    out.messages.push_back("rate fit: insufficient data (" + bad.reason + ")");
  }
  if (cfg.schedule.kind() == ScheduleKind::holder) {
    fit.note(detail::fmt("reference bound slope %.17g (one-sided)", cfg.schedule.holder_rate()));
  }
  for (const auto& r : rows) {
    out.messages.push_back(detail::fmt("eps %-6g n_eps %-6g p_hat %.4g", r.epsilon, static_cast<double>(r.n_eps), r.p_hat) +
                           detail::fmt("  ci [%.4g, %.4g]", r.ci_low, r.ci_high));
  }

  PlotSeries emp{"p_hat (95% CI)"};
  PlotSeries shape{"bound shape", {}, {}, {}, {}, "#d62728", true, false, true};
  for (const auto& r : rows) {
    emp.x.push_back(r.epsilon);
    emp.y.push_back(r.p_hat);
    emp.low.push_back(r.ci_low);
    emp.high.push_back(r.ci_high);
    shape.x.push_back(r.epsilon);
    shape.y.push_back(theorem_bound(cfg.schedule, r.epsilon, TheoremConstants{rc.tails_prefactor, cfg.threshold}, cfg.horizon));
  }
  out.files.emplace_back("tails.svg", loglog_svg("sup-tail probability", "epsilon", "P{scaled sup |Q| > delta}", {emp, shape}));
  out.tables.push_back(std::move(tails));
  out.tables.push_back(std::move(fit));
  return out;
}

inline CommandOutput cmd_levy(const RunConfig& rc, unsigned threads) {
  auto cfg = rc.for_command("levy");
  cfg.threads = threads;
  const auto rows = estimate_levy_tail(cfg);
  const double k2 = fitted_k2(rows);
  CommandOutput out;
  CsvTable t("levy", {"delta_eps", "n_eps", "q_eps", "threshold", "N", "count", "p_hat", "ci_low", "ci_high",
                      "levy_bound", "dominated", "k2_fitted", "seed"});
  t.note("k2_fitted = max p_hat/delta_eps over the sweep; a fitted constant, not an analytic one");
  PlotSeries emp{"p_hat (95% CI)"};
  PlotSeries bound{"analytic bound", {}, {}, {}, {}, "#d62728", true, true, true};
  for (const auto& r : rows) {
    const bool dominated = r.p_hat <= r.bound + 3.0 * r.standard_error();
    if (!dominated) out.exit_code = kExitAssertion;
    t.row()
        .cell(r.delta_eps)
        .cell(r.n_eps)
        .cell(r.q_eps)
        .cell(r.threshold)
        .cell(r.replicas)
        .cell(r.count)
        .cell(r.p_hat)
        .cell(r.ci_low)
        .cell(r.ci_high)
        .cell(r.bound)
        .cell(dominated)
        .cell(k2)
        .cell(static_cast<std::size_t>(r.seed));
    out.messages.push_back(std::string(dominated ? "PASS  " : "FAIL  ") +
                           detail::fmt("delta_eps %-6g p_hat %.4g  bound %.4g", r.delta_eps, r.p_hat, r.bound));
    emp.x.push_back(r.delta_eps);
    emp.y.push_back(r.p_hat);
    emp.low.push_back(r.ci_low);
    emp.high.push_back(r.ci_high);
    bound.x.push_back(r.delta_eps);
    bound.y.push_back(r.bound);
  }
  out.messages.push_back(detail::fmt("fitted K2 = %.4g", k2));
  out.files.emplace_back("levy.svg", loglog_svg("modulus tail", "delta_eps", "P{delta_W > q}", {emp, bound}));
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_beta(const RunConfig& rc, unsigned threads) {
  auto cfg = rc.for_command("beta");
  cfg.threads = threads;
  const auto report = beta_diagnostics(cfg);
  CommandOutput out;
  CsvTable nodes("beta", {"time", "var", "var_se", "cov_wT", "cov_se", "qv_mean", "qv_se", "qv_band_fraction",
                          "var_within_3se", "cov_within_3se"});
  nodes.note("N=" + std::to_string(report.replicas) + " cells=" + std::to_string(report.cells) +
             " m=" + std::to_string(report.refinement) + " seed=" + std::to_string(report.seed));
  for (const auto& r : report.nodes) {
    // only interior nodes are asserted: the discrete increments lose
    // h^2/(T-u) of variance each, which accumulates to about h log J at T
    const bool interior = r.time > 0.0 && r.time < cfg.horizon;
    const bool var_ok = !interior || r.variance.within(r.time, 3.0);
    const bool cov_ok = !interior || r.covariance.within(0.0, 3.0);
    if (!var_ok || !cov_ok) out.exit_code = kExitAssertion;
    nodes.row()
        .cell(r.time)
        .cell(r.variance.value)
        .cell(r.variance.standard_error)
        .cell(r.covariance.value)
        .cell(r.covariance.standard_error)
        .cell(r.quadratic_var.value)
        .cell(r.quadratic_var.standard_error)
        .cell(r.qv_band_fraction)
        .cell(var_ok)
        .cell(cov_ok);
    out.messages.push_back(std::string(var_ok && cov_ok ? "PASS  " : "FAIL  ") +
                           detail::fmt("t %-6g var %.4g (se %.2g)", r.time, r.variance.value, r.variance.standard_error) +
                           detail::fmt("  cov %.3g (se %.2g)", r.covariance.value, r.covariance.standard_error));
  }
  CsvTable recon("beta_reconstruction", {"refinement", "median_max_error"});
  std::vector<double> medians;
  PlotSeries rs{"median max error"};
  for (const auto& r : report.reconstruction) {
    recon.row().cell(r.refinement).cell(r.median_error);
    medians.push_back(r.median_error);
    rs.x.push_back(static_cast<double>(r.refinement));
    rs.y.push_back(r.median_error);
  }
  const bool trend = detail::nonincreasing(medians);
  if (!trend) out.exit_code = kExitAssertion;
  out.messages.push_back(std::string(trend ? "PASS  " : "FAIL  ") + "reconstruction medians " + detail::join(medians));
  CsvTable ks("beta_ks", {"samples", "statistic", "critical_1pct", "below_critical"});
  ks.row().cell(report.ks_samples).cell(report.ks_statistic).cell(report.ks_critical).cell(report.ks_statistic <= report.ks_critical);
  out.messages.push_back(detail::fmt("KS statistic %.4g (1%% critical %.4g), diagnostic", report.ks_statistic, report.ks_critical));
  out.files.emplace_back("beta_reconstruction.svg",
                         loglog_svg("reconstruction error", "refinement m", "median max error", {rs}));
  out.tables.push_back(std::move(nodes));
  out.tables.push_back(std::move(recon));
  out.tables.push_back(std::move(ks));
  return out;
}

inline CommandOutput cmd_mart(const RunConfig& rc, unsigned threads) {
  auto cfg = rc.for_command("mart");
  cfg.threads = threads;
  const auto report = verify_martingale_bound(cfg);
  CommandOutput out;
  CsvTable t("mart", {"epsilon", "r", "threshold", "N", "count", "p_hat", "ci_low", "ci_high", "bound",
                      "reflection_tail", "dominated", "seed"});
  PlotSeries emp{"p_hat (95% CI)"};
  PlotSeries bound{"analytic bound", {}, {}, {}, {}, "#d62728", true, true, true};
  for (const auto& r : report.rows) {
    if (!r.dominated()) out.exit_code = kExitAssertion;
    t.row()
        .cell(report.epsilon)
        .cell(report.r)
        .cell(r.threshold)
        .cell(r.tail.replicas)
        .cell(r.tail.count)
        .cell(r.tail.p_hat)
        .cell(r.tail.ci_low)
        .cell(r.tail.ci_high)
        .cell(r.bound)
        .cell(r.reflection_tail)
        .cell(r.dominated())
        .cell(static_cast<std::size_t>(r.tail.seed));
    out.messages.push_back(std::string(r.dominated() ? "PASS  " : "FAIL  ") +
                           detail::fmt("delta %-6g p_hat %.4g  bound %.4g", r.threshold, r.tail.p_hat, r.bound));
    emp.x.push_back(r.threshold);
    emp.y.push_back(r.tail.p_hat);
    emp.low.push_back(r.tail.ci_low);
    emp.high.push_back(r.tail.ci_high);
    bound.x.push_back(r.threshold);
    bound.y.push_back(r.bound);
  }
  out.files.emplace_back("mart.svg", loglog_svg("martingale sup tail", "delta", "P{sup |S| > delta}", {emp, bound}));
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_supnorm(const RunConfig& rc, unsigned threads) {
  auto cfg = rc.for_command("supnorm");
  cfg.threads = threads;
  const auto report = estimate_sup_normalized(cfg);
  CommandOutput out;
  CsvTable q("supnorm_quantiles", {"probability", "value"});
  for (const auto& [p, v] : report.quantiles) q.row().cell(p).cell(v);
  CsvTable t("supnorm", {"threshold", "N", "count", "p_hat", "ci_low", "ci_high", "seed"});
  for (const auto& r : report.tails) {
    t.row().cell(r.threshold).cell(r.replicas).cell(r.count).cell(r.p_hat).cell(r.ci_low).cell(r.ci_high).cell(
        static_cast<std::size_t>(r.seed));
  }
  if (report.tail_decay) {
    t.note(detail::fmt("log p_hat vs threshold^2: slope %.17g intercept %.17g r_squared %.17g", report.tail_decay->slope,
                       report.tail_decay->intercept, report.tail_decay->r_squared));
    out.messages.push_back(detail::fmt("tail decay slope in threshold^2: %.4g (r^2 %.4g)", report.tail_decay->slope,
                                       report.tail_decay->r_squared));
  }
  out.tables.push_back(std::move(q));
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_bounds(const RunConfig& rc, unsigned /*threads*/) {
  const auto& e = rc.experiment;
  const auto& eps_list = rc.bounds_epsilons.empty() ? e.epsilons : rc.bounds_epsilons;
  if (eps_list.empty()) throw DomainError("bounds needs at least one epsilon");
  if (!(e.threshold > 0.0)) throw DomainError("threshold must be positive");
  CommandOutput out;
  CsvTable t("bounds", {"epsilon", "delta_eps", "n_eps", "q_eps", "eta", "martingale_bound", "levy_bound", "theorem_shape"});
  t.note("delta_eps is the raw schedule value; n_eps = ceil(T/delta_eps); martingale_bound uses r = cap^2 T at the run threshold");
  const double r = e.function.bounded() ? e.function.cap() * e.function.cap() * e.horizon : kNaN;
  for (double eps : eps_list) {
    const double raw = schedule_delta_eps(e.schedule, eps, e.horizon);
    const auto partition = schedule_partition(e.schedule, eps, e.horizon);
    if (!(partition.width() < 1.0) || !(raw < 1.0)) {
      throw DomainError(detail::fmt("delta_eps = %.6g after rounding is not below 1 (eps = %.6g)", partition.width(), eps));
    }
    const double q = q_eps(raw);
    const double eta = eta_condition(e.function, raw, eps, std::pow(eps, e.gamma));
    const double mart = r > 0.0 ? martingale_tail_bound(r, e.threshold) : kNaN;
    const double levy = levy_tail_bound(q, raw, e.horizon);
    const double shape = theorem_bound(e.schedule, eps, TheoremConstants{1.0, e.threshold}, e.horizon);
    t.row().cell(eps).cell(raw).cell(partition.cells()).cell(q).cell(eta).cell(mart).cell(levy).cell(shape);
    out.messages.push_back(detail::fmt("eps %-6g delta_eps %.6g  q %.6g", eps, raw, q) +
                           detail::fmt("  eta %.6g  levy %.4g", eta, levy));
  }
  out.tables.push_back(std::move(t));
  return out;
}

using CommandFn = std::function<CommandOutput(const RunConfig&, unsigned)>;

inline const std::map<std::string, CommandFn>& command_table() {
  static const std::map<std::string, CommandFn> table{
      {"verify", cmd_verify}, {"tails", cmd_tails}, {"levy", cmd_levy},
      {"beta", cmd_beta},     {"mart", cmd_mart},   {"bounds", cmd_bounds},
  };
  return table;
}

/// Every experiment in one output directory, with an overall verdict.
inline CommandOutput cmd_report(const RunConfig& rc, unsigned threads) {
  CommandOutput out;
  CsvTable summary("report", {"command", "exit_code"});
  for (const char* name : {"bounds", "tails", "levy", "beta", "mart", "verify"}) {
    auto part = command_table().at(name)(rc, threads);
    summary.row().cell(name).cell(static_cast<std::size_t>(part.exit_code));
    out.exit_code = std::max(out.exit_code, part.exit_code);
    out.messages.push_back(std::string("[") + name + "]");
    for (auto& m : part.messages) out.messages.push_back("  " + m);
    for (auto& t : part.tables) out.tables.push_back(std::move(t));
    for (auto& f : part.files) out.files.push_back(std::move(f));
  }
  auto sn = cmd_supnorm(rc, threads);
  summary.row().cell("supnorm").cell(static_cast<std::size_t>(sn.exit_code));
  out.messages.push_back("[supnorm]");
  for (auto& m : sn.messages) out.messages.push_back("  " + m);
  for (auto& t : sn.tables) out.tables.push_back(std::move(t));
  out.tables.push_back(std::move(summary));
  return out;
}

/// Loads the config, runs one command, writes its CSV/SVG files and manifest
/// into out_dir, and returns the process exit code.
inline int run_command(const std::string& name, const std::string& config_path, const std::filesystem::path& out_dir,
                       const Overrides& overrides, unsigned threads, std::ostream& log, std::ostream& err) {
  CommandFn fn;
  if (name == "report") {
    fn = cmd_report;
  } else if (auto it = command_table().find(name); it != command_table().end()) {
    fn = it->second;
  } else {
    err << "unknown command '" << name << "'\n";
    return kExitUsage;
  }
  RunManifest manifest;
  manifest.command = name;
  manifest.threads = threads;
  manifest.started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  CommandOutput result;
  RunConfig rc;
  try {
    rc = config_path.empty() ? RunConfig{} : load_config(config_path);
    apply_overrides(rc, overrides);
    result = fn(rc, threads);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid parameter: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedOperation& e) {
    err << "unsupported: " << e.what() << "\n";
    return kExitUsage;
  }
  for (const auto& m : result.messages) log << m << "\n";

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    err << "cannot create output directory '" << out_dir.string() << "': " << ec.message() << "\n";
    return kExitUsage;
  }
  for (const auto& t : result.tables) {
    write_atomically(out_dir / (t.name() + ".csv"), t.text());
    manifest.outputs.push_back(t.name() + ".csv");
  }
  for (const auto& [file, text] : result.files) {
    write_atomically(out_dir / file, text);
    manifest.outputs.push_back(file);
  }
  manifest.config = config_to_json(rc);
  manifest.seed = rc.experiment.seed;
  manifest.exit_code = result.exit_code;
  manifest.finished = std::chrono::system_clock::now();
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string manifest_name = "manifest_" + name + ".json";
  write_atomically(out_dir / manifest_name, manifest.to_json().dump(2) + "\n");
  log << "wrote " << manifest.outputs.size() << " files and " << manifest_name << " to " << out_dir.string() << "\n";
  return result.exit_code;
}

}  // namespace qcov
