// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion with its runtime and the
// numbers behind the verdict. Exits 1 if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <variant>

#include "qcov/commands.hpp"

using namespace qcov;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
  double limit_seconds = 0.0;  // 0: no runtime requirement
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) { return detail::fmt(format, a, b, c); }

ExperimentConfig base(unsigned threads) {
  ExperimentConfig cfg;
  cfg.threads = threads;
  return cfg;
}

Verdict identities(unsigned threads, bool reordering) {
  auto cfg = base(threads);
  cfg.refinement = 64;
  cfg.consistency.cells = {8, 64, 512};
  cfg.consistency.identity_paths = 1000;
  const auto ids = identity_panel(cfg, 1e-12);
  const double worst = reordering ? ids.eq10 : ids.eq11;
  return {worst <= 1e-12, fmt("max relative error %.3g over 1000 paths x n in {8,64,512}, m=64", worst), 30.0};
}

Verdict smooth(unsigned threads) {
  auto cfg = base(threads);
  const auto medians = smooth_reference_medians(cfg, SmoothOptions{});
  return {detail::strictly_decreasing(medians), "medians " + detail::join(medians), 60.0};
}

Verdict beta(unsigned threads) {
  auto cfg = base(threads);
  cfg.replicas = 10000;
  cfg.refinement = 64;
  cfg.beta.cells = 4;
  cfg.beta.refinements = {16, 32, 64};
  const auto report = beta_diagnostics(cfg);
  bool ok = true;
  std::string text;
  for (const auto& r : report.nodes) {
    if (!(r.time > 0.0 && r.time < cfg.horizon)) continue;
    const bool v = r.variance.within(r.time, 3.0);
    const bool c = r.covariance.within(0.0, 3.0);
    ok = ok && v && c;
    text += fmt("t=%.3g var %.4f ", r.time, r.variance.value) + fmt("cov %+.4f; ", r.covariance.value);
  }
  std::vector<double> medians;
  for (const auto& r : report.reconstruction) medians.push_back(r.median_error);
  ok = ok && detail::nonincreasing(medians);
  return {ok, text + "reconstruction " + detail::join(medians), 120.0};
}

Verdict levy(unsigned threads) {
  auto cfg = base(threads);
  cfg.replicas = 10000;
  cfg.levy.delta_eps = {0.1, 0.03, 0.01};
  bool ok = true;
  std::string text;
  for (const auto& r : estimate_levy_tail(cfg)) {
    ok = ok && r.p_hat <= r.bound + 3.0 * r.standard_error();
    text += fmt("delta %.3g: p %.4g <= %.4g; ", r.delta_eps, r.p_hat, r.bound);
  }
  return {ok, text, 120.0};
}

Verdict martingale(unsigned threads) {
  auto cfg = base(threads);
  cfg.replicas = 10000;
  const auto report = verify_martingale_bound(cfg);
  std::string text = fmt("cap %.3g, r %.3g; ", cfg.function.cap(), report.r);
  for (const auto& r : report.rows) text += fmt("delta %.3g: p %.4g <= %.4g; ", r.threshold, r.tail.p_hat, r.bound);
  return {report.all_dominated() && report.rows.size() == 3 && report.r == cfg.horizon, text};
}

Verdict tails(unsigned threads) {
  auto cfg = base(threads);
  cfg.replicas = 2000;
  const auto rows = estimate_sup_tail(cfg);
  const auto fit = fit_rate(rows);
  std::string text;
  for (const auto& r : rows) text += fmt("eps %.3g: p %.4g; ", r.epsilon, r.p_hat);
  const auto* f = std::get_if<RateFit>(&fit);
  if (!f) return {false, text + "rate fit: insufficient data", 300.0};
  const bool ok = nonincreasing_up_to_ci(rows) && f->slope > 0.0;
  return {ok, text + fmt("slope %.3g (reference %.3g)", f->slope, cfg.schedule.holder_rate()), 300.0};
}

Verdict gamma(unsigned threads) {
  auto cfg = base(threads);
  cfg.refinement = 64;
  const auto ineq = inequality_panel(cfg, 8, 10000);
  std::size_t violations = 0;
  for (const auto& f : ineq.failures) violations += f.check == "gamma_bound";
  return {violations == 0 && ineq.gamma_ratio <= 1.0,
          fmt("max Gamma(T)/(T osc^2) %.4f over 10000 paths, %g violations", ineq.gamma_ratio, static_cast<double>(violations))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict reproducibility(const std::string& config) {
  const auto root = fs::temp_directory_path() / "qcov_acceptance_repro";
  fs::remove_all(root);
  std::ostringstream sink;
  std::size_t compared = 0;
  for (const char* cmd : {"verify", "tails", "levy", "beta", "mart", "bounds"}) {
    std::vector<std::pair<fs::path, int>> runs;
    for (unsigned threads : {1u, 2u, 8u}) {
      const auto dir = root / (std::string(cmd) + "_t" + std::to_string(threads));
      runs.emplace_back(dir, run_command(cmd, config, dir, {}, threads, sink, sink));
      const auto manifest = dir / ("manifest_" + std::string(cmd) + ".json");
      const auto again = root / (std::string(cmd) + "_rerun_t" + std::to_string(threads));
      runs.emplace_back(again, run_command(cmd, manifest.string(), again, {}, threads, sink, sink));
    }
    for (const auto& [dir, code] : runs) {
      if (code == kExitUsage) return {false, std::string(cmd) + " failed to run: " + sink.str()};
      for (const auto& entry : fs::directory_iterator(runs.front().first)) {
        if (entry.path().extension() != ".csv") continue;
        const auto name = entry.path().filename();
        if (slurp(dir / name) != slurp(entry.path())) {
          return {false, std::string(cmd) + ": " + name.string() + " differs in " + dir.filename().string()};
        }
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(compared) + " CSV files identical across threads 1/2/8 and manifest reruns"};
}

}  // namespace

int main(int argc, char** argv) {
  const unsigned threads = default_threads();
  const std::string repro_config = argc > 1 ? argv[1] : "";
  if (repro_config.empty()) {
    std::fprintf(stderr, "usage: qcov_acceptance <config for the reproducibility run>\n");
    return kExitUsage;
  }
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"1 identity (Jhat - J) = sum Df DW", [&] { return identities(threads, false); }},
      {"2 backward reordering identity", [&] { return identities(threads, true); }},
      {"3 smooth classical formula", [&] { return smooth(threads); }},
      {"4 beta diagnostics", [&] { return beta(threads); }},
      {"5 modulus tail bound", [&] { return levy(threads); }},
      {"6 martingale domination", [&] { return martingale(threads); }},
      {"7 sup-tail trend", [&] { return tails(threads); }},
      {"8 Gamma bound per path", [&] { return gamma(threads); }},
      {"9 reproducibility", [&] { return reproducibility(repro_config); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = v.limit_seconds == 0.0 || seconds < v.limit_seconds;
    const bool ok = v.passed && in_time;
    failed += !ok;
    std::string timing = fmt("%.1fs", seconds);
    if (v.limit_seconds > 0.0) timing += fmt(" (limit %.0fs)", v.limit_seconds);
    std::printf("%s  %-36s %-20s %s\n", ok ? "PASS" : "FAIL", name.c_str(), timing.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed (threads=%u)\n", static_cast<int>(criteria.size()) - failed, criteria.size(), threads);
  return failed == 0 ? kExitPass : kExitAssertion;
}
