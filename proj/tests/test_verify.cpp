// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "qcov/verify.hpp"

using namespace qcov;

namespace {

ExperimentConfig small() {
  ExperimentConfig cfg;
  cfg.refinement = 16;
  cfg.consistency.cells = {4, 16, 64};
  cfg.consistency.identity_paths = 40;
  cfg.consistency.panel = 60;
  cfg.beta.panel = 40;
  cfg.beta.refinements = {4, 8, 16};
  return cfg;
}

const CheckResult& find(const ConsistencyReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return c;
  }
  throw std::runtime_error("missing check " + name);
}

}  // namespace

TEST(Helpers, Monotonicity) {
  EXPECT_TRUE(detail::strictly_decreasing({3.0, 2.0, 1.0}));
  EXPECT_FALSE(detail::strictly_decreasing({3.0, 3.0, 1.0}));
  EXPECT_TRUE(detail::nonincreasing({3.0, 3.0, 1.0}));
  EXPECT_FALSE(detail::nonincreasing({1.0, 2.0}));
  EXPECT_EQ(detail::join({1.0, 0.5}), "1 > 0.5");
}

TEST(Helpers, WorstNodeGap) {
  const std::vector<double> a{0.0, 1.0, 2.0};
  const std::vector<double> b{0.0, 1.0, 2.5};
  const auto [gap, node] = detail::worst_node_gap(a, b);
  EXPECT_GT(gap, 0.0);
  EXPECT_EQ(node, 2u);
}

TEST(Identities, HoldToRounding) {
  const auto ids = identity_panel(small(), 1e-12);
  EXPECT_LE(ids.eq11, 1e-12);
  EXPECT_LE(ids.eq10, 1e-12);
  EXPECT_LE(ids.coarse_m1, 1e-12);
  EXPECT_TRUE(ids.failures.empty());
}

TEST(Inequalities, RatiosBelowOne) {
  const auto ineq = inequality_panel(small(), 4, 200);
  EXPECT_LE(ineq.gamma_ratio, 1.0);
  EXPECT_LE(ineq.drift_ratio, 1.0);
  EXPECT_GT(ineq.gamma_ratio, 0.0);
  EXPECT_TRUE(ineq.failures.empty());
}

TEST(Refinement, MediansShrink) {
  const auto ref = refinement_panel(small());
  ASSERT_EQ(ref.cells.size(), 3u);
  EXPECT_TRUE(detail::strictly_decreasing(ref.l_vs_ito)) << detail::join(ref.l_vs_ito);
  EXPECT_TRUE(detail::strictly_decreasing(ref.s_vs_j)) << detail::join(ref.s_vs_j);
  EXPECT_TRUE(detail::strictly_decreasing(ref.l_vs_rep)) << detail::join(ref.l_vs_rep);
}

TEST(Refinement, RejectsCellCountsThatDoNotDivide) {
  auto cfg = small();
  cfg.consistency.cells = {3, 16};
  EXPECT_THROW((void)refinement_panel(cfg), DomainError);
}

TEST(Suite, SmallConfigPasses) {
  const auto report = run_consistency(small());
  for (const auto& c : report.checks) EXPECT_TRUE(!c.asserted || c.passed) << c.name << " " << c.detail;
  EXPECT_TRUE(report.passed());
  EXPECT_FALSE(find(report, "mhat_two_routes").asserted);
}

TEST(Suite, ZeroToleranceReportsLocatedFailures) {
  auto cfg = small();
  cfg.consistency.tolerance = 0.0;
  const auto report = run_consistency(cfg);
  EXPECT_FALSE(report.passed());
  EXPECT_FALSE(find(report, "eq11_identity").passed);
  ASSERT_FALSE(report.failures.empty());
  const auto& f = report.failures.front();
  EXPECT_NE(f.seed, 0u);
  EXPECT_GT(f.cells, 0u);
  EXPECT_GT(f.value, 0.0);
}

TEST(Suite, TrackedChecksDoNotFailTheReport) {
  ConsistencyReport r;
  r.checks.push_back({"a", true, true, 0.0, 0.0, ""});
  r.checks.push_back({"b", false, false, 1.0, 0.0, ""});
  EXPECT_TRUE(r.passed());
  r.checks.push_back({"c", false, true, 1.0, 0.0, ""});
  EXPECT_FALSE(r.passed());
}
