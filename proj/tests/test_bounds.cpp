// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "qcov/bounds.hpp"

using namespace qcov;

// Reference values below were computed independently at 30 significant
// digits and frozen.

TEST(QEps, ReferenceValues) {
  EXPECT_NEAR(q_eps(0.01), 0.429193205257869447927, 1e-15);
  EXPECT_NEAR(q_eps(std::exp(-1.0)), 1.213061319425266847, 1e-15);
  EXPECT_NEAR(q_eps(std::exp(-1.0)), 2.0 * std::exp(-0.5), 1e-15);
}

TEST(QEps, DomainAndShape) {
  EXPECT_THROW((void)q_eps(1.0), DomainError);
  EXPECT_THROW((void)q_eps(0.0), DomainError);
  EXPECT_THROW((void)q_eps(1.5), DomainError);
  EXPECT_LT(q_eps(1.0 - 1e-9), 1e-3);
  double prev = 0.0;
  for (double d = 1e-6; d < std::exp(-1.0); d *= 1.3) {
    EXPECT_GT(q_eps(d), prev);
    prev = q_eps(d);
  }
}

TEST(MartingaleBound, ReferenceAndDomain) {
  EXPECT_NEAR(martingale_tail_bound(1.0, 2.0), 0.107981933026376103901, 1e-15);
  EXPECT_NEAR(martingale_tail_bound(1.0, 2.0), std::sqrt(2.0 / M_PI) * std::exp(-2.0), 1e-16);
  EXPECT_LT(martingale_tail_bound(1.0, 40.0), 1e-300);
  EXPECT_THROW((void)martingale_tail_bound(0.0, 1.0), DomainError);
  EXPECT_THROW((void)martingale_tail_bound(1.0, -1.0), DomainError);
}

TEST(MartingaleBound, DependsOnRatioOnly) {
  // sqrt(8/pi) sqrt(r/delta^2) exp(-delta^2/(2r)) is a function of delta^2/r
  for (double c : {0.3, 2.0, 7.0}) {
    for (double delta : {0.5, 1.0, 3.0}) {
      EXPECT_NEAR(martingale_tail_bound(c * c * 1.7, c * delta), martingale_tail_bound(1.7, delta), 1e-14);
    }
  }
}

TEST(MartingaleBound, Monotone) {
  EXPECT_GT(martingale_tail_bound(1.0, 1.0), martingale_tail_bound(1.0, 1.5));
  EXPECT_LT(martingale_tail_bound(1.0, 1.0), martingale_tail_bound(2.0, 1.0));
}

TEST(LevyBound, ReferenceValue) {
  EXPECT_NEAR(levy_tail_bound(0.3, 0.01, 1.0), 0.590913121591734290, 1e-14);
  EXPECT_LT(levy_tail_bound(50.0, 0.01, 1.0), 1e-300);
  EXPECT_THROW((void)levy_tail_bound(0.3, 1.0, 1.0), DomainError);
  EXPECT_THROW((void)levy_tail_bound(0.0, 0.1, 1.0), DomainError);
  EXPECT_THROW((void)levy_tail_bound(0.3, 0.1, 0.0), DomainError);
}

TEST(LevyBound, LinearInDeltaEpsAtQ) {
  // At delta = q_eps the bound equals T sqrt(2/pi) delta_eps / sqrt(|log delta_eps|),
  // so bound/delta_eps stays bounded on [1e-4, 1e-1].
  for (double d = 1e-4; d <= 0.1; d *= 1.5) {
    const double ratio = levy_tail_bound(q_eps(d), d, 1.0) / d;
    EXPECT_NEAR(ratio, std::sqrt(2.0 / M_PI) / std::sqrt(-std::log(d)), 1e-12);
    EXPECT_LT(ratio, 1.0);
  }
}

TEST(Schedule, Construction) {
  EXPECT_THROW((void)RateSchedule::holder(0.5, 0.5, 0.25), DomainError);
  EXPECT_THROW((void)RateSchedule::holder(0.5, 0.4, 0.4), DomainError);
  EXPECT_THROW((void)RateSchedule::holder(1.0, 0.4, 0.2), DomainError);
  EXPECT_THROW((void)RateSchedule::lipschitz(1.0, 0.2), DomainError);
  EXPECT_THROW((void)RateSchedule::lipschitz(0.5, 0.6), DomainError);
  EXPECT_THROW((void)RateSchedule::explicit_table({}, 0.2), DomainError);
  EXPECT_THROW((void)RateSchedule::explicit_table({{0.1, 0}}, 0.2), DomainError);
  EXPECT_DOUBLE_EQ(RateSchedule::holder(0.5, 0.4, 0.25).holder_rate(), 0.4);
}

TEST(Schedule, ReferenceValues) {
  const auto h = RateSchedule::holder(0.5, 0.4, 0.25);
  EXPECT_NEAR(schedule_delta_eps(h, 0.1), 0.398107170553497250770, 1e-15);
  const auto l = RateSchedule::lipschitz(0.5, 0.25);
  EXPECT_NEAR(schedule_delta_eps(l, 0.3), 0.161098087826626605871, 1e-15);
  EXPECT_THROW((void)schedule_delta_eps(h, 1.0), DomainError);
  EXPECT_THROW((void)schedule_delta_eps(h, 0.0), DomainError);
}

TEST(Schedule, PartitionRoundsUp) {
  const auto h = RateSchedule::holder(0.5, 0.4, 0.25);
  for (double eps = 0.9; eps > 1e-3; eps *= 0.8) {
    for (double T : {0.5, 1.0, 3.0}) {
      const double raw = schedule_delta_eps(h, eps, T);
      const auto p = schedule_partition(h, eps, T);
      EXPECT_LE(p.width(), raw);
      if (p.cells() > 1) {
        EXPECT_GT(T / static_cast<double>(p.cells() - 1), raw);
      }
      EXPECT_LE(raw - p.width(), raw * raw / T + 1e-15);
    }
  }
  EXPECT_EQ(schedule_partition(h, 0.1, 1.0).cells(), 3u);
}

TEST(Schedule, HolderIncreasingInEps) {
  const auto h = RateSchedule::holder(0.6, 0.3, 0.1);
  double prev = 0.0;
  for (double eps = 0.01; eps < 1.0; eps += 0.01) {
    EXPECT_GT(schedule_delta_eps(h, eps), prev);
    prev = schedule_delta_eps(h, eps);
  }
}

TEST(Schedule, ExplicitTable) {
  const auto s = RateSchedule::explicit_table({{0.4, 2}, {0.2, 8}}, 0.25);
  EXPECT_EQ(schedule_partition(s, 0.2, 1.0).cells(), 8u);
  EXPECT_DOUBLE_EQ(schedule_delta_eps(s, 0.4, 2.0), 1.0);
  EXPECT_THROW((void)schedule_partition(s, 0.3, 1.0), DomainError);
  EXPECT_EQ(s.spec(), "explicit:0.20000000000000001=8;0.40000000000000002=2");
}

TEST(Eta, ReferenceValue) {
  const auto f = TestFunction::holder_abs_pow(0.5, 1.0);
  EXPECT_NEAR(eta_condition(f, 0.01, 0.1, 0.1), 22.2289661977463974434, 1e-11);
  EXPECT_EQ(eta_condition(TestFunction::constant(1.0), 0.01, 0.1, 0.1), 0.0);
  EXPECT_THROW((void)eta_condition(f, 0.01, 0.1, 0.0), DomainError);
}

TEST(Eta, DecreasingInGammaEps) {
  const auto f = TestFunction::holder_abs_pow(0.5, 1.0);
  double prev = INFINITY;
  for (double g = 0.01; g < 1.0; g += 0.05) {
    EXPECT_LT(eta_condition(f, 0.05, 0.2, g), prev);
    prev = eta_condition(f, 0.05, 0.2, g);
  }
}

TEST(Eta, ScheduleOverloadUsesRoundedWidth) {
  const auto f = TestFunction::holder_abs_pow(0.5, 1.0);
  const auto s = RateSchedule::holder(0.5, 0.4, 0.25);
  const auto p = schedule_partition(s, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(eta_condition(f, s, 0.1, 1.0), eta_condition(f, p.width(), 0.1, std::pow(0.1, 0.25)));
}

TEST(TheoremBound, Shapes) {
  const auto h = RateSchedule::holder(0.5, 0.4, 0.25);
  EXPECT_NEAR(theorem_bound(h, 0.1, {2.0, 0.5}), 2.0 * std::pow(0.1, 0.4), 1e-15);
  const double slope = std::log(theorem_bound(h, 0.05, {}) / theorem_bound(h, 0.4, {})) / std::log(0.05 / 0.4);
  EXPECT_NEAR(slope, 0.4, 1e-12);
  const auto l = RateSchedule::lipschitz(0.5, 0.25);
  EXPECT_NEAR(theorem_bound(l, 0.3, {}), std::exp(-std::pow(0.3, -0.5)), 1e-16);
  EXPECT_EQ(theorem_bound(h, 0.1, {0.0, 0.5}), 0.0);
}
