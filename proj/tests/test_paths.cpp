// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "qcov/grid.hpp"
#include "qcov/paths.hpp"
#include "qcov/random.hpp"
#include "qcov/stats.hpp"
#include "qcov/summation.hpp"

using namespace qcov;

TEST(Summation, RecoversCancelledSmallTerms) {
  CompensatedSum acc;
  acc.add(1e20);
  for (int i = 0; i < 1000; ++i) acc.add(1.0);
  acc.add(-1e20);
  EXPECT_EQ(acc.as_double(), 1000.0);
}

TEST(Summation, TotalOfSpan) {
  // exact sum of the four doubles (not of the decimals) is 2^-55
  const std::vector<double> xs{0.1, 0.2, 0.3, -0.6};
  EXPECT_EQ(compensated_total(xs), std::ldexp(1.0, -55));
}

TEST(Random, StreamKeysDifferAcrossSeedsAndReplicas) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (std::uint64_t r = 0; r < 50; ++r) keys.insert(stream_key(s, r));
  }
  EXPECT_EQ(keys.size(), 1000u);
}

TEST(Random, UniformsStayInOpenInterval) {
  CounterStream s(stream_key(1, 2));
  for (int i = 0; i < 100000; ++i) {
    const double u = s.next_uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(s.counter(), 100000u);
}

TEST(Random, GaussianMomentsAndKs) {
  GaussianStream g(stream_key(7, 0));
  std::vector<double> xs(20000);
  for (auto& x : xs) x = g.next();
  const auto m = mean_estimate(xs);
  EXPECT_TRUE(m.within(0.0, 4.0)) << m.value;
  const auto v = variance_estimate(xs);
  EXPECT_TRUE(v.within(1.0, 4.0)) << v.value;
  EXPECT_LT(ks_statistic_normal(xs), ks_critical(xs.size(), 0.001));
}

TEST(Grid, PartitionPinsLastNode) {
  const UniformPartition p(0.7, 3);
  EXPECT_EQ(p.node(0), 0.0);
  EXPECT_EQ(p.node(3), 0.7);
  EXPECT_DOUBLE_EQ(p.width(), 0.7 / 3);
  for (std::size_t i = 1; i <= 3; ++i) EXPECT_GT(p.node(i), p.node(i - 1));
  EXPECT_EQ(p.backward_node(0), 0.0);
  EXPECT_EQ(p.backward_node(3), 0.7);
}

TEST(Grid, IndexOfT) {
  const UniformPartition p(1.0, 4);
  EXPECT_EQ(p.index_of(0.0), 0u);
  EXPECT_EQ(p.index_of(0.25), 1u);
  EXPECT_EQ(p.index_of(0.3), 2u);
  EXPECT_EQ(p.index_of(1.0), 4u);
  EXPECT_THROW((void)p.index_of(-0.1), std::out_of_range);
  EXPECT_THROW((void)p.index_of(1.01), std::out_of_range);
  const UniformPartition q(1.0, 10);
  for (std::size_t i = 0; i <= 10; ++i) EXPECT_EQ(q.index_of(q.node(i)), i);
}

TEST(Grid, RejectsDegenerateInput) {
  EXPECT_THROW(UniformPartition(0.0, 3), std::invalid_argument);
  EXPECT_THROW(UniformPartition(1.0, 0), std::invalid_argument);
  EXPECT_THROW(FineGrid(1.0, 2, 0), std::invalid_argument);
}

TEST(Grid, FineGridNesting) {
  const FineGrid g(2.0, 5, 8);
  EXPECT_EQ(g.steps(), 40u);
  EXPECT_EQ(g.node_count(), 41u);
  EXPECT_DOUBLE_EQ(g.step(), 0.05);
  EXPECT_EQ(g.time(40), 2.0);
  for (std::size_t i = 0; i <= 5; ++i) EXPECT_DOUBLE_EQ(g.time(g.coarse_index(i)), g.coarse().node(i));
}

TEST(Paths, SingleDrawIsDeterministic) {
  const FineGrid g(1.0, 1, 1);
  const auto a = sample_brownian(g, 42, 0);
  const auto b = sample_brownian(g, 42, 0);
  EXPECT_EQ(a.values().size(), 2u);
  EXPECT_EQ(a[0], 0.0);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_NE(a[1], sample_brownian(g, 42, 1)[1]);
}

TEST(Paths, StartsAtZeroAndRegenerates) {
  const FineGrid g(1.5, 6, 16);
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto p = sample_brownian(g, 99, r);
    EXPECT_EQ(p[0], 0.0);
    ASSERT_TRUE(p.provenance());
    const auto again = regenerate(g, *p.provenance());
    EXPECT_TRUE(std::equal(p.values().begin(), p.values().end(), again.values().begin()));
  }
}

TEST(Paths, ValuesDependOnlyOnFineStepCount) {
  const auto a = sample_brownian(FineGrid(1.0, 4, 16), 5, 3);
  const auto b = sample_brownian(FineGrid(1.0, 16, 4), 5, 3);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  const auto c = a.repartition(16);
  EXPECT_EQ(c.grid(), b.grid());
}

TEST(Paths, SubsampleRecordsStride) {
  const FineGrid fine(1.0, 4, 16);
  const auto p = sample_brownian(fine, 11, 2);
  const auto s = p.subsample(4);
  EXPECT_EQ(s.grid().refinement(), 4u);
  EXPECT_EQ(s.provenance()->stride, 4u);
  for (std::size_t j = 0; j < s.values().size(); ++j) EXPECT_EQ(s[j], p[4 * j]);
  const auto back = regenerate(s.grid(), *s.provenance());
  EXPECT_TRUE(std::equal(s.values().begin(), s.values().end(), back.values().begin()));
  EXPECT_THROW((void)p.subsample(3), std::invalid_argument);
  EXPECT_THROW((void)p.repartition(5), std::invalid_argument);
}

TEST(Paths, FromValuesValidates) {
  const FineGrid g(1.0, 2, 1);
  EXPECT_THROW((void)SamplePath::from_values(g, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW((void)SamplePath::from_values(g, {0.1, 1.0, 2.0}), std::invalid_argument);
  EXPECT_FALSE(SamplePath::from_values(g, {0.0, 1.0, 2.0}).provenance());
}

TEST(Paths, TerminalVarianceMatchesHorizon) {
  const FineGrid g(1.0, 1, 4);
  std::vector<double> wT(100000);
  for (std::size_t k = 0; k < wT.size(); ++k) wT[k] = sample_brownian(g, 2024, k).terminal();
  const auto v = variance_estimate(wT);
  EXPECT_TRUE(v.within(1.0, 3.0)) << v.value << " se " << v.standard_error;
  EXPECT_TRUE(mean_estimate(wT).within(0.0, 3.0));
}

TEST(Paths, IncrementsHaveVarianceH) {
  const FineGrid g(2.0, 4, 32);
  std::vector<double> inc;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto p = sample_brownian(g, 8, r);
    for (std::size_t j = 1; j < p.values().size(); ++j) inc.push_back((p[j] - p[j - 1]) / std::sqrt(g.step()));
  }
  EXPECT_TRUE(variance_estimate(inc).within(1.0, 3.0));
  EXPECT_LT(ks_statistic_normal(inc), ks_critical(inc.size(), 0.01));
}

TEST(Reversal, WorkedExamples) {
  const std::vector<double> x{0.0, 1.0, -0.5};
  const auto bar = time_reverse_bar(x);
  EXPECT_EQ(bar, (std::vector<double>{0.0, 1.5, 0.5}));
  const auto hat = time_reverse_hat(x);
  EXPECT_EQ(hat, (std::vector<double>{-0.5, 1.0, 0.0}));
  const std::vector<double> zero(5, 0.0);
  EXPECT_EQ(time_reverse_bar(zero), zero);
}

TEST(Reversal, Involutions) {
  const auto p = sample_brownian(FineGrid(1.0, 8, 8), 3, 1);
  const auto bb = time_reverse_bar(time_reverse_bar(p));
  const auto hh = time_reverse_hat(time_reverse_hat(p));
  for (std::size_t j = 0; j < bb.size(); ++j) {
    // bar subtracts X(T) twice, so it is exact only up to rounding
    EXPECT_NEAR(bb[j], p[j], 1e-15);
    EXPECT_EQ(hh[j], p[j]);
  }
}

TEST(Reversal, HatOfBarVersusBarOfHat) {
  // hat(bar X)(t) = X(t) - X(T); bar(hat X)(t) = X(t) - X(0) = X(t)
  const auto p = sample_brownian(FineGrid(1.0, 4, 16), 17, 0);
  const auto hb = time_reverse_hat(time_reverse_bar(p));
  const auto bh = time_reverse_bar(time_reverse_hat(p));
  for (std::size_t j = 0; j < hb.size(); ++j) {
    EXPECT_NEAR(hb[j], p[j] - p.terminal(), 1e-15);
    EXPECT_NEAR(bh[j], p[j], 1e-15);
    EXPECT_NEAR(hb[j] - bh[j], -p.terminal(), 1e-15);
  }
}

TEST(Beta, ZeroPathGivesZero) {
  const FineGrid g(1.0, 4, 4);
  const auto z = SamplePath::from_values(g, std::vector<double>(g.node_count(), 0.0));
  for (double b : beta_from_path(z)) EXPECT_EQ(b, 0.0);
}

TEST(Beta, RejectsSingleCell) {
  const FineGrid g(1.0, 1, 1);
  EXPECT_THROW((void)beta_from_path(sample_brownian(g, 1, 1)), std::invalid_argument);
}

TEST(Beta, LastIncrementVanishes) {
  // dbeta on the last cell is What(T) - What(T-h) + h What(T-h)/h = 0.
  const auto p = sample_brownian(FineGrid(1.0, 4, 16), 5, 5);
  const auto b = beta_from_path(p);
  EXPECT_NEAR(b[b.size() - 1] - b[b.size() - 2], 0.0, 1e-15);
}

TEST(Beta, ReconstructionEndpoints) {
  const auto p = sample_brownian(FineGrid(1.0, 4, 16), 21, 4);
  const auto b = beta_from_path(p);
  const auto w = reconstruct_hat_w(b, p.terminal(), p.grid());
  EXPECT_EQ(w.front(), p.terminal());
  EXPECT_EQ(w.back(), 0.0);
  EXPECT_THROW((void)reconstruct_hat_w(std::vector<double>(3, 0.0), 0.0, p.grid()), std::invalid_argument);
}

TEST(Beta, ReconstructionImprovesUnderRefinement) {
  const FineGrid finest(1.0, 4, 64);
  std::vector<double> coarse_err, fine_err;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto p = sample_brownian(finest, 77, r);
    auto err = [&](const SamplePath& q) {
      const auto b = beta_from_path(q);
      const auto w = reconstruct_hat_w(b, q.terminal(), q.grid());
      const auto hat = time_reverse_hat(q);
      double worst = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) worst = std::max(worst, std::fabs(w[j] - hat[j]));
      return worst;
    };
    coarse_err.push_back(err(p.subsample(2)));
    fine_err.push_back(err(p));
  }
  EXPECT_LT(median(fine_err) / median(coarse_err), 1.0);
}

TEST(Beta, QuadraticVariationBand) {
  // Pointwise in t: at each fine node, 99% of paths keep sum (Delta beta)^2
  // within 5 sqrt(2 h t) of t. Near t = h the sum is chi-square with few
  // degrees of freedom and misses the band on about 0.5% of paths.
  const FineGrid g(1.0, 4, 64);
  const double h = g.step();
  constexpr std::size_t paths = 2000;
  std::vector<std::size_t> inside(g.steps(), 0);
  for (std::uint64_t r = 0; r < paths; ++r) {
    const auto b = beta_from_path(sample_brownian(g, 31, r));
    CompensatedSum qv;
    for (std::size_t j = 0; j < g.steps(); ++j) {
      const double d = b[j + 1] - b[j];
      qv.add(static_cast<long double>(d) * d);
      const double t = g.time(j + 1);
      inside[j] += std::fabs(qv.as_double() - t) <= 5.0 * std::sqrt(2.0 * h * t) ? 1 : 0;
    }
  }
  for (std::size_t j = 0; j < g.steps(); ++j) {
    EXPECT_GE(static_cast<double>(inside[j]) / paths, 0.99) << "node " << j + 1;
  }
}

TEST(Levy, WorkedExamples) {
  const auto p = SamplePath::from_values(FineGrid(1.0, 2, 2), {0.0, 0.5, 1.0, 0.2, 0.0});
  EXPECT_DOUBLE_EQ(levy_modulus(p), 1.0);
  const auto flat = SamplePath::from_values(FineGrid(1.0, 2, 2), std::vector<double>(5, 0.0));
  EXPECT_EQ(levy_modulus(flat), 0.0);
  const auto ramp = SamplePath::from_values(FineGrid(1.0, 3, 1), {0.0, 1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(levy_modulus(ramp), 1.0);
}

TEST(SupNormalized, SingleNodeIsNormalizedTerminal) {
  const auto p = sample_brownian(FineGrid(2.0, 1, 1), 4, 4);
  EXPECT_DOUBLE_EQ(sup_normalized(p), std::fabs(p.terminal()) / std::sqrt(2.0));
  const auto flat = SamplePath::from_values(FineGrid(1.0, 2, 2), std::vector<double>(5, 0.0));
  EXPECT_EQ(sup_normalized(flat), 0.0);
}
