#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cocycle/rng.hpp"
#include "cocycle/stats.hpp"

using namespace cocycle;

TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::apply(C{0, 0, 0, 0}, K{0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::apply(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::apply(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Stream, PureFunctionOfLabels) {
  const SeedPath p{42, experiment_id("unit"), 7};
  Stream a(p, 5, 1), b(p, 5, 1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Stream c(p, 6, 1), d(p, 5, 2), e(p.with_trajectory(8), 5, 1);
  Stream f(p, 5, 1);
  const auto first = f.next_u64();
  EXPECT_NE(first, c.next_u64());
  EXPECT_NE(first, d.next_u64());
  EXPECT_NE(first, e.next_u64());
}

TEST(Stream, UniformRangeAndMoments) {
  Stream s(SeedPath{1, 2, 3}, 0);
  stats::RunningMoments m;
  for (int i = 0; i < 200000; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    m.add(u);
  }
  EXPECT_NEAR(m.mean, 0.5, 5 * std::sqrt(1.0 / 12.0 / 200000));
  EXPECT_NEAR(m.variance(), 1.0 / 12.0, 2e-3);
  Stream o(SeedPath{1, 2, 3}, 1);
  for (int i = 0; i < 10000; ++i) {
    const double u = o.uniform_open();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Stream, NormalMoments) {
  Stream s(SeedPath{9, 9, 9}, 0);
  std::vector<double> xs;
  for (int i = 0; i < 200000; ++i) xs.push_back(s.normal());
  const auto m = stats::moments_of(xs);
  EXPECT_NEAR(m.mean, 0.0, 5 * std::sqrt(1.0 / 200000));
  EXPECT_NEAR(m.variance(), 1.0, 0.02);
  double k4 = 0.0;
  for (double x : xs) k4 += x * x * x * x;
  EXPECT_NEAR(k4 / xs.size(), 3.0, 0.1);
}

TEST(Stream, TrajectoriesLookIndependent) {
  // Adjacent trajectory labels must not produce correlated first draws.
  std::vector<double> a, b;
  for (std::uint64_t t = 0; t < 20000; ++t) {
    a.push_back(Stream(SeedPath{5, 1, t}, 1).uniform());
    b.push_back(Stream(SeedPath{5, 1, t + 1}, 1).uniform());
  }
  const auto ma = stats::moments_of(a), mb = stats::moments_of(b);
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma.mean) * (b[i] - mb.mean);
  const double corr = cov / a.size() / std::sqrt(ma.variance() * mb.variance());
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(20000.0));
}

TEST(Mix64, DistinctOutputs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(mix64(i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_NE(experiment_id("a"), experiment_id("b"));
  EXPECT_EQ(experiment_id("simulate"), experiment_id("simulate"));
}
