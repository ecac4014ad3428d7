#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <boost/math/distributions/poisson.hpp>

#include "mcfisher/random.hpp"

using namespace mcfisher;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(DeriveSeed, DistinctTagsGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 1000; ++tag) seen.insert(derive_seed(42, tag));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  EXPECT_NE(derive_seed(42, 7), derive_seed(43, 7));
}

TEST(CounterRng, UniformIsOpenAndCentred) {
  const CounterRng rng(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(3, static_cast<std::uint64_t>(i));
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_LT(std::abs(sum / n - 0.5), 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(CounterRng, NormalMoments) {
  const CounterRng rng(2);
  const int n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(0, static_cast<std::uint64_t>(i));
    s1 += z;
    s2 += z * z;
  }
  EXPECT_LT(std::abs(s1 / n), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(s2 / n - 1.0), 5.0 * std::sqrt(2.0 / n));
}

TEST(CounterRng, BelowStaysInRange) {
  const CounterRng rng(3);
  std::vector<int> hits(7, 0);
  for (std::uint64_t i = 0; i < 70000; ++i) ++hits[rng.below(7, 1, i)];
  for (int h : hits) EXPECT_NEAR(h, 10000, 500);
}

TEST(PoissonSampler, InverseCdfMatchesBoost) {
  for (double rate : {0.3, 2.0, 29.5, 30.0, 250.0, 4000.0}) {
    const boost::math::poisson_distribution<double> dist(rate);
    const PoissonSampler sample(rate);
    for (double u : {1e-9, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-9}) {
      const std::uint64_t k = sample(u);
      EXPECT_GE(boost::math::cdf(dist, static_cast<double>(k)), u * (1.0 - 1e-12)) << rate << " " << u;
      if (k > 0) EXPECT_LT(boost::math::cdf(dist, static_cast<double>(k - 1)), u * (1.0 + 1e-12)) << rate << " " << u;
    }
  }
  EXPECT_EQ(PoissonSampler(0.0)(0.5), 0u);
}

TEST(PoissonSampler, MeanAndVariance) {
  const CounterRng rng(4);
  for (double rate : {1.0, 45.0}) {
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<double>(rng.poisson(rate, 0, static_cast<std::uint64_t>(i)));
      s1 += k;
      s2 += k * k;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    EXPECT_LT(std::abs(mean - rate), 5.0 * std::sqrt(rate / n));
    EXPECT_NEAR(var / rate, 1.0, 0.03);
  }
}
