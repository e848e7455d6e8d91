#include "precise/stats.hpp"

#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "precise/estimators.hpp"

namespace precise {
namespace {

TEST(NormalQuantile, MatchesBoostOracle) {
  const boost::math::normal standard(0.0, 1.0);
  for (double p : {1e-12, 1e-8, 1e-4, 0.001, 0.01, 0.02425, 0.025, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.97575, 0.999,
                   1 - 1e-6, 1 - 1e-10}) {
    EXPECT_NEAR(stats::normal_quantile(p), boost::math::quantile(standard, p), 1e-9) << "p=" << p;
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-9, 1 - 1e-9);
  for (int i = 0; i < 2000; ++i) {
    const double p = u(rng);
    ASSERT_NEAR(stats::normal_quantile(p), boost::math::quantile(standard, p), 1e-9) << "p=" << p;
  }
}

TEST(NormalQuantile, RejectsOutOfRange) {
  EXPECT_THROW(stats::normal_quantile(-0.1), std::invalid_argument);
  EXPECT_THROW(stats::normal_quantile(1.5), std::invalid_argument);
  EXPECT_THROW(stats::two_sided_z(1.0), std::invalid_argument);
}

TEST(ConfidenceInterval, ZeroVarianceIsDegenerate) {
  const auto ci = confidence_interval(0.42, 0.0, 0.95);
  EXPECT_EQ(ci.lower, 0.42);
  EXPECT_EQ(ci.upper, 0.42);
}

TEST(ConfidenceInterval, NinetyFivePercent) {
  const boost::math::normal standard(0.0, 1.0);
  const double z = boost::math::quantile(standard, 0.975);
  const auto ci = confidence_interval(0.5, 0.0001, 0.95);
  EXPECT_NEAR(ci.lower, 0.5 - z * 0.01, 1e-12);
  EXPECT_NEAR(ci.upper, 0.5 + z * 0.01, 1e-12);
  EXPECT_NEAR(ci.lower, 0.4804, 5e-5);
  EXPECT_NEAR(ci.upper, 0.5196, 5e-5);
}

TEST(ConfidenceInterval, OneSigma) {
  const auto ci = confidence_interval(0.0, 1.0, 0.6827);
  EXPECT_NEAR(ci.upper, 1.0, 1e-3);
  EXPECT_NEAR(ci.lower, -1.0, 1e-3);
}

TEST(Moments, MatchNaiveOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(997);
  for (auto& x : xs) x = u(rng);
  EXPECT_NEAR(stats::mean(xs), oracle::naive_mean(xs), 1e-14);
  EXPECT_NEAR(stats::variance(xs), oracle::naive_variance(xs), 1e-14);
}

TEST(Moments, CompensatedSumKeepsSmallTerms) {
  stats::CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1000.0);
}

}  // namespace
}  // namespace precise
