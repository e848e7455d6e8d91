#include "precise/metric.hpp"

#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace precise {
namespace {

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(k);
  for (auto& v : p) v = u(rng);
  return p;
}

TEST(PrecisionAtK, Examples) {
  EXPECT_EQ(precision_at_k({1, 1, 1, 1}), 1.0);
  EXPECT_EQ(precision_at_k({0, 0, 0, 0}), 0.0);
  EXPECT_EQ(precision_at_k({1, 0, 1, 0}), 0.5);
}

TEST(BinaryVector, RejectsNonBinaryEntries) { EXPECT_THROW((BinaryVector{1, 2}), std::invalid_argument); }

TEST(VectorProbability, Examples) {
  EXPECT_EQ(vector_probability(std::vector<double>{1, 1}, {1, 1}), 1.0);
  for (std::uint64_t m = 0; m < 4; ++m) {
    EXPECT_EQ(vector_probability(std::vector<double>{0.5, 0.5}, BinaryVector::from_mask(m, 2)), 0.25);
  }
  EXPECT_NEAR(vector_probability(std::vector<double>{0.8, 0.3}, {1, 0}), 0.8 * (1 - 0.3), 1e-15);
}

TEST(VectorProbability, Errors) {
  EXPECT_THROW(vector_probability(std::vector<double>{0.5}, {1, 0}), std::invalid_argument);
  EXPECT_THROW(vector_probability(std::vector<double>{1.5, 0.2}, {1, 0}), std::invalid_argument);
}

TEST(ExpectedMetricEnumerate, Examples) {
  const auto prec = precision_at_k_metric();
  EXPECT_NEAR(expected_metric_enumerate(prec, std::vector<double>{1, 0, 1, 0}), 0.5, 1e-15);
  EXPECT_NEAR(expected_metric_enumerate(prec, std::vector<double>{0.5, 0.5, 0.5, 0.5}), 0.5, 1e-15);
  // all four outcomes of two docs: only (1,1) scores 1
  EXPECT_NEAR(expected_metric_enumerate(all_relevant_metric(), std::vector<double>{0.8, 0.3}), 0.24, 1e-15);
}

TEST(ExpectedMetricEnumerate, GuardsKMax) {
  const std::vector<double> p(kMaxEnumerationK + 1, 0.5);
  EXPECT_THROW(expected_metric_enumerate(precision_at_k_metric(), p), PreconditionError);
  EXPECT_NO_THROW(expected_metric_linear(p));
}

TEST(ExpectedMetricLinear, Examples) {
  EXPECT_EQ(expected_metric_linear(std::vector<double>{1, 1, 1, 1}), 1.0);
  EXPECT_NEAR(expected_metric_linear(std::vector<double>{0.9, 0.7, 0.5, 0.3}), 0.6, 1e-15);
  EXPECT_NEAR(expected_metric_enumerate(precision_at_k_metric(), std::vector<double>{0.9, 0.7, 0.5, 0.3}), 0.6, 1e-12);
  EXPECT_EQ(expected_metric_linear(std::vector<double>{0.25}), 0.25);
  EXPECT_THROW(expected_metric_linear(std::vector<double>{}), std::invalid_argument);
}

TEST(ExpectedMetricProperties, NormalizationAndClosedForm) {
  std::mt19937_64 rng(1234);
  for (std::size_t k = 1; k <= 12; ++k) {
    for (int rep = 0; rep < 30; ++rep) {
      const auto p = random_probs(rng, k);
      stats::CompensatedSum total;
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << k); ++m) total.add(vector_probability(p, BinaryVector::from_mask(m, k)));
      ASSERT_NEAR(total.value(), 1.0, 1e-12);
      ASSERT_NEAR(expected_metric_enumerate(precision_at_k_metric(), p), expected_metric_linear(p), 1e-10);
    }
  }
}

TEST(ExpectedMetricProperties, AgreesWithRecursiveOracleForNonlinearMetrics) {
  std::mt19937_64 rng(77);
  for (std::size_t k = 1; k <= 8; ++k) {
    const auto p = random_probs(rng, k);
    std::vector<int> bits(k);
    const double all = oracle::expectation_recursive(
        p, [](const std::vector<int>& b) { for (int x : b) if (!x) return 0.0; return 1.0; }, bits);
    const double any = oracle::expectation_recursive(
        p, [](const std::vector<int>& b) { for (int x : b) if (x) return 1.0; return 0.0; }, bits);
    EXPECT_NEAR(expected_metric_enumerate(all_relevant_metric(), p), all, 1e-12);
    EXPECT_NEAR(expected_metric_enumerate(success_at_k_metric(), p), any, 1e-12);
  }
}

TEST(ExpectedMetricProperties, MonotoneInEachProbability) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& metric : {precision_at_k_metric(), all_relevant_metric(), success_at_k_metric()}) {
    for (int rep = 0; rep < 200; ++rep) {
      auto p = random_probs(rng, 1 + rep % 6);
      const double before = expected_metric_enumerate(metric, p);
      const std::size_t i = rep % p.size();
      p[i] = p[i] + (1.0 - p[i]) * u(rng);
      ASSERT_GE(expected_metric_enumerate(metric, p), before - 1e-12) << metric.name;
    }
  }
}

TEST(ExpectedMetricProperties, StaysWithinMetricRange) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const auto p = random_probs(rng, 1 + rep % 7);
    for (const auto& metric : {precision_at_k_metric(), all_relevant_metric(), success_at_k_metric()}) {
      const double e = expected_metric_enumerate(metric, p);
      ASSERT_GE(e, -1e-15);
      ASSERT_LE(e, 1.0 + 1e-15);
    }
  }
}

}  // namespace
}  // namespace precise
