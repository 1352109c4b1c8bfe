#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "ncelm/error.hpp"
#include "ncelm/noise.hpp"

namespace ncelm {
namespace {

void expect_probs(const NoiseDistribution& dist, const std::vector<double>& expected) {
  ASSERT_EQ(dist.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(dist.probs()[i], expected[i], 1e-15);
}

void expect_alias_exact(const NoiseDistribution& dist) {
  const auto rebuilt = dist.reconstructed_probs();
  ASSERT_EQ(rebuilt.size(), dist.size());
  for (std::size_t i = 0; i < rebuilt.size(); ++i) ASSERT_NEAR(rebuilt[i], dist.probs()[i], 1e-12) << "id " << i;
}

TEST(NoiseTest, FromCounts) {
  const std::vector<std::uint64_t> a{2, 1, 1}, b{0, 0}, c{3, 1};
  expect_probs(NoiseDistribution::from_counts(a, 0), {0.5, 0.25, 0.25});
  expect_probs(NoiseDistribution::from_counts(b, 1), {0.5, 0.5});
  expect_probs(NoiseDistribution::from_counts(c, 1), {4.0 / 6, 2.0 / 6});
  EXPECT_EQ(NoiseDistribution::from_counts(a, 0).kind(), NoiseKind::kUnigram);
}

TEST(NoiseTest, FromCountsErrors) {
  const std::vector<std::uint64_t> zeros{0, 0, 0};
  EXPECT_THROW(NoiseDistribution::from_counts(zeros, 0), ConfigError);
  EXPECT_THROW(NoiseDistribution::from_counts(zeros, -1), ConfigError);
}

TEST(NoiseTest, SmoothedUnigramHasFullSupport) {
  const std::vector<std::uint64_t> counts{0, 5, 0, 1};
  EXPECT_TRUE(NoiseDistribution::from_counts(counts, 1).has_full_support());
  EXPECT_FALSE(NoiseDistribution::from_counts(counts, 0).has_full_support());
}

TEST(NoiseTest, Uniform) {
  expect_probs(NoiseDistribution::uniform(4), {0.25, 0.25, 0.25, 0.25});
  expect_probs(NoiseDistribution::uniform(1), {1.0});
  const auto u = NoiseDistribution::uniform(7);
  for (WordId w = 0; w < 7; ++w) EXPECT_NEAR(u.log_prob(w), -std::log(7.0), 1e-15);
  EXPECT_NEAR(NoiseDistribution::uniform(4).log_prob(2), std::log(0.25), 1e-15);
  EXPECT_EQ(u.kind(), NoiseKind::kUniform);
}

TEST(NoiseTest, LogProbAndSupport) {
  const std::vector<std::uint64_t> even{1, 1}, half{1, 0};
  EXPECT_NEAR(NoiseDistribution::from_counts(even, 0).log_prob(0), std::log(0.5), 1e-15);
  EXPECT_THROW(NoiseDistribution::from_counts(half, 0).log_prob(1), SupportError);
}

TEST(NoiseTest, ProbsSumToOne) {
  std::vector<std::uint64_t> counts(1000);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = (i * 7919) % 101;
  const auto dist = NoiseDistribution::from_counts(counts, 0.5);
  EXPECT_NEAR(std::accumulate(dist.probs().begin(), dist.probs().end(), 0.0), 1.0, 1e-9);
}

TEST(AliasTest, DegenerateAlwaysReturnsZero) {
  const auto dist = NoiseDistribution::uniform(1);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(dist.sample(rng), 0u);
}

TEST(AliasTest, ZeroProbabilityIdsAreNeverDrawn) {
  const std::vector<std::uint64_t> counts{0, 3, 0, 1, 0};
  const auto dist = NoiseDistribution::from_counts(counts, 0);
  Rng rng(2);
  for (int i = 0; i < 100000; ++i) {
    const WordId w = dist.sample(rng);
    ASSERT_TRUE(w == 1 || w == 3) << w;
  }
}

TEST(AliasTest, ChiSquareGoodnessOfFit) {
  const std::vector<std::uint64_t> counts{2, 1, 1};
  const auto dist = NoiseDistribution::from_counts(counts, 0);
  Rng rng(12345);
  const int draws = 1000000;
  std::vector<double> observed(3, 0.0);
  for (int i = 0; i < draws; ++i) observed[dist.sample(rng)] += 1;
  double chi2 = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = draws * dist.probs()[i];
    chi2 += (observed[i] - expected) * (observed[i] - expected) / expected;
  }
  // Upper 0.001 quantile of chi-square with 2 degrees of freedom.
  EXPECT_LT(chi2, 13.816);
}

TEST(AliasTest, SameSeedSameSequence) {
  const auto dist = NoiseDistribution::uniform(1000);
  Rng a(77), b(77);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(dist.sample(a), dist.sample(b));
}

TEST(AliasTest, TableReproducesProbabilities) {
  const std::vector<std::uint64_t> small{2, 1, 1}, holes{0, 3, 0, 1, 0, 9};
  expect_alias_exact(NoiseDistribution::from_counts(small, 0));
  expect_alias_exact(NoiseDistribution::from_counts(holes, 0));
  expect_alias_exact(NoiseDistribution::uniform(13));

  // Zipf-like over a large vocabulary.
  std::vector<double> weights(100000);
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  expect_alias_exact(NoiseDistribution::from_weights(weights, NoiseKind::kUnigram));
}

}  // namespace
}  // namespace ncelm
