#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ncelm/error.hpp"
#include "ncelm/estimators.hpp"
#include "ncelm/model.hpp"
#include "ncelm/noise.hpp"
#include "oracles.hpp"

namespace ncelm {
namespace {

using oracle::Params;

NoiseDistribution random_noise(std::mt19937_64& rng, std::size_t V) {
  const auto p = oracle::random_simplex(rng, V);
  return NoiseDistribution::from_weights(p, NoiseKind::kUnigram);
}

NormalizerStore<double> random_normalizers(std::mt19937_64& rng, const Dataset& batch) {
  NormalizerStore<double> norms(NormalizerMode::kPerContext);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < batch.size(); ++i) norms.set(batch.context(i), normal(rng));
  return norms;
}

// ---------------------------------------------------------------------------
// Maximum likelihood

TEST(MlTest, SingleWordVocabularyHasZeroGradient) {
  std::mt19937_64 rng(1);
  const auto p = oracle::random_params(rng, 1, 3, 2, MatrixMode::kFull);
  const auto batch = oracle::random_batch(rng, 1, 2, 3);
  const auto g = oracle::flatten(ml_gradient(p, NormalizerStore<double>(), batch), p);
  for (double x : g) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(MlTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (MatrixMode mode : {MatrixMode::kFull, MatrixMode::kDiagonal}) {
    auto p = oracle::random_params(rng, 20, 4, 2, mode);
    const auto batch = oracle::random_batch(rng, 20, 2, 5);
    const auto analytic = oracle::flatten(ml_gradient(p, NormalizerStore<double>(), batch), p);
    const auto numeric = oracle::central_differences(p, [&] { return oracle::log_likelihood(p, batch); });
    EXPECT_LT(oracle::max_relative_error(analytic, numeric), 1e-5);
  }
}

TEST(MlTest, BiasGradientIsResidual) {
  std::mt19937_64 rng(3);
  const auto p = oracle::random_params(rng, 15, 3, 2, MatrixMode::kFull);
  const auto batch = oracle::random_batch(rng, 15, 2, 4);
  const auto g = ml_gradient(p, NormalizerStore<double>(), batch);
  std::vector<double> expected(15, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto lp = oracle::log_probs(p, batch.context(i));
    expected[batch.target(i)] += 1;
    for (std::size_t w = 0; w < 15; ++w) expected[w] -= std::exp(lp[w]);
  }
  for (WordId w = 0; w < 15; ++w) EXPECT_NEAR(g.bias_at(w), expected[w], 1e-12);
}

TEST(MlTest, ObjectiveMatchesOracle) {
  std::mt19937_64 rng(4);
  const auto p = oracle::random_params(rng, 25, 5, 3, MatrixMode::kDiagonal);
  const auto batch = oracle::random_batch(rng, 25, 3, 6);
  EXPECT_NEAR(ml_objective(p, batch), oracle::log_likelihood(p, batch), 1e-10);
  EXPECT_NEAR(ml_evaluate(p, batch).log_likelihood, oracle::log_likelihood(p, batch), 1e-10);
}

TEST(MlTest, FloatAgreesWithDouble) {
  std::mt19937_64 rng(5);
  const auto p = oracle::random_params(rng, 30, 6, 2, MatrixMode::kFull, 0.3);
  const auto batch = oracle::random_batch(rng, 30, 2, 8);
  const auto g64 = oracle::flatten(ml_gradient(p, NormalizerStore<double>(), batch), p);
  const auto g32 = ml_gradient(cast_params<float>(p), NormalizerStore<float>(), batch);
  EXPECT_NEAR(g32.bias_at(batch.target(0)), g64[g64.size() - 30 + batch.target(0)], 1e-5);
}

// ---------------------------------------------------------------------------
// Noise-contrastive estimation

TEST(NceTest, MatchesFiniteDifferencesWithFrozenSamples) {
  std::mt19937_64 rng(6);
  for (MatrixMode mode : {MatrixMode::kFull, MatrixMode::kDiagonal}) {
    for (bool shared : {false, true}) {
      auto p = oracle::random_params(rng, 20, 4, 2, mode);
      const auto batch = oracle::random_batch(rng, 20, 2, 5);
      const auto noise = random_noise(rng, 20);
      auto norms = random_normalizers(rng, batch);
      Rng sample_rng(rng());
      const auto samples = draw_noise_samples(batch.size(), noise, 4, sample_rng, shared);
      const auto objective = [&] { return oracle::nce_objective(p, norms, batch, noise.probs(), samples); };

      const auto result = nce_evaluate(p, norms, batch, noise, samples);
      EXPECT_LT(oracle::max_relative_error(oracle::flatten(result.gradient, p), oracle::central_differences(p, objective)),
                1e-5);
      EXPECT_LT(oracle::normalizer_fd_error(result.gradient, norms, batch, objective), 1e-5);
      EXPECT_NEAR(result.objective, objective(), 1e-10);
      EXPECT_NEAR(nce_objective(p, norms, batch, noise, samples), objective(), 1e-10);
    }
  }
}

TEST(NceTest, MatchedModelAndNoiseGiveHalfWeights) {
  // P(w|h) = k P_n(w) for every word: with uniform noise over 4 words and
  // k = 2 every unnormalized probability must be 0.5.
  std::mt19937_64 param_rng(7);
  Params p = oracle::random_params(param_rng, 4, 2, 1, MatrixMode::kFull);
  p.target_table.setZero();
  p.bias.setConstant(std::log(0.5));
  const auto noise = NoiseDistribution::uniform(4);
  Dataset batch(1);
  batch.add(std::vector<WordId>{1}, 3);
  Rng rng(1);
  const auto samples = draw_noise_samples(1, noise, 2, rng);
  const auto r = nce_evaluate(p, NormalizerStore<double>(), batch, noise, samples);
  EXPECT_DOUBLE_EQ(r.min_weight, 0.5);
  EXPECT_DOUBLE_EQ(r.max_weight, 0.5);
  EXPECT_NEAR(r.objective, 3 * std::log(0.5), 1e-15);
}

TEST(NceTest, WeightsStayInUnitIntervalAndObjectiveNonPositive) {
  std::mt19937_64 rng(8);
  for (double scale : {0.1, 3.0, 20.0}) {
    const auto p = oracle::random_params(rng, 30, 6, 2, MatrixMode::kFull, scale);
    const auto batch = oracle::random_batch(rng, 30, 2, 20);
    const auto noise = random_noise(rng, 30);
    Rng sample_rng(scale * 10);
    const auto samples = draw_noise_samples(batch.size(), noise, 10, sample_rng);
    const auto r = nce_evaluate(cast_params<float>(p), NormalizerStore<float>(), batch, noise, samples);
    EXPECT_GE(r.min_weight, 0.0);
    EXPECT_LE(r.max_weight, 1.0);
    EXPECT_LE(r.objective, 0.0);
    EXPECT_TRUE(r.gradient.all_finite());
  }
}

TEST(NceTest, ObservedWordOutsideNoiseSupport) {
  std::mt19937_64 rng(9);
  const auto p = oracle::random_params(rng, 3, 2, 1, MatrixMode::kFull);
  const std::vector<std::uint64_t> counts{1, 1, 0};
  const auto noise = NoiseDistribution::from_counts(counts, 0);
  Dataset batch(1);
  batch.add(std::vector<WordId>{0}, 2);
  Rng sample_rng(1);
  EXPECT_THROW(nce_gradient(p, NormalizerStore<double>(), batch, noise, 3, sample_rng), SupportError);
}

TEST(NceTest, MonteCarloAverageMatchesEnumeration) {
  std::mt19937_64 rng(10);
  const std::size_t V = 5, k = 3;
  const auto p = oracle::random_params(rng, V, 2, 1, MatrixMode::kFull);
  const auto noise = random_noise(rng, V);
  NormalizerStore<double> norms(NormalizerMode::kPerContext);
  const std::vector<WordId> ctx{2};
  norms.set(ctx, -0.3);
  const WordId w = 4;
  Dataset batch(1);
  batch.add(ctx, w);

  std::vector<double> onehot(V, 0.0);
  onehot[w] = 1;
  const auto exact_g = exact_nce_gradient(p, norms, onehot, ctx, noise, static_cast<double>(k));
  auto exact = oracle::flatten(exact_g, p);
  exact.push_back(exact_g.normalizer_at(ctx));

  const int draws = 100000;
  std::vector<double> sum(exact.size(), 0.0), sum_sq(exact.size(), 0.0);
  Rng sample_rng(99);
  for (int i = 0; i < draws; ++i) {
    const auto g = nce_gradient(p, norms, batch, noise, k, sample_rng);
    auto flat = oracle::flatten(g, p);
    flat.push_back(g.normalizer_at(ctx));
    for (std::size_t j = 0; j < flat.size(); ++j) {
      sum[j] += flat[j];
      sum_sq[j] += flat[j] * flat[j];
    }
  }
  for (std::size_t j = 0; j < exact.size(); ++j) {
    const double mean = sum[j] / draws;
    const double var = std::max(sum_sq[j] / draws - mean * mean, 0.0);
    const double se = std::sqrt(var / draws);
    EXPECT_LE(std::abs(mean - exact[j]), 3 * se + 1e-12) << "coordinate " << j;
  }
}

// Expected ML gradient E_{P_d}[d log P(w|h)] by finite differences of the
// oracle log-probabilities.
TEST(ExactNceTest, ZeroWhenModelEqualsData) {
  std::mt19937_64 rng(11);
  const auto p = oracle::random_params(rng, 12, 3, 2, MatrixMode::kFull);
  const std::vector<WordId> ctx{3, 8};
  const auto lp = oracle::log_probs(p, ctx);
  std::vector<double> pd(12);
  for (std::size_t w = 0; w < 12; ++w) pd[w] = std::exp(lp[w]);
  // Normalize the model with the learned constant c^h = -log Z.
  NormalizerStore<double> norms(NormalizerMode::kPerContext);
  norms.set(ctx, lp[0] - oracle::score(p, ctx, 0));
  const auto g = exact_nce_gradient(p, norms, pd, ctx, random_noise(rng, 12), 5.0);
  for (double x : oracle::flatten(g, p)) EXPECT_NEAR(x, 0.0, 1e-14);
  EXPECT_NEAR(g.normalizer_at(ctx), 0.0, 1e-14);
}

TEST(ExactNceTest, ApproachesMlAsNoiseGrows) {
  std::mt19937_64 rng(12);
  for (int instance = 0; instance < 5; ++instance) {
    const MatrixMode mode = instance % 2 ? MatrixMode::kDiagonal : MatrixMode::kFull;
    auto p = oracle::random_params(rng, 20, 3, 2, mode);
    const std::vector<WordId> ctx{static_cast<WordId>(instance), 7};
    const auto lp = oracle::log_probs(p, ctx);
    NormalizerStore<double> norms(NormalizerMode::kPerContext);
    norms.set(ctx, lp[0] - oracle::score(p, ctx, 0));
    const auto pd = oracle::random_simplex(rng, 20);
    const auto noise = random_noise(rng, 20);
    const auto ml = oracle::expected_ml_gradient(p, ctx, pd);

    double previous = std::numeric_limits<double>::infinity();
    for (double k : {1.0, 10.0, 100.0, 1000.0, 10000.0}) {
      const auto nce = oracle::flatten(exact_nce_gradient(p, norms, pd, ctx, noise, k), p);
      const double gap = oracle::norm(oracle::difference(nce, ml)) / oracle::norm(ml);
      EXPECT_LT(gap, previous) << "k=" << k;
      previous = gap;
    }
    EXPECT_LT(previous, 1e-2);
  }
}

// ---------------------------------------------------------------------------
// Importance sampling

TEST(IsTest, MatchesFiniteDifferencesWithFrozenSamples) {
  std::mt19937_64 rng(13);
  for (MatrixMode mode : {MatrixMode::kFull, MatrixMode::kDiagonal}) {
    auto p = oracle::random_params(rng, 20, 4, 3, mode);
    const auto batch = oracle::random_batch(rng, 20, 3, 5);
    const auto proposal = random_noise(rng, 20);
    Rng sample_rng(rng());
    const auto samples = draw_noise_samples(batch.size(), proposal, 6, sample_rng);
    const auto objective = [&] { return oracle::is_objective(p, batch, proposal.probs(), samples); };
    const auto result = is_evaluate(p, batch, proposal, samples);
    EXPECT_LT(oracle::max_relative_error(oracle::flatten(result.gradient, p), oracle::central_differences(p, objective)),
              1e-5);
    EXPECT_NEAR(result.objective, objective(), 1e-10);
    EXPECT_NEAR(is_objective(p, batch, proposal, samples), objective(), 1e-10);
  }
}

TEST(IsTest, ExactProposalGivesEqualWeights) {
  std::mt19937_64 rng(14);
  const auto p = oracle::random_params(rng, 10, 3, 1, MatrixMode::kFull);
  const std::vector<WordId> ctx{4};
  const auto lp = oracle::log_probs(p, ctx);
  std::vector<double> weights(10);
  for (std::size_t w = 0; w < 10; ++w) weights[w] = std::exp(lp[w]);
  const auto proposal = NoiseDistribution::from_weights(weights, NoiseKind::kUnigram);
  Dataset batch(1);
  batch.add(ctx, 2);
  Rng sample_rng(3);
  const auto samples = draw_noise_samples(1, proposal, 8, sample_rng);
  const auto r = is_evaluate(p, batch, proposal, samples);
  EXPECT_NEAR(r.per_example[0].ess, 8.0, 1e-9);
  EXPECT_NEAR(r.per_example[0].max_weight_fraction, 1.0 / 8, 1e-12);
}

TEST(IsTest, SingleSample) {
  std::mt19937_64 rng(15);
  const auto p = oracle::random_params(rng, 10, 3, 2, MatrixMode::kFull);
  const auto batch = oracle::random_batch(rng, 10, 2, 3);
  Rng sample_rng(4);
  const auto [g, stats] = is_gradient(p, NormalizerStore<double>(), batch, NoiseDistribution::uniform(10), 1, sample_rng);
  EXPECT_DOUBLE_EQ(stats.ess, 1.0);
  EXPECT_DOUBLE_EQ(stats.max_weight_fraction, 1.0);
}

TEST(IsTest, StatsWithinBounds) {
  std::mt19937_64 rng(16);
  const auto p = oracle::random_params(rng, 40, 4, 2, MatrixMode::kFull, 2.0);
  const auto batch = oracle::random_batch(rng, 40, 2, 10);
  Rng sample_rng(5);
  const std::size_t k = 7;
  const auto samples = draw_noise_samples(batch.size(), NoiseDistribution::uniform(40), k, sample_rng);
  const auto r = is_evaluate(p, batch, NoiseDistribution::uniform(40), samples);
  for (const auto& s : r.per_example) {
    EXPECT_GE(s.ess, 1.0 - 1e-12);
    EXPECT_LE(s.ess, k + 1e-12);
    EXPECT_GE(s.max_weight_fraction, 1.0 / k - 1e-12);
    EXPECT_LE(s.max_weight_fraction, 1.0 + 1e-12);
  }
}

TEST(IsTest, WeightedTermConvergesToModelExpectation) {
  std::mt19937_64 rng(17);
  auto p = oracle::random_params(rng, 20, 3, 2, MatrixMode::kFull);
  const std::vector<WordId> ctx{5, 6};
  const WordId w = 3;
  Dataset batch(2);
  batch.add(ctx, w);
  // The weighted term is d s(w,h) minus the IS gradient; its target is
  // E_P[d s] = d/dtheta sum_x P(x) s(x) with P held fixed.
  const auto lp = oracle::log_probs(p, ctx);
  std::vector<double> prob(20);
  for (std::size_t x = 0; x < 20; ++x) prob[x] = std::exp(lp[x]);
  const auto target = oracle::central_differences(p, [&] {
    double total = 0;
    for (std::size_t x = 0; x < 20; ++x) total += prob[x] * oracle::score(p, ctx, static_cast<WordId>(x));
    return total;
  });
  const auto ds_w = oracle::central_differences(p, [&] { return oracle::score(p, ctx, w); });

  const auto proposal = NoiseDistribution::uniform(20);
  Rng sample_rng(6);
  std::vector<double> mean(target.size(), 0.0);
  const int repeats = 10;
  for (int r = 0; r < repeats; ++r) {
    const auto g = oracle::flatten(is_gradient(p, NormalizerStore<double>(), batch, proposal, 10000, sample_rng).first, p);
    for (std::size_t j = 0; j < g.size(); ++j) mean[j] += (ds_w[j] - g[j]) / repeats;
  }
  EXPECT_LT(oracle::norm(oracle::difference(mean, target)) / oracle::norm(target), 0.02);
}

TEST(IsTest, DegenerateWeightsAreReported) {
  std::mt19937_64 rng(18);
  auto p = oracle::random_params(rng, 5, 2, 1, MatrixMode::kFull);
  p.bias.setConstant(-std::numeric_limits<double>::infinity());
  const auto batch = oracle::random_batch(rng, 5, 1, 1);
  Rng sample_rng(7);
  EXPECT_THROW(is_gradient(p, NormalizerStore<double>(), batch, NoiseDistribution::uniform(5), 3, sample_rng),
               DegenerateWeightsError);
}

// ---------------------------------------------------------------------------
// Normalizers and gradient algebra

TEST(NormalizerUpdateTest, FixedModeIgnoresGradient) {
  Gradient<double> g(4, 2, 1, MatrixMode::kFull);
  g.add_normalizer(std::vector<WordId>{1}, 2.0);
  NormalizerStore<double> fixed;
  update_normalizers(g, fixed, 0.5);
  EXPECT_EQ(fixed.size(), 0u);

  NormalizerStore<double> learned(NormalizerMode::kPerContext);
  update_normalizers(g, learned, 0.5);
  EXPECT_DOUBLE_EQ(learned.lookup(std::vector<WordId>{1}), 1.0);
}

TEST(NormalizerUpdateTest, GradientIsPosteriorResidual) {
  std::mt19937_64 rng(19);
  const auto p = oracle::random_params(rng, 8, 2, 1, MatrixMode::kFull);
  const auto noise = random_noise(rng, 8);
  NormalizerStore<double> norms(NormalizerMode::kPerContext);
  const std::vector<WordId> ctx{3};
  norms.set(ctx, 0.4);
  Dataset batch(1);
  batch.add(ctx, 6);
  Rng sample_rng(8);
  const auto samples = draw_noise_samples(1, noise, 5, sample_rng);
  const auto g = nce_evaluate(p, norms, batch, noise, samples).gradient;

  auto z = [&](WordId x) { return oracle::score(p, ctx, x) + 0.4 - std::log(5 * noise.probs()[x]); };
  double residual = 1.0 / (1.0 + std::exp(z(6)));
  for (WordId x : samples.for_example(0)) residual -= 1.0 / (1.0 + std::exp(-z(x)));
  EXPECT_NEAR(g.normalizer_at(ctx), residual, 1e-12);
}

TEST(GradientTest, AdditionCommutesAndMergesRows) {
  std::mt19937_64 rng(20);
  const auto p = oracle::random_params(rng, 15, 3, 2, MatrixMode::kFull);
  const auto noise = random_noise(rng, 15);
  NormalizerStore<double> norms(NormalizerMode::kPerContext);
  const auto b1 = oracle::random_batch(rng, 15, 2, 3);
  const auto b2 = oracle::random_batch(rng, 15, 2, 3);
  const auto b3 = oracle::random_batch(rng, 15, 2, 3);
  Rng sample_rng(9);
  const auto g1 = nce_gradient(p, norms, b1, noise, 4, sample_rng);
  const auto g2 = nce_gradient(p, norms, b2, noise, 4, sample_rng);
  const auto g3 = nce_gradient(p, norms, b3, noise, 4, sample_rng);

  Gradient<double> ab = g1, ba = g2;
  ab += g2;
  ba += g1;
  EXPECT_EQ(oracle::flatten(ab, p), oracle::flatten(ba, p));
  EXPECT_EQ(ab.normalizers.size(), ba.normalizers.size());

  Gradient<double> left = ab, right = g2;
  left += g3;
  right += g3;
  Gradient<double> right_total = g1;
  right_total += right;
  const auto l = oracle::flatten(left, p), r = oracle::flatten(right_total, p);
  for (std::size_t j = 0; j < l.size(); ++j) EXPECT_NEAR(l[j], r[j], 1e-12);

  // Scaling acts elementwise.
  const auto flat = oracle::flatten(ml_gradient(p, norms, b1), p);
  Gradient<double> ml = ml_gradient(p, norms, b1);
  ml.scale(2.0);
  const auto doubled = oracle::flatten(ml, p);
  for (std::size_t j = 0; j < flat.size(); ++j) EXPECT_DOUBLE_EQ(doubled[j], 2 * flat[j]);
}

}  // namespace
}  // namespace ncelm
