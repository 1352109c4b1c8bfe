#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/gradient.hpp"
#include "ncelm/model.hpp"
#include "ncelm/noise.hpp"
#include "ncelm/trainer.hpp"

namespace ncelm {

// Self-checks that compare the estimators against independent references:
// central finite differences of their objectives, enumeration of the
// expected NCE gradient, and constructed worst cases for importance sampling.

// Flat view of every model parameter in the order R, Q, C_1..C_n, b.
std::size_t num_coordinates(const LblParams<double>& params);
double& coordinate(LblParams<double>& params, std::size_t index);
double gradient_coordinate(const Gradient<double>& gradient, const LblParams<double>& params, std::size_t index);
Eigen::VectorXd flatten(const Gradient<double>& gradient, const LblParams<double>& params);

// |a - n| / max(|a|, |n|, floor); the floor keeps coordinates whose true
// derivative is zero from dividing rounding noise by itself.
double relative_error(double analytic, double numeric, double floor = 1e-4);

// Largest relative error between `gradient` and central differences of
// `objective` over all model coordinates and the normalizers of `contexts`.
double max_fd_error(LblParams<double>& params, NormalizerStore<double>& normalizers,
                    const Gradient<double>& gradient,
                    const std::function<double(const LblParams<double>&, const NormalizerStore<double>&)>& objective,
                    const std::vector<Context>& contexts, double step = 1e-5);

struct RandomInstance {
  LblParams<double> params;
  NormalizerStore<double> normalizers;
  Dataset batch;
  NoiseDistribution noise;
};

// V in [5, max_vocab], d in [1, max_dim], context size in [1, max_context];
// all parameters random, normalizers random in per-context mode.
RandomInstance random_instance(Rng& rng, MatrixMode mode, std::size_t max_vocab = 50, std::size_t max_dim = 8,
                               std::size_t max_context = 3, std::size_t batch_size = 4);

struct GradCheckReport {
  std::size_t instances = 0;
  double ml_error = 0;
  double nce_error = 0;
  double is_error = 0;
  double normalizer_error = 0;
  double tolerance = 1e-5;
  bool passed() const;
};

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances = 20, std::size_t k = 5,
                              double tolerance = 1e-5);

// Checks one concrete model (e.g. a loaded checkpoint) on a random subset of
// coordinates.
GradCheckReport gradcheck_params(const LblParams<double>& params, std::uint64_t seed,
                                 std::size_t max_coordinates = 300, double tolerance = 1e-5);

struct NceLimitReport {
  std::vector<double> ks;
  std::vector<std::vector<double>> gaps;  // per instance, per k: ||g_nce - g_ml|| / ||g_ml||
  std::size_t non_monotone = 0;           // instances whose gap ever increased
  double worst_final_gap = 0;
  double tolerance = 1e-2;
  bool passed() const { return non_monotone == 0 && worst_final_gap < tolerance; }
};

NceLimitReport run_nce_limit(std::uint64_t seed, std::size_t instances = 20,
                             std::vector<double> ks = {1, 10, 100, 1000, 10000});

struct StabilityReport {
  bool is_diverged = false;
  std::string is_message;
  double is_max_weight_fraction = 0;
  std::size_t is_epochs = 0;
  bool nce_completed = false;
  double nce_min_weight = 0;
  double nce_max_weight = 0;
  std::size_t nce_epochs = 0;
  bool passed() const;
};

// Peaked model, uniform proposal, k = 5: importance sampling against NCE on
// the same data and configuration for up to `epochs` epochs.
StabilityReport run_is_stability(std::uint64_t seed, std::size_t epochs = 20);

struct SpeedupReport {
  double predicted = 0;
  double ml_seconds = 0;
  double nce_seconds = 0;
  double measured = 0;
  double nce_k1_seconds = 0;
  double nce_k100_seconds = 0;
  double sample_count_variation = 0;  // |t(100) - t(1)| / t(1)
  bool within_factor_two() const { return measured >= predicted / 2 && measured <= predicted * 2; }
};

// Times ML against NCE with k samples per update at the given shape.
SpeedupReport run_speedup_benchmark(std::size_t context_size, std::size_t dim, std::size_t vocab_size,
                                    std::size_t k, MatrixMode mode, std::size_t batch_size = 100,
                                    std::size_t repetitions = 20, std::uint64_t seed = 1);

}  // namespace ncelm
