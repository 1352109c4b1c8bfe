#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/gradient.hpp"
#include "ncelm/model.hpp"
#include "ncelm/noise.hpp"

namespace ncelm {

enum class EstimatorKind { kMl, kNce, kIs };

const char* to_string(EstimatorKind kind);
const char* to_string(NoiseKind kind);
const char* to_string(NormalizerMode mode);
const char* to_string(MatrixMode mode);

struct TrainConfig {
  EstimatorKind estimator = EstimatorKind::kNce;
  std::size_t k = 25;  // noise / proposal samples per observation; unused for ml
  NoiseKind noise_kind = NoiseKind::kUnigram;
  double noise_smoothing = 1.0;  // add-n smoothing of the unigram noise
  std::size_t minibatch_size = 1000;
  double initial_lr = 0.1;
  std::size_t max_epochs = 20;
  double weight_penalty = 0.0;
  std::uint64_t seed = 1;
  NormalizerMode normalizer_mode = NormalizerMode::kFixedOne;
  std::optional<double> ess_floor;  // is only
  std::size_t worker_count = 1;
  // Reuse one set of k noise samples for a whole (per-worker) minibatch.
  bool share_noise_samples = false;

  // Model shape and initialization.
  std::size_t dim = 100;
  MatrixMode matrix_mode = MatrixMode::kFull;
  double init_scale = 0.1;
  bool bias_from_unigram = true;

  // Stopping rule.
  std::size_t patience = 5;
  double min_lr_fraction = 1.0 / 1024.0;

  // When set, the best-so-far model goes to "<path>.best" after every
  // validation improvement and the final model to "<path>".
  std::string checkpoint_path;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_objective = 0;  // mean per example of the estimator's objective
  double valid_ppl = 0;
  double learning_rate = 0;    // rate used during the epoch
  double seconds = 0;
  double mean_ess = 0;         // is only; NaN otherwise
  double min_weight = 0;       // nce posterior / is normalized weights; NaN for ml
  double max_weight = 0;
  std::size_t k = 0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // Comma-separated, one line per epoch after a header row. With
  // include_timing=false the seconds column is written as 0 so that logs of
  // repeated runs compare byte-for-byte.
  void write_csv(std::ostream& out, bool include_timing = true) const;
  void save_csv(const std::string& path, bool include_timing = true) const;
};

template <typename Real>
struct TrainResult {
  LblParams<Real> params;
  NormalizerStore<Real> normalizers;
  TrainHistory history;
  std::string stop_reason;
};

template <typename Real>
using EpochCallback =
    std::function<void(const EpochRecord&, const LblParams<Real>&, const NormalizerStore<Real>&)>;

// Halves the rate when validation perplexity went up; equality is not an
// increase.
double update_learning_rate(double lr, double prev_valid_ppl, double curr_valid_ppl);

// theta <- theta + lr * (gradient - weight_penalty * theta) on every touched
// row of R, Q and b and on all of C; normalizers take plain steps. Throws
// DivergenceError naming the first tensor that became non-finite.
template <typename Real>
void sgd_step(LblParams<Real>& params, NormalizerStore<Real>& normalizers, const Gradient<Real>& gradient,
              double lr, double weight_penalty);

// Full training loop: seeded shuffling, minibatch SGD with the configured
// estimator, validation-driven rate halving and early stopping.
template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& train_set, const Dataset& valid_set,
                        std::size_t vocab_size, const EpochCallback<Real>& on_epoch = {});

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& train_set, const Dataset& valid_set,
                        const Vocabulary& vocab, const EpochCallback<Real>& on_epoch = {});

// Noise distribution the trainer uses for a training set.
NoiseDistribution make_noise(NoiseKind kind, const Dataset& train_set, std::size_t vocab_size,
                             double smoothing);

struct BenchmarkResult {
  double median_seconds = 0;
  std::vector<double> samples;
};

// Median wall-clock time of one gradient computation plus parameter update
// on `batch`. Runs on a private copy of the parameters.
template <typename Real>
BenchmarkResult benchmark_update(const LblParams<Real>& params, EstimatorKind kind, std::size_t k,
                                 const Dataset& batch, const NoiseDistribution& noise,
                                 std::size_t repetitions = 20, std::uint64_t seed = 1);

}  // namespace ncelm
