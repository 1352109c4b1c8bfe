#include "ncelm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

#include "ncelm/checkpoint.hpp"
#include "ncelm/error.hpp"
#include "ncelm/estimators.hpp"
#include "ncelm/eval.hpp"

namespace ncelm {

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kMl: return "ml";
    case EstimatorKind::kNce: return "nce";
    case EstimatorKind::kIs: return "is";
  }
  return "?";
}

const char* to_string(NoiseKind kind) { return kind == NoiseKind::kUnigram ? "unigram" : "uniform"; }

const char* to_string(NormalizerMode mode) {
  return mode == NormalizerMode::kFixedOne ? "fixed-one" : "per-context";
}

const char* to_string(MatrixMode mode) { return mode == MatrixMode::kFull ? "full" : "diagonal"; }

void TrainConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(noise_smoothing >= 0)) throw ConfigError("noise_smoothing must be non-negative");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be at least 1");
  if (!(initial_lr > 0) || !std::isfinite(initial_lr)) throw ConfigError("initial_lr must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(weight_penalty >= 0)) throw ConfigError("weight_penalty must be non-negative");
  if (ess_floor && !(*ess_floor > 0)) throw ConfigError("ess_floor must be positive");
  if (ess_floor && estimator != EstimatorKind::kIs) throw ConfigError("ess_floor only applies to is");
  if (worker_count < 1) throw ConfigError("worker_count must be at least 1");
  if (dim < 1) throw ConfigError("dim must be at least 1");
  if (!(init_scale >= 0)) throw ConfigError("init_scale must be non-negative");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (!(min_lr_fraction > 0 && min_lr_fraction < 1)) throw ConfigError("min_lr_fraction must be in (0, 1)");
}

void TrainHistory::write_csv(std::ostream& out, bool include_timing) const {
  out << "epoch,train_objective,valid_ppl,learning_rate,seconds,mean_ess,min_weight,max_weight,k\n";
  out << std::setprecision(10);
  for (const auto& r : epochs) {
    out << r.epoch << ',' << r.train_objective << ',' << r.valid_ppl << ',' << r.learning_rate << ','
        << (include_timing ? r.seconds : 0.0) << ',' << r.mean_ess << ',' << r.min_weight << ','
        << r.max_weight << ',' << r.k << '\n';
  }
}

void TrainHistory::save_csv(const std::string& path, bool include_timing) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_csv(out, include_timing);
}

double update_learning_rate(double lr, double prev_valid_ppl, double curr_valid_ppl) {
  return curr_valid_ppl > prev_valid_ppl ? lr / 2 : lr;
}

namespace {

// Returns false if any updated row is no longer finite.
template <typename Real>
bool step_rows(Matrix<Real>& table, const SparseRows<Real>& grad, Real lr, Real penalty) {
  bool finite = true;
  for (WordId id : grad.ids()) {
    auto row = table.row(id);
    row += lr * (grad.row(id).transpose() - penalty * row);
    finite = finite && row.allFinite();
  }
  return finite;
}

}  // namespace

template <typename Real>
void sgd_step(LblParams<Real>& params, NormalizerStore<Real>& normalizers, const Gradient<Real>& gradient,
              double lr, double weight_penalty) {
  const auto rate = static_cast<Real>(lr);
  const auto penalty = static_cast<Real>(weight_penalty);
  const bool r_finite = step_rows(params.context_table, gradient.context_rows, rate, penalty);
  const bool q_finite = step_rows(params.target_table, gradient.target_rows, rate, penalty);
  for (WordId id : gradient.bias.ids()) {
    params.bias[id] += rate * (gradient.bias.get(id, 0) - penalty * params.bias[id]);
  }
  for (std::size_t i = 0; i < params.context_weights.size(); ++i) {
    auto& c = params.context_weights[i];
    c += rate * (gradient.context_weights[i] - penalty * c);
  }
  update_normalizers(gradient, normalizers, lr);

  if (!r_finite) {
    throw DivergenceError("non-finite value in context table R", "R");
  }
  if (!q_finite) {
    throw DivergenceError("non-finite value in target table Q", "Q");
  }
  for (WordId id : gradient.bias.ids()) {
    if (!std::isfinite(params.bias[id])) throw DivergenceError("non-finite value in bias b", "b");
  }
  for (std::size_t i = 0; i < params.context_weights.size(); ++i) {
    if (!params.context_weights[i].allFinite()) {
      const auto name = "C_" + std::to_string(i + 1);
      throw DivergenceError("non-finite value in context matrix " + name, name);
    }
  }
  for (const auto& [ctx, g] : gradient.normalizers) {
    if (!std::isfinite(normalizers.lookup(ctx))) {
      throw DivergenceError("non-finite per-context normalizer", "c");
    }
  }
}

NoiseDistribution make_noise(NoiseKind kind, const Dataset& train_set, std::size_t vocab_size,
                             double smoothing) {
  if (kind == NoiseKind::kUniform) return NoiseDistribution::uniform(vocab_size);
  const auto counts = unigram_counts(train_set, vocab_size);
  return NoiseDistribution::from_counts(counts, smoothing);
}

namespace {

// Partial results one worker produces for its slice of a minibatch.
template <typename Real>
struct Partial {
  Gradient<Real> gradient;
  double objective = 0;
  double ess_sum = 0;
  double min_weight = std::numeric_limits<double>::infinity();
  double max_weight = -std::numeric_limits<double>::infinity();
};

template <typename Real>
Partial<Real> run_estimator(const TrainConfig& config, std::size_t k, const LblParams<Real>& params,
                            const NormalizerStore<Real>& normalizers, const Dataset& batch,
                            const NoiseDistribution& noise, Rng& rng) {
  Partial<Real> out;
  switch (config.estimator) {
    case EstimatorKind::kMl: {
      auto r = ml_evaluate(params, batch);
      out.gradient = std::move(r.gradient);
      out.objective = r.log_likelihood;
      break;
    }
    case EstimatorKind::kNce: {
      const auto samples = draw_noise_samples(batch.size(), noise, k, rng, config.share_noise_samples);
      auto r = nce_evaluate(params, normalizers, batch, noise, samples);
      if (r.min_weight < 0.0 || r.max_weight > 1.0) {
        throw Error("NCE posterior weight outside [0, 1]");
      }
      out.gradient = std::move(r.gradient);
      out.objective = r.objective;
      out.min_weight = r.min_weight;
      out.max_weight = r.max_weight;
      break;
    }
    case EstimatorKind::kIs: {
      const auto samples = draw_noise_samples(batch.size(), noise, k, rng, config.share_noise_samples);
      auto r = is_evaluate(params, batch, noise, samples);
      out.gradient = std::move(r.gradient);
      out.objective = r.objective;
      out.ess_sum = r.mean_ess * static_cast<double>(batch.size());
      out.max_weight = r.max_weight_fraction;
      break;
    }
  }
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  // Fisher-Yates with an explicit bounded draw so the order does not depend
  // on the standard library's shuffle.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
  }
  return perm;
}

constexpr std::uint64_t kShuffleStream = 0xFFFFFFFFull;

}  // namespace

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& train_set, const Dataset& valid_set,
                        std::size_t vocab_size, const EpochCallback<Real>& on_epoch) {
  config.validate();
  if (train_set.empty() || valid_set.empty()) throw ConfigError("training and validation sets must be non-empty");
  if (train_set.context_size() != valid_set.context_size()) {
    throw ConfigError("training and validation sets use different context sizes");
  }
  for (const auto* set : {&train_set, &valid_set}) {
    if (*set->max_id() >= vocab_size) throw ConfigError("dataset references ids outside the vocabulary");
  }

  const auto counts = unigram_counts(train_set, vocab_size);
  InitOptions init;
  init.vocab_size = vocab_size;
  init.dim = config.dim;
  init.context_size = train_set.context_size();
  init.matrix_mode = config.matrix_mode;
  init.init_scale = config.init_scale;
  init.seed = config.seed;
  if (config.bias_from_unigram) init.counts = counts;

  TrainResult<Real> result{init_params<Real>(init), NormalizerStore<Real>(config.normalizer_mode), {}, {}};
  auto& params = result.params;
  auto& normalizers = result.normalizers;

  const NoiseDistribution noise = config.noise_kind == NoiseKind::kUniform
                                      ? NoiseDistribution::uniform(vocab_size)
                                      : NoiseDistribution::from_counts(counts, config.noise_smoothing);
  if (config.estimator != EstimatorKind::kMl && !noise.has_full_support()) {
    throw SupportError("noise distribution lacks full support; use smoothing > 0");
  }

  Rng shuffle_rng = worker_rng(config.seed, kShuffleStream);
  std::vector<Rng> rngs;
  for (std::size_t w = 0; w < config.worker_count; ++w) rngs.push_back(worker_rng(config.seed, w));

  const std::string best_path = config.checkpoint_path.empty() ? "" : config.checkpoint_path + ".best";
  std::string last_good;
  double lr = config.initial_lr;
  double prev_ppl = std::numeric_limits<double>::quiet_NaN();
  double best_ppl = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;
  std::size_t k = config.k;
  const bool sampled = config.estimator != EstimatorKind::kMl;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = seeded_permutation(train_set.size(), shuffle_rng);
    double objective = 0;
    double ess_sum = 0;
    double min_weight = std::numeric_limits<double>::infinity();
    double max_weight = -std::numeric_limits<double>::infinity();

    try {
      for (std::size_t begin = 0; begin < order.size(); begin += config.minibatch_size) {
        const std::size_t end = std::min(order.size(), begin + config.minibatch_size);
        const Dataset batch =
            train_set.gather(std::span<const std::size_t>(order.data() + begin, end - begin));

        // Workers take contiguous slices and merge in index order.
        const std::size_t workers = std::min(config.worker_count, batch.size());
        std::vector<Partial<Real>> partials(workers);
        std::vector<std::exception_ptr> errors(workers);
        auto work = [&](std::size_t w) {
          try {
            const std::size_t lo = batch.size() * w / workers;
            const std::size_t hi = batch.size() * (w + 1) / workers;
            partials[w] = run_estimator(config, k, params, normalizers, batch.slice(lo, hi), noise, rngs[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        };
        if (workers == 1) {
          work(0);
        } else {
          std::vector<std::thread> threads;
          for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
          for (auto& t : threads) t.join();
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }

        Gradient<Real> gradient = std::move(partials[0].gradient);
        for (std::size_t w = 1; w < workers; ++w) gradient += partials[w].gradient;
        for (const auto& p : partials) {
          objective += p.objective;
          ess_sum += p.ess_sum;
          min_weight = std::min(min_weight, p.min_weight);
          max_weight = std::max(max_weight, p.max_weight);
        }
        gradient.scale(static_cast<Real>(1.0 / static_cast<double>(batch.size())));
        sgd_step(params, normalizers, gradient, lr, config.weight_penalty);
      }
    } catch (DivergenceError& e) {
      e.epoch = static_cast<int>(epoch);
      e.last_good_checkpoint = last_good;
      throw;
    } catch (const DegenerateWeightsError& e) {
      DivergenceError div(std::string(to_string(config.estimator)) + " diverged: " + e.what(),
                          "importance weights");
      div.epoch = static_cast<int>(epoch);
      div.last_good_checkpoint = last_good;
      throw div;
    }

    const double ppl = perplexity(params, valid_set);
    if (!std::isfinite(ppl)) {
      DivergenceError div("validation perplexity is not finite", "perplexity");
      div.epoch = static_cast<int>(epoch);
      div.last_good_checkpoint = last_good;
      throw div;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_objective = objective / static_cast<double>(train_set.size());
    record.valid_ppl = ppl;
    record.learning_rate = lr;
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record.mean_ess = config.estimator == EstimatorKind::kIs ? ess_sum / static_cast<double>(train_set.size())
                                                             : std::numeric_limits<double>::quiet_NaN();
    record.min_weight = config.estimator == EstimatorKind::kNce ? min_weight
                                                                : std::numeric_limits<double>::quiet_NaN();
    record.max_weight = sampled ? max_weight : std::numeric_limits<double>::quiet_NaN();
    record.k = sampled ? k : 0;
    result.history.epochs.push_back(record);

    if (ppl < best_ppl) {
      best_ppl = ppl;
      since_improvement = 0;
      if (!best_path.empty()) {
        save_checkpoint(best_path, params, normalizers);
        last_good = best_path;
      }
    } else {
      ++since_improvement;
    }
    if (on_epoch) on_epoch(record, params, normalizers);

    if (epoch > 1) lr = update_learning_rate(lr, prev_ppl, ppl);
    prev_ppl = ppl;
    if (config.estimator == EstimatorKind::kIs && config.ess_floor && record.mean_ess < *config.ess_floor) {
      k = static_cast<std::size_t>(std::ceil(static_cast<double>(k) * 1.5));
    }
    if (lr < config.initial_lr * config.min_lr_fraction) {
      result.stop_reason = "learning rate floor";
      break;
    }
    if (since_improvement >= config.patience) {
      result.stop_reason = "no validation improvement for " + std::to_string(config.patience) + " epochs";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max epochs";
  if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, params, normalizers);
  return result;
}

template <typename Real>
TrainResult<Real> train(const TrainConfig& config, const Dataset& train_set, const Dataset& valid_set,
                        const Vocabulary& vocab, const EpochCallback<Real>& on_epoch) {
  return train<Real>(config, train_set, valid_set, vocab.size(), on_epoch);
}

template <typename Real>
BenchmarkResult benchmark_update(const LblParams<Real>& params, EstimatorKind kind, std::size_t k,
                                 const Dataset& batch, const NoiseDistribution& noise, std::size_t repetitions,
                                 std::uint64_t seed) {
  LblParams<Real> work = params;
  NormalizerStore<Real> normalizers(NormalizerMode::kFixedOne);
  TrainConfig config;
  config.estimator = kind;
  config.k = k;
  Rng rng = worker_rng(seed, 0);
  auto once = [&] {
    auto partial = run_estimator(config, k, work, normalizers, batch, noise, rng);
    partial.gradient.scale(static_cast<Real>(1.0 / static_cast<double>(batch.size())));
    sgd_step(work, normalizers, partial.gradient, 1e-6, 0.0);
  };
  once();  // warm-up
  BenchmarkResult result;
  for (std::size_t r = 0; r < std::max<std::size_t>(repetitions, 1); ++r) {
    const auto start = std::chrono::steady_clock::now();
    once();
    result.samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  auto sorted = result.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  result.median_seconds = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return result;
}

#define NCELM_INSTANTIATE(Real)                                                                        \
  template void sgd_step(LblParams<Real>&, NormalizerStore<Real>&, const Gradient<Real>&, double, double); \
  template TrainResult<Real> train(const TrainConfig&, const Dataset&, const Dataset&, std::size_t,      \
                                   const EpochCallback<Real>&);                                          \
  template TrainResult<Real> train(const TrainConfig&, const Dataset&, const Dataset&, const Vocabulary&, \
                                   const EpochCallback<Real>&);                                          \
  template BenchmarkResult benchmark_update(const LblParams<Real>&, EstimatorKind, std::size_t,          \
                                            const Dataset&, const NoiseDistribution&, std::size_t,       \
                                            std::uint64_t);

NCELM_INSTANTIATE(float)
NCELM_INSTANTIATE(double)
#undef NCELM_INSTANTIATE

}  // namespace ncelm
