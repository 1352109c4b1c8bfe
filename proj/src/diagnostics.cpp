#include "ncelm/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "ncelm/error.hpp"
#include "ncelm/estimators.hpp"
#include "ncelm/eval.hpp"
#include "ncelm/synthetic.hpp"

namespace ncelm {

namespace {

std::size_t table_size(const LblParams<double>& p) { return p.vocab_size() * p.dim(); }

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + std::min(hi - lo, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1)));
}

}  // namespace

std::size_t num_coordinates(const LblParams<double>& params) {
  std::size_t n = 2 * table_size(params) + params.vocab_size();
  for (const auto& c : params.context_weights) n += static_cast<std::size_t>(c.size());
  return n;
}

double& coordinate(LblParams<double>& params, std::size_t index) {
  const std::size_t table = table_size(params);
  if (index < table) return params.context_table.data()[index];
  index -= table;
  if (index < table) return params.target_table.data()[index];
  index -= table;
  for (auto& c : params.context_weights) {
    const auto size = static_cast<std::size_t>(c.size());
    if (index < size) return c.data()[index];
    index -= size;
  }
  return params.bias.data()[index];
}

double gradient_coordinate(const Gradient<double>& gradient, const LblParams<double>& params, std::size_t index) {
  const std::size_t d = params.dim();
  const std::size_t table = table_size(params);
  if (index < table) return gradient.context_rows.get(static_cast<WordId>(index / d), index % d);
  index -= table;
  if (index < table) return gradient.target_rows.get(static_cast<WordId>(index / d), index % d);
  index -= table;
  for (const auto& c : gradient.context_weights) {
    const auto size = static_cast<std::size_t>(c.size());
    if (index < size) return c.data()[index];
    index -= size;
  }
  return gradient.bias_at(static_cast<WordId>(index));
}

Eigen::VectorXd flatten(const Gradient<double>& gradient, const LblParams<double>& params) {
  const auto n = num_coordinates(params);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = gradient_coordinate(gradient, params, i);
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

double max_fd_error(LblParams<double>& params, NormalizerStore<double>& normalizers,
                    const Gradient<double>& gradient,
                    const std::function<double(const LblParams<double>&, const NormalizerStore<double>&)>& objective,
                    const std::vector<Context>& contexts, double step) {
  double worst = 0;
  const auto n = num_coordinates(params);
  for (std::size_t i = 0; i < n; ++i) {
    double& x = coordinate(params, i);
    const double saved = x;
    x = saved + step;
    const double up = objective(params, normalizers);
    x = saved - step;
    const double down = objective(params, normalizers);
    x = saved;
    worst = std::max(worst, relative_error(gradient_coordinate(gradient, params, i), (up - down) / (2 * step)));
  }
  if (normalizers.mode() == NormalizerMode::kPerContext) {
    for (const auto& ctx : contexts) {
      const double saved = normalizers.lookup(ctx);
      normalizers.set(ctx, saved + step);
      const double up = objective(params, normalizers);
      normalizers.set(ctx, saved - step);
      const double down = objective(params, normalizers);
      normalizers.set(ctx, saved);
      worst = std::max(worst, relative_error(gradient.normalizer_at(ctx), (up - down) / (2 * step)));
    }
  }
  return worst;
}

RandomInstance random_instance(Rng& rng, MatrixMode mode, std::size_t max_vocab, std::size_t max_dim,
                               std::size_t max_context, std::size_t batch_size) {
  InitOptions init;
  init.vocab_size = uniform_index(rng, 5, max_vocab);
  init.dim = uniform_index(rng, 1, max_dim);
  init.context_size = uniform_index(rng, 1, max_context);
  init.matrix_mode = mode;
  init.init_scale = 0.5;
  init.seed = rng();
  auto params = init_params<double>(init);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& c : params.context_weights) {
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = 0.7 * normal(rng);
  }
  for (Eigen::Index w = 0; w < params.bias.size(); ++w) params.bias[w] = normal(rng);

  const auto V = init.vocab_size;
  Dataset batch(init.context_size);
  Context ctx(init.context_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    for (auto& id : ctx) id = static_cast<WordId>(uniform_index(rng, 0, V - 1));
    batch.add(ctx, static_cast<WordId>(uniform_index(rng, 0, V - 1)));
  }
  NormalizerStore<double> normalizers(NormalizerMode::kPerContext);
  for (std::size_t b = 0; b < batch.size(); ++b) normalizers.set(batch.context(b), normal(rng));

  std::vector<double> weights(V);
  for (auto& w : weights) w = 0.1 + uniform01(rng);
  auto noise = NoiseDistribution::from_weights(weights, NoiseKind::kUnigram);
  return RandomInstance{std::move(params), std::move(normalizers), std::move(batch), std::move(noise)};
}

bool GradCheckReport::passed() const {
  return ml_error < tolerance && nce_error < tolerance && is_error < tolerance && normalizer_error < tolerance;
}

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances, std::size_t k, double tolerance) {
  Rng rng(seed);
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t n = 0; n < instances; ++n) {
    const auto mode = n % 2 == 0 ? MatrixMode::kFull : MatrixMode::kDiagonal;
    auto inst = random_instance(rng, mode);
    std::vector<Context> contexts;
    for (std::size_t b = 0; b < inst.batch.size(); ++b) {
      const auto c = inst.batch.context(b);
      contexts.emplace_back(c.begin(), c.end());
    }
    NormalizerStore<double> fixed(NormalizerMode::kFixedOne);

    const auto ml = ml_evaluate(inst.params, inst.batch);
    report.ml_error = std::max(
        report.ml_error,
        max_fd_error(inst.params, fixed, ml.gradient,
                     [&](const auto& p, const auto&) { return ml_objective(p, inst.batch); }, {}));

    // NCE with learned normalizers covers both theta and c^h.
    const auto samples = draw_noise_samples(inst.batch.size(), inst.noise, k, rng);
    const auto nce = nce_evaluate(inst.params, inst.normalizers, inst.batch, inst.noise, samples);
    auto nce_objective_fn = [&](const auto& p, const auto& s) {
      return nce_objective(p, s, inst.batch, inst.noise, samples);
    };
    report.nce_error = std::max(report.nce_error,
                                max_fd_error(inst.params, fixed, nce_evaluate(inst.params, fixed, inst.batch,
                                                                              inst.noise, samples).gradient,
                                             nce_objective_fn, {}));
    Gradient<double> normalizer_only = nce.gradient;
    report.normalizer_error = std::max(
        report.normalizer_error, max_fd_error(inst.params, inst.normalizers, normalizer_only, nce_objective_fn, contexts));

    const auto is = is_evaluate(inst.params, inst.batch, inst.noise, samples);
    report.is_error = std::max(
        report.is_error,
        max_fd_error(inst.params, fixed, is.gradient,
                     [&](const auto& p, const auto&) { return is_objective(p, inst.batch, inst.noise, samples); },
                     {}));
    ++report.instances;
  }
  return report;
}

GradCheckReport gradcheck_params(const LblParams<double>& source, std::uint64_t seed, std::size_t max_coordinates,
                                 double tolerance) {
  Rng rng(seed);
  auto params = source;
  const auto V = params.vocab_size();
  Dataset batch(params.context_size());
  Context ctx(params.context_size());
  for (int b = 0; b < 4; ++b) {
    for (auto& id : ctx) id = static_cast<WordId>(uniform_index(rng, 0, V - 1));
    batch.add(ctx, static_cast<WordId>(uniform_index(rng, 0, V - 1)));
  }
  const auto noise = NoiseDistribution::uniform(V);
  const auto samples = draw_noise_samples(batch.size(), noise, 5, rng);
  NormalizerStore<double> fixed;
  const auto ml = ml_evaluate(params, batch).gradient;
  const auto nce = nce_evaluate(params, fixed, batch, noise, samples).gradient;
  const auto is = is_evaluate(params, batch, noise, samples).gradient;

  GradCheckReport report;
  report.tolerance = tolerance;
  report.instances = 1;
  const double step = 1e-5;
  const auto n = num_coordinates(params);
  // Coordinates the batch actually touches first, then random others.
  std::vector<std::size_t> coords;
  const std::size_t d = params.dim();
  const std::size_t table = V * d;
  for (std::size_t b = 0; b < batch.size() && coords.size() < max_coordinates; ++b) {
    for (std::size_t j = 0; j < d; ++j) {
      coords.push_back(batch.context(b)[0] * d + j);
      coords.push_back(table + batch.target(b) * d + j);
    }
    coords.push_back(n - V + batch.target(b));
  }
  while (coords.size() < std::min(max_coordinates, n)) coords.push_back(uniform_index(rng, 0, n - 1));

  auto check = [&](const Gradient<double>& g, auto objective) {
    double worst = 0;
    for (auto i : coords) {
      double& x = coordinate(params, i);
      const double saved = x;
      x = saved + step;
      const double up = objective();
      x = saved - step;
      const double down = objective();
      x = saved;
      worst = std::max(worst, relative_error(gradient_coordinate(g, params, i), (up - down) / (2 * step)));
    }
    return worst;
  };
  report.ml_error = check(ml, [&] { return ml_objective(params, batch); });
  report.nce_error = check(nce, [&] { return nce_objective(params, fixed, batch, noise, samples); });
  report.is_error = check(is, [&] { return is_objective(params, batch, noise, samples); });
  return report;
}

NceLimitReport run_nce_limit(std::uint64_t seed, std::size_t instances, std::vector<double> ks) {
  Rng rng(seed);
  NceLimitReport report;
  report.ks = ks;
  for (std::size_t n = 0; n < instances; ++n) {
    auto inst = random_instance(rng, n % 2 == 0 ? MatrixMode::kFull : MatrixMode::kDiagonal);
    const auto V = inst.params.vocab_size();
    const auto ctx_span = inst.batch.context(0);
    const Context ctx(ctx_span.begin(), ctx_span.end());

    // Normalized model: c^h = -log Z(h).
    NormalizerStore<double> normalizers(NormalizerMode::kPerContext);
    const auto qhat = predicted_representation(inst.params, ctx);
    const double log_z = score(inst.params, qhat, 0) - log_softmax(inst.params, ctx)[0];
    normalizers.set(ctx, -log_z);

    std::vector<double> data(V);
    double total = 0;
    for (auto& p : data) {
      p = -std::log(1.0 - uniform01(rng));  // Dirichlet(1, ..., 1)
      total += p;
    }
    for (auto& p : data) p /= total;

    // Expected ML gradient through the batched exact-likelihood path.
    Gradient<double> ml(V, inst.params.dim(), inst.params.context_size(), inst.params.matrix_mode);
    for (WordId w = 0; w < V; ++w) {
      Dataset single(ctx.size());
      single.add(ctx, w);
      ml.add_scaled(ml_evaluate(inst.params, single).gradient, data[w]);
    }
    const Eigen::VectorXd ml_flat = flatten(ml, inst.params);

    std::vector<double> gaps;
    for (double k : ks) {
      const auto nce = exact_nce_gradient(inst.params, normalizers, data, ctx, inst.noise, k);
      Eigen::VectorXd diff = flatten(nce, inst.params) - ml_flat;
      const double normalizer_gap = nce.normalizer_at(ctx);
      const double gap = std::sqrt(diff.squaredNorm() + normalizer_gap * normalizer_gap) / ml_flat.norm();
      gaps.push_back(gap);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) monotone = monotone && gaps[i] <= gaps[i - 1];
    if (!monotone) ++report.non_monotone;
    report.worst_final_gap = std::max(report.worst_final_gap, gaps.back());
    report.gaps.push_back(std::move(gaps));
  }
  return report;
}

bool StabilityReport::passed() const {
  return (is_diverged || is_max_weight_fraction > 0.95) && nce_completed && nce_min_weight >= 0.0 &&
         nce_max_weight <= 1.0;
}

StabilityReport run_is_stability(std::uint64_t seed, std::size_t epochs) {
  GroundTruthOptions truth_options;
  truth_options.vocab_size = 200;
  truth_options.dim = 8;
  truth_options.context_size = 2;
  truth_options.feature_scale = 1.2;
  truth_options.seed = seed;
  const auto truth = make_ground_truth(truth_options);
  SampleOptions sample;
  sample.num_tokens = 6000;
  sample.seed = seed + 1;
  const auto train_sentences = sample_sentences(truth, sample);
  sample.num_tokens = 1000;
  sample.seed = seed + 2;
  const auto valid_sentences = sample_sentences(truth, sample);
  const auto train_set = extract_pairs(train_sentences, 2, BoundaryMode::kOosPadding);
  const auto valid_set = extract_pairs(valid_sentences, 2, BoundaryMode::kOosPadding);

  TrainConfig config;
  config.k = 5;
  config.noise_kind = NoiseKind::kUniform;
  config.minibatch_size = 50;
  config.initial_lr = 0.5;
  config.max_epochs = epochs;
  config.seed = seed;
  config.dim = 8;
  // A peaked starting model: scores spread over tens of nats.
  config.init_scale = 2.0;
  config.patience = epochs;

  StabilityReport report;
  config.estimator = EstimatorKind::kIs;
  try {
    const auto result = train<double>(config, train_set, valid_set, truth_options.vocab_size);
    report.is_epochs = result.history.epochs.size();
    for (const auto& r : result.history.epochs) {
      report.is_max_weight_fraction = std::max(report.is_max_weight_fraction, r.max_weight);
    }
  } catch (const DivergenceError& e) {
    report.is_diverged = true;
    report.is_message = e.what();
    report.is_epochs = static_cast<std::size_t>(std::max(e.epoch, 0));
  }

  config.estimator = EstimatorKind::kNce;
  try {
    const auto result = train<double>(config, train_set, valid_set, truth_options.vocab_size);
    report.nce_completed = true;
    report.nce_epochs = result.history.epochs.size();
    report.nce_min_weight = 1;
    for (const auto& r : result.history.epochs) {
      report.nce_min_weight = std::min(report.nce_min_weight, r.min_weight);
      report.nce_max_weight = std::max(report.nce_max_weight, r.max_weight);
    }
  } catch (const Error&) {
    report.nce_completed = false;
  }
  return report;
}

SpeedupReport run_speedup_benchmark(std::size_t context_size, std::size_t dim, std::size_t vocab_size,
                                    std::size_t k, MatrixMode mode, std::size_t batch_size,
                                    std::size_t repetitions, std::uint64_t seed) {
  InitOptions init;
  init.vocab_size = vocab_size;
  init.dim = dim;
  init.context_size = context_size;
  init.matrix_mode = mode;
  init.init_scale = 0.1;
  init.seed = seed;
  const auto params = init_params<float>(init);

  Rng rng(seed);
  std::vector<double> weights(vocab_size);
  for (std::size_t w = 0; w < vocab_size; ++w) weights[w] = 1.0 / static_cast<double>(w + 1);
  const auto noise = NoiseDistribution::from_weights(weights, NoiseKind::kUnigram);
  Dataset batch(context_size);
  Context ctx(context_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    for (auto& id : ctx) id = noise.sample(rng);
    batch.add(ctx, noise.sample(rng));
  }

  SpeedupReport report;
  report.predicted = predicted_speedup(static_cast<double>(context_size), static_cast<double>(dim),
                                       static_cast<double>(vocab_size), static_cast<double>(k), mode);
  report.ml_seconds = benchmark_update(params, EstimatorKind::kMl, k, batch, noise, repetitions, seed).median_seconds;
  report.nce_seconds = benchmark_update(params, EstimatorKind::kNce, k, batch, noise, repetitions, seed).median_seconds;
  report.measured = report.ml_seconds / report.nce_seconds;
  report.nce_k1_seconds = benchmark_update(params, EstimatorKind::kNce, 1, batch, noise, repetitions, seed).median_seconds;
  report.nce_k100_seconds =
      benchmark_update(params, EstimatorKind::kNce, 100, batch, noise, repetitions, seed).median_seconds;
  report.sample_count_variation = std::abs(report.nce_k100_seconds - report.nce_k1_seconds) / report.nce_k1_seconds;
  return report;
}

}  // namespace ncelm
