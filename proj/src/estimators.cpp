#include "ncelm/estimators.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "ncelm/error.hpp"

namespace ncelm {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) {
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// sigmoid(u) and log(sigmoid(-u)) from a single exponential.
struct Logistic {
  double weight;
  double log_complement;
};

Logistic logistic(double u) {
  const double e = std::exp(-std::abs(u));
  return {u >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e), -std::max(u, 0.0) - std::log1p(e)};
}

// Predicted representations for a whole batch, plus the gathered context rows
// each position contributed.
template <typename Real>
struct BatchForward {
  Matrix<Real> qhat;                     // B x d
  std::vector<Matrix<Real>> context_rows;  // per position, B x d
};

template <typename Real>
BatchForward<Real> forward(const LblParams<Real>& params, const Dataset& batch) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(params.dim());
  if (batch.context_size() != params.context_size()) {
    throw ConfigError("batch context size does not match the model");
  }
  const WordId V = static_cast<WordId>(params.vocab_size());
  BatchForward<Real> fwd;
  fwd.qhat = Matrix<Real>::Zero(B, d);
  fwd.context_rows.resize(params.context_size());
  for (std::size_t i = 0; i < params.context_size(); ++i) {
    auto& rows = fwd.context_rows[i];
    rows.resize(B, d);
    for (Eigen::Index b = 0; b < B; ++b) {
      const WordId id = batch.context(static_cast<std::size_t>(b))[i];
      if (id >= V) throw std::out_of_range("context id out of range");
      rows.row(b) = params.context_table.row(id);
    }
    if (params.matrix_mode == MatrixMode::kFull) {
      fwd.qhat.noalias() += rows * params.context_weights[i].transpose();
    } else {
      fwd.qhat.array() += rows.array().rowwise() * params.context_weights[i].col(0).transpose().array();
    }
  }
  return fwd;
}

// Propagates d(objective)/d(qhat) into the context matrices and context rows.
template <typename Real>
void backward(const LblParams<Real>& params, const Dataset& batch, const BatchForward<Real>& fwd,
              const Matrix<Real>& dqhat, Gradient<Real>& grad) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  for (std::size_t i = 0; i < params.context_size(); ++i) {
    const auto& rows = fwd.context_rows[i];
    Matrix<Real> drows;
    if (params.matrix_mode == MatrixMode::kFull) {
      grad.context_weights[i].noalias() += dqhat.transpose() * rows;
      drows.noalias() = dqhat * params.context_weights[i];
    } else {
      grad.context_weights[i].col(0) += dqhat.cwiseProduct(rows).colwise().sum().transpose();
      drows = dqhat.array().rowwise() * params.context_weights[i].col(0).transpose().array();
    }
    for (Eigen::Index b = 0; b < B; ++b) {
      grad.context_rows.row(batch.context(static_cast<std::size_t>(b))[i]) += drows.row(b).transpose();
    }
  }
}

template <typename Real>
Gradient<Real> empty_gradient(const LblParams<Real>& params) {
  return Gradient<Real>(params.vocab_size(), params.dim(), params.context_size(), params.matrix_mode);
}

template <typename Real>
double dot_score(const LblParams<Real>& params, const Matrix<Real>& qhat, Eigen::Index b, WordId w) {
  if (w >= params.vocab_size()) throw std::out_of_range("target id out of range");
  return static_cast<double>(qhat.row(b).dot(params.target_table.row(w))) +
         static_cast<double>(params.bias[w]);
}

}  // namespace

NoiseSamples draw_noise_samples(std::size_t batch_size, const NoiseDistribution& noise, std::size_t k,
                                Rng& rng, bool shared) {
  if (k < 1) throw ConfigError("number of noise samples must be at least 1");
  NoiseSamples samples;
  samples.per_example = k;
  samples.shared = shared;
  const std::size_t n = shared ? k : batch_size * k;
  samples.ids.resize(n);
  for (auto& id : samples.ids) id = noise.sample(rng);
  return samples;
}

template <typename Real>
MlResult<Real> ml_evaluate(const LblParams<Real>& params, const Dataset& batch) {
  MlResult<Real> result{empty_gradient(params), 0.0};
  if (batch.empty()) return result;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto V = static_cast<Eigen::Index>(params.vocab_size());
  const auto fwd = forward(params, batch);

  // G = onehot(w) - softmax(scores), B x V.
  Matrix<Real> G = fwd.qhat * params.target_table.transpose();
  G.rowwise() += params.bias.transpose();
  for (Eigen::Index b = 0; b < B; ++b) {
    auto row = G.row(b);
    const WordId w = batch.target(static_cast<std::size_t>(b));
    if (w >= params.vocab_size()) throw std::out_of_range("target id out of range");
    const Real max = row.maxCoeff();
    const double target_score = static_cast<double>(row[w]);
    row.array() = (row.array() - max).exp();
    double z = 0;
    for (Eigen::Index v = 0; v < V; ++v) z += static_cast<double>(row[v]);
    result.log_likelihood += target_score - static_cast<double>(max) - std::log(z);
    row *= static_cast<Real>(-1.0 / z);
    row[w] += Real(1);
  }

  auto& grad = result.gradient;
  grad.target_rows.assign_dense(G.transpose() * fwd.qhat);
  grad.bias.assign_dense(G.colwise().sum().transpose());
  const Matrix<Real> dqhat = G * params.target_table;
  backward(params, batch, fwd, dqhat, grad);
  return result;
}

template <typename Real>
Gradient<Real> ml_gradient(const LblParams<Real>& params, const NormalizerStore<Real>&, const Dataset& batch) {
  return ml_evaluate(params, batch).gradient;
}

template <typename Real>
double ml_objective(const LblParams<Real>& params, const Dataset& batch) {
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += log_softmax(params, batch.context(i))[batch.target(i)];
  }
  return total;
}

template <typename Real>
NceResult<Real> nce_evaluate(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                             const Dataset& batch, const NoiseDistribution& noise,
                             const NoiseSamples& samples) {
  NceResult<Real> result;
  result.gradient = empty_gradient(params);
  if (batch.empty()) return result;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(params.dim());
  const double log_k = std::log(static_cast<double>(samples.per_example));
  const bool per_context = normalizers.mode() == NormalizerMode::kPerContext;
  const auto fwd = forward(params, batch);
  Matrix<Real> dqhat = Matrix<Real>::Zero(B, d);
  auto& grad = result.gradient;

  for (Eigen::Index b = 0; b < B; ++b) {
    const auto ctx = batch.context(static_cast<std::size_t>(b));
    const double log_norm = per_context ? static_cast<double>(normalizers.lookup(ctx)) : 0.0;
    double norm_grad = 0;

    auto accumulate = [&](WordId w, double coef) {
      const auto c = static_cast<Real>(coef);
      dqhat.row(b) += c * params.target_table.row(w);
      grad.target_rows.row(w) += c * fwd.qhat.row(b).transpose();
      grad.bias.row(w)[0] += c;
      norm_grad += coef;
    };

    // log-ratio z = log P(w|h) - log(k P_n(w)); the data posterior is sigmoid(z).
    const WordId w = batch.target(static_cast<std::size_t>(b));
    const double z_data = dot_score(params, fwd.qhat, b, w) + log_norm - log_k - noise.log_prob(w);
    const auto [data_weight, data_term] = logistic(-z_data);
    assert(data_weight >= 0.0 && data_weight <= 1.0);
    result.objective += data_term;
    result.min_weight = std::min(result.min_weight, data_weight);
    result.max_weight = std::max(result.max_weight, data_weight);
    accumulate(w, data_weight);

    for (WordId x : samples.for_example(static_cast<std::size_t>(b))) {
      const double z = dot_score(params, fwd.qhat, b, x) + log_norm - log_k - noise.log_prob(x);
      const auto [weight, term] = logistic(z);
      assert(weight >= 0.0 && weight <= 1.0);
      result.objective += term;
      result.min_weight = std::min(result.min_weight, weight);
      result.max_weight = std::max(result.max_weight, weight);
      accumulate(x, -weight);
    }
    if (per_context) grad.add_normalizer(ctx, static_cast<Real>(norm_grad));
  }
  backward(params, batch, fwd, dqhat, grad);
  return result;
}

template <typename Real>
Gradient<Real> nce_gradient(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                            const Dataset& batch, const NoiseDistribution& noise, std::size_t k, Rng& rng) {
  const auto samples = draw_noise_samples(batch.size(), noise, k, rng);
  return nce_evaluate(params, normalizers, batch, noise, samples).gradient;
}

template <typename Real>
double nce_objective(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                     const Dataset& batch, const NoiseDistribution& noise, const NoiseSamples& samples) {
  const double log_k = std::log(static_cast<double>(samples.per_example));
  double total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto ctx = batch.context(b);
    const WordId w = batch.target(b);
    total += log_sigmoid(unnormalized_log_prob(params, normalizers, ctx, w) - log_k - noise.log_prob(w));
    for (WordId x : samples.for_example(b)) {
      total += log_sigmoid(-(unnormalized_log_prob(params, normalizers, ctx, x) - log_k - noise.log_prob(x)));
    }
  }
  return total;
}

template <typename Real>
double nce_objective(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                     const Dataset& batch, const NoiseDistribution& noise, std::size_t k, Rng& rng) {
  const auto samples = draw_noise_samples(batch.size(), noise, k, rng);
  return nce_objective(params, normalizers, batch, noise, samples);
}

template <typename Real>
Gradient<Real> exact_nce_gradient(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                                  std::span<const double> data_dist, std::span<const WordId> context,
                                  const NoiseDistribution& noise, double k) {
  const std::size_t V = params.vocab_size();
  if (data_dist.size() != V || noise.size() != V) {
    throw ConfigError("data and noise distributions must cover the vocabulary");
  }
  const bool per_context = normalizers.mode() == NormalizerMode::kPerContext;
  const double log_k = std::log(k);
  Gradient<Real> total = empty_gradient(params);
  for (WordId w = 0; w < V; ++w) {
    const double log_model = unnormalized_log_prob(params, normalizers, context, w);
    const double factor = sigmoid(log_k + noise.log_prob(w) - log_model);
    const double coef = factor * (data_dist[w] - std::exp(log_model));
    if (coef == 0.0) continue;
    total.add_scaled(score_gradients(params, context, w), static_cast<Real>(coef));
    if (per_context) total.add_normalizer(context, static_cast<Real>(coef));
  }
  return total;
}

double IsStats::sum_weights() const { return std::exp(log_sum_weights); }

template <typename Real>
IsResult<Real> is_evaluate(const LblParams<Real>& params, const Dataset& batch,
                           const NoiseDistribution& proposal, const NoiseSamples& samples) {
  IsResult<Real> result;
  result.gradient = empty_gradient(params);
  if (batch.empty()) return result;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto d = static_cast<Eigen::Index>(params.dim());
  const auto k = samples.per_example;
  const double log_k = std::log(static_cast<double>(k));
  const auto fwd = forward(params, batch);
  Matrix<Real> dqhat = Matrix<Real>::Zero(B, d);
  auto& grad = result.gradient;
  std::vector<double> log_v(k);

  for (Eigen::Index b = 0; b < B; ++b) {
    auto accumulate = [&](WordId w, double coef) {
      const auto c = static_cast<Real>(coef);
      dqhat.row(b) += c * params.target_table.row(w);
      grad.target_rows.row(w) += c * fwd.qhat.row(b).transpose();
      grad.bias.row(w)[0] += c;
    };

    const auto xs = samples.for_example(static_cast<std::size_t>(b));
    double max_log_v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      log_v[j] = dot_score(params, fwd.qhat, b, xs[j]) - proposal.log_prob(xs[j]);
      max_log_v = std::max(max_log_v, log_v[j]);
    }
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(log_v[j] - max_log_v);
    const double log_sum = max_log_v + std::log(sum);
    if (!std::isfinite(log_sum)) {
      throw DegenerateWeightsError("importance weights are numerically degenerate (log sum " +
                                   std::to_string(log_sum) + ")");
    }

    IsStats stats;
    stats.log_sum_weights = log_sum;
    double sum_sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double normalized = std::exp(log_v[j] - log_sum);
      sum_sq += normalized * normalized;
      stats.max_weight_fraction = std::max(stats.max_weight_fraction, normalized);
      accumulate(xs[j], -normalized);
    }
    stats.ess = 1.0 / sum_sq;

    const WordId w = batch.target(static_cast<std::size_t>(b));
    result.objective += dot_score(params, fwd.qhat, b, w) - (log_sum - log_k);
    accumulate(w, 1.0);

    result.mean_ess += stats.ess;
    result.max_weight_fraction = std::max(result.max_weight_fraction, stats.max_weight_fraction);
    result.per_example.push_back(stats);
  }
  result.mean_ess /= static_cast<double>(B);
  backward(params, batch, fwd, dqhat, grad);
  return result;
}

template <typename Real>
std::pair<Gradient<Real>, IsStats> is_gradient(const LblParams<Real>& params, const NormalizerStore<Real>&,
                                               const Dataset& batch, const NoiseDistribution& proposal,
                                               std::size_t k, Rng& rng) {
  const auto samples = draw_noise_samples(batch.size(), proposal, k, rng);
  auto result = is_evaluate(params, batch, proposal, samples);
  IsStats summary;
  summary.ess = result.mean_ess;
  summary.max_weight_fraction = result.max_weight_fraction;
  for (const auto& s : result.per_example) summary.log_sum_weights += s.log_sum_weights;
  if (!result.per_example.empty()) summary.log_sum_weights /= static_cast<double>(result.per_example.size());
  return {std::move(result.gradient), summary};
}

template <typename Real>
double is_objective(const LblParams<Real>& params, const Dataset& batch, const NoiseDistribution& proposal,
                    const NoiseSamples& samples) {
  const double log_k = std::log(static_cast<double>(samples.per_example));
  double total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto ctx = batch.context(b);
    const auto qhat = predicted_representation(params, ctx);
    std::vector<double> log_v;
    for (WordId x : samples.for_example(b)) {
      log_v.push_back(static_cast<double>(score(params, qhat, x)) - proposal.log_prob(x));
    }
    const double max = *std::max_element(log_v.begin(), log_v.end());
    double sum = 0;
    for (double lv : log_v) sum += std::exp(lv - max);
    total += static_cast<double>(score(params, qhat, batch.target(b))) - (max + std::log(sum) - log_k);
  }
  return total;
}

template <typename Real>
void update_normalizers(const Gradient<Real>& gradient, NormalizerStore<Real>& normalizers,
                        double learning_rate) {
  if (normalizers.mode() == NormalizerMode::kFixedOne) return;
  for (const auto& [ctx, g] : gradient.normalizers) {
    normalizers.add(ctx, static_cast<Real>(learning_rate * static_cast<double>(g)));
  }
}

#define NCELM_INSTANTIATE(Real)                                                                      \
  template MlResult<Real> ml_evaluate(const LblParams<Real>&, const Dataset&);                       \
  template Gradient<Real> ml_gradient(const LblParams<Real>&, const NormalizerStore<Real>&, const Dataset&); \
  template double ml_objective(const LblParams<Real>&, const Dataset&);                              \
  template NceResult<Real> nce_evaluate(const LblParams<Real>&, const NormalizerStore<Real>&,         \
                                        const Dataset&, const NoiseDistribution&, const NoiseSamples&); \
  template Gradient<Real> nce_gradient(const LblParams<Real>&, const NormalizerStore<Real>&,          \
                                       const Dataset&, const NoiseDistribution&, std::size_t, Rng&);  \
  template double nce_objective(const LblParams<Real>&, const NormalizerStore<Real>&, const Dataset&, \
                                const NoiseDistribution&, const NoiseSamples&);                      \
  template double nce_objective(const LblParams<Real>&, const NormalizerStore<Real>&, const Dataset&, \
                                const NoiseDistribution&, std::size_t, Rng&);                        \
  template Gradient<Real> exact_nce_gradient(const LblParams<Real>&, const NormalizerStore<Real>&,    \
                                             std::span<const double>, std::span<const WordId>,       \
                                             const NoiseDistribution&, double);                      \
  template IsResult<Real> is_evaluate(const LblParams<Real>&, const Dataset&, const NoiseDistribution&, \
                                      const NoiseSamples&);                                          \
  template std::pair<Gradient<Real>, IsStats> is_gradient(const LblParams<Real>&,                    \
                                                          const NormalizerStore<Real>&, const Dataset&, \
                                                          const NoiseDistribution&, std::size_t, Rng&); \
  template double is_objective(const LblParams<Real>&, const Dataset&, const NoiseDistribution&,     \
                               const NoiseSamples&);                                                 \
  template void update_normalizers(const Gradient<Real>&, NormalizerStore<Real>&, double);

NCELM_INSTANTIATE(float)
NCELM_INSTANTIATE(double)
#undef NCELM_INSTANTIATE

}  // namespace ncelm
