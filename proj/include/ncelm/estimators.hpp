#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ncelm/corpus.hpp"
#include "ncelm/gradient.hpp"
#include "ncelm/model.hpp"
#include "ncelm/noise.hpp"

namespace ncelm {

// Gradient estimators for the log-likelihood of a minibatch. Every gradient
// returned here is an ascent direction summed (not averaged) over the batch.

// k noise ids per example, stored example-major.
struct NoiseSamples {
  std::size_t per_example = 0;
  std::vector<WordId> ids;
  // When true one set of samples is reused by every example.
  bool shared = false;

  std::span<const WordId> for_example(std::size_t b) const {
    return shared ? std::span<const WordId>(ids.data(), per_example)
                  : std::span<const WordId>(ids.data() + b * per_example, per_example);
  }
};

NoiseSamples draw_noise_samples(std::size_t batch_size, const NoiseDistribution& noise, std::size_t k,
                                Rng& rng, bool shared = false);

// Exact maximum-likelihood gradient.

template <typename Real>
struct MlResult {
  Gradient<Real> gradient;
  double log_likelihood = 0;  // sum over the batch, natural log
};

template <typename Real>
MlResult<Real> ml_evaluate(const LblParams<Real>& params, const Dataset& batch);

// Per-context normalizer components are always zero: the model is explicitly
// normalized.
template <typename Real>
Gradient<Real> ml_gradient(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                           const Dataset& batch);

// Sum of log P(w|h) over the batch, using the explicitly normalized
// distribution one example at a time.
template <typename Real>
double ml_objective(const LblParams<Real>& params, const Dataset& batch);

// Noise-contrastive estimation.
//
// The unnormalized model is P(w|h) = exp(s(w,h) + c^h). For an observation w
// with noise samples x_1..x_k the posterior weights are
//   data:  k P_n(w) / (P(w|h) + k P_n(w))
//   noise: P(x|h) / (P(x|h) + k P_n(x))
// both evaluated as logistic functions of log-ratios.

template <typename Real>
struct NceResult {
  Gradient<Real> gradient;
  double objective = 0;  // sum over the batch of the sampled J^{h,w}
  double min_weight = 1;
  double max_weight = 0;
};

template <typename Real>
NceResult<Real> nce_evaluate(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                             const Dataset& batch, const NoiseDistribution& noise,
                             const NoiseSamples& samples);

template <typename Real>
Gradient<Real> nce_gradient(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                            const Dataset& batch, const NoiseDistribution& noise, std::size_t k,
                            Rng& rng);

// Objective under given samples; computed per word through the scalar model
// functions so that it can serve as an independent check on the gradient.
template <typename Real>
double nce_objective(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                     const Dataset& batch, const NoiseDistribution& noise, const NoiseSamples& samples);

template <typename Real>
double nce_objective(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                     const Dataset& batch, const NoiseDistribution& noise, std::size_t k, Rng& rng);

// Expected NCE gradient for a single context, by enumerating the vocabulary:
//   sum_w [k P_n(w) / (P(w|h) + k P_n(w))] (P_d(w) - P(w|h)) d/dtheta log P(w|h)
template <typename Real>
Gradient<Real> exact_nce_gradient(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                                  std::span<const double> data_dist, std::span<const WordId> context,
                                  const NoiseDistribution& noise, double k);

// Self-normalized importance sampling.

struct IsStats {
  double log_sum_weights = 0;  // log of sum_j exp(s(x_j,h)) / Q(x_j)
  double ess = 0;              // (sum v)^2 / sum v^2
  double max_weight_fraction = 0;

  double sum_weights() const;
};

template <typename Real>
struct IsResult {
  Gradient<Real> gradient;
  std::vector<IsStats> per_example;
  double objective = 0;  // sum over the batch of s(w,h) - log((1/k) sum_j v(x_j))
  double mean_ess = 0;
  double max_weight_fraction = 0;
};

template <typename Real>
IsResult<Real> is_evaluate(const LblParams<Real>& params, const Dataset& batch,
                           const NoiseDistribution& proposal, const NoiseSamples& samples);

template <typename Real>
std::pair<Gradient<Real>, IsStats> is_gradient(const LblParams<Real>& params,
                                               const NormalizerStore<Real>& normalizers,
                                               const Dataset& batch, const NoiseDistribution& proposal,
                                               std::size_t k, Rng& rng);

// The function whose gradient is_evaluate returns under fixed samples.
template <typename Real>
double is_objective(const LblParams<Real>& params, const Dataset& batch, const NoiseDistribution& proposal,
                    const NoiseSamples& samples);

// Gradient ascent on c^h. No-op in fixed-one mode.
template <typename Real>
void update_normalizers(const Gradient<Real>& gradient, NormalizerStore<Real>& normalizers,
                        double learning_rate);

}  // namespace ncelm
