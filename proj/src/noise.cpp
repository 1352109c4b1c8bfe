#include "ncelm/noise.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "ncelm/error.hpp"

namespace ncelm {

NoiseDistribution::NoiseDistribution(std::vector<double> probs, NoiseKind kind)
    : probs_(std::move(probs)), kind_(kind) {
  log_probs_.resize(probs_.size());
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    log_probs_[i] = probs_[i] > 0 ? std::log(probs_[i]) : -std::numeric_limits<double>::infinity();
  }
  build_alias_table();
}

NoiseDistribution NoiseDistribution::from_counts(std::span<const std::uint64_t> counts, double smoothing) {
  if (!(smoothing >= 0)) throw ConfigError("smoothing must be non-negative");
  std::vector<double> weights(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) weights[i] = static_cast<double>(counts[i]) + smoothing;
  return from_weights(weights, NoiseKind::kUnigram);
}

NoiseDistribution NoiseDistribution::uniform(std::size_t vocab_size) {
  if (vocab_size < 1) throw ConfigError("uniform distribution needs V >= 1");
  return NoiseDistribution(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)),
                           NoiseKind::kUniform);
}

NoiseDistribution NoiseDistribution::from_weights(std::span<const double> weights, NoiseKind kind) {
  double total = 0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("distribution has zero total mass");
  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
  return NoiseDistribution(std::move(probs), kind);
}

double NoiseDistribution::log_prob(WordId w) const {
  const double lp = log_probs_.at(w);
  if (probs_[w] <= 0) {
    throw SupportError("noise distribution assigns zero probability to word id " + std::to_string(w));
  }
  return lp;
}

bool NoiseDistribution::has_full_support() const {
  for (double p : probs_) {
    if (p <= 0) return false;
  }
  return true;
}

// Vose's construction: scaled probabilities below 1 are paired with ones above
// 1, each small slot keeping its own mass and aliasing the rest to a large id.
void NoiseDistribution::build_alias_table() {
  const std::size_t n = probs_.size();
  threshold_.assign(n, 1.0);
  alias_.resize(n);
  std::iota(alias_.begin(), alias_.end(), WordId{0});

  std::vector<double> scaled(n);
  std::vector<std::size_t> small;
  std::vector<std::size_t> large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probs_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    threshold_[s] = scaled[s];
    alias_[s] = static_cast<WordId>(l);
    // Subtract as (a + b) - 1 to limit cancellation.
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (auto i : small) threshold_[i] = 1.0;
  for (auto i : large) threshold_[i] = 1.0;
}

std::vector<double> NoiseDistribution::reconstructed_probs() const {
  const std::size_t n = threshold_.size();
  std::vector<double> mass(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    mass[i] += threshold_[i];
    mass[alias_[i]] += 1.0 - threshold_[i];
  }
  for (auto& m : mass) m /= static_cast<double>(n);
  return mass;
}

}  // namespace ncelm
