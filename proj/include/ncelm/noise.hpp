#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ncelm/types.hpp"

namespace ncelm {

enum class NoiseKind { kUnigram, kUniform };

// Fixed discrete distribution over word ids with O(1) sampling through a
// Walker/Vose alias table. Serves as the NCE noise distribution and as the
// importance-sampling proposal.
class NoiseDistribution {
 public:
  // probs[i] = (counts[i] + smoothing) / sum_j (counts[j] + smoothing).
  // Throws ConfigError when the total mass is zero or smoothing < 0.
  static NoiseDistribution from_counts(std::span<const std::uint64_t> counts, double smoothing);
  static NoiseDistribution uniform(std::size_t vocab_size);
  // Normalizes arbitrary non-negative weights.
  static NoiseDistribution from_weights(std::span<const double> weights, NoiseKind kind);

  std::size_t size() const { return probs_.size(); }
  NoiseKind kind() const { return kind_; }
  const std::vector<double>& probs() const { return probs_; }
  double prob(WordId w) const { return probs_.at(w); }

  // Throws SupportError when probs[w] == 0.
  double log_prob(WordId w) const;

  WordId sample(Rng& rng) const {
    const double x = uniform01(rng) * static_cast<double>(threshold_.size());
    const auto slot = static_cast<std::size_t>(x);
    return (x - static_cast<double>(slot)) < threshold_[slot] ? static_cast<WordId>(slot)
                                                               : alias_[slot];
  }

  // Mass each id receives from the alias table: its own slot's keep
  // probability plus all slots aliasing to it, divided by V.
  std::vector<double> reconstructed_probs() const;

  bool has_full_support() const;

 private:
  NoiseDistribution(std::vector<double> probs, NoiseKind kind);
  void build_alias_table();

  std::vector<double> probs_;
  std::vector<double> log_probs_;
  NoiseKind kind_;
  std::vector<double> threshold_;
  std::vector<WordId> alias_;
};

}  // namespace ncelm
