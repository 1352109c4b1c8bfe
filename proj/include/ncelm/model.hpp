#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncelm/types.hpp"

namespace ncelm {

template <typename Real>
class Gradient;

// Log-bilinear model parameters.
//
// The predicted representation of a context h = (w_1 .. w_n) is
//   qhat = sum_i C_i r_{w_i}
// and the score of word w is s(w, h) = qhat . q_w + b_w. In diagonal mode each
// C_i is stored as a d x 1 column of per-dimension scales.
template <typename Real>
struct LblParams {
  Matrix<Real> context_table;               // R, V x d
  Matrix<Real> target_table;                // Q, V x d
  std::vector<Matrix<Real>> context_weights;  // C_1 .. C_n
  Vector<Real> bias;                        // b, V
  MatrixMode matrix_mode = MatrixMode::kFull;

  std::size_t vocab_size() const { return static_cast<std::size_t>(target_table.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(target_table.cols()); }
  std::size_t context_size() const { return context_weights.size(); }

  bool all_finite() const;

  // Throws std::out_of_range for ids >= V and ConfigError for a context of
  // the wrong length.
  void check_context(std::span<const WordId> context) const;
};

// Learned per-context log-normalizers c^h. In fixed-one mode every lookup
// returns 0 and updates are ignored.
template <typename Real>
class NormalizerStore {
 public:
  explicit NormalizerStore(NormalizerMode mode = NormalizerMode::kFixedOne) : mode_(mode) {}

  NormalizerMode mode() const { return mode_; }
  Real lookup(std::span<const WordId> context) const;
  void add(std::span<const WordId> context, Real delta);
  void set(std::span<const WordId> context, Real value);
  std::size_t size() const { return table_.size(); }

  // Entries sorted by context, for deterministic serialization.
  std::vector<std::pair<Context, Real>> sorted_entries() const;

  bool operator==(const NormalizerStore&) const = default;

 private:
  NormalizerMode mode_;
  std::unordered_map<Context, Real, ContextHash> table_;
};

struct InitOptions {
  std::size_t vocab_size = 1;
  std::size_t dim = 1;
  std::size_t context_size = 1;
  MatrixMode matrix_mode = MatrixMode::kFull;
  double init_scale = 0.1;
  std::uint64_t seed = 1;
  // Biases start at log-unigram probabilities of these counts (add-one
  // smoothed) when present, zero otherwise.
  std::optional<std::vector<std::uint64_t>> counts;
};

template <typename Real>
LblParams<Real> init_params(const InitOptions& options);

template <typename Real>
Vector<Real> predicted_representation(const LblParams<Real>& params, std::span<const WordId> context);

template <typename Real>
Real score(const LblParams<Real>& params, const Vector<Real>& qhat, WordId w);

// Log of the explicitly normalized distribution over the vocabulary,
// computed in 64-bit with max-subtraction.
template <typename Real>
Eigen::VectorXd log_softmax(const LblParams<Real>& params, std::span<const WordId> context);

template <typename Real>
Eigen::VectorXd full_distribution(const LblParams<Real>& params, std::span<const WordId> context);

// s(w, h) + c^h.
template <typename Real>
double unnormalized_log_prob(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                             std::span<const WordId> context, WordId w);

// Gradient of s(w, h) with respect to every parameter it touches.
template <typename Real>
Gradient<Real> score_gradients(const LblParams<Real>& params, std::span<const WordId> context, WordId w);

// Converts between storage precisions.
template <typename To, typename From>
LblParams<To> cast_params(const LblParams<From>& params);
template <typename To, typename From>
NormalizerStore<To> cast_normalizers(const NormalizerStore<From>& store);

}  // namespace ncelm
