#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ncelm/types.hpp"

namespace ncelm {

// Row-sparse accumulator over a V-row table. Rows materialize (zeroed) on
// first access; `ids()` lists them in first-touch order.
template <typename Real>
class SparseRows {
 public:
  using RowMap = Eigen::Map<Vector<Real>>;
  using ConstRowMap = Eigen::Map<const Vector<Real>>;

  SparseRows() = default;
  SparseRows(std::size_t num_rows, std::size_t width);

  std::size_t num_rows() const { return slot_.size(); }
  std::size_t width() const { return width_; }
  std::size_t touched() const { return ids_.size(); }
  const std::vector<WordId>& ids() const { return ids_; }
  bool contains(WordId id) const { return slot_[id] >= 0; }

  // The returned map is invalidated by the next call that adds a row.
  RowMap row(WordId id);
  ConstRowMap row(WordId id) const;
  // Zero when the row was never touched.
  Real get(WordId id, std::size_t j) const;

  // Takes a full V x width table; every row counts as touched.
  void assign_dense(Matrix<Real> values);

  void add(const SparseRows& other, Real scale = Real(1));
  void scale(Real factor);
  bool all_finite() const;

 private:
  std::size_t width_ = 0;
  std::vector<std::int32_t> slot_;
  std::vector<WordId> ids_;
  std::vector<Real> values_;
};

// Ascent direction for every parameter group of the model plus the
// per-context normalizers. Produced by the estimators and consumed by the
// trainer's update step.
template <typename Real>
class Gradient {
 public:
  Gradient() = default;
  Gradient(std::size_t vocab_size, std::size_t dim, std::size_t context_size, MatrixMode mode);

  SparseRows<Real> context_rows;   // dR
  SparseRows<Real> target_rows;    // dQ
  std::vector<Matrix<Real>> context_weights;  // dC_i, shaped like C_i
  SparseRows<Real> bias;           // db, width 1
  std::unordered_map<Context, Real, ContextHash> normalizers;  // dc^h

  Real bias_at(WordId id) const { return bias.get(id, 0); }
  Real normalizer_at(std::span<const WordId> context) const;
  void add_normalizer(std::span<const WordId> context, Real delta);

  // In-place sum. Per-row floating sums depend only on the order in which
  // partial gradients are merged, so merging workers in index order is
  // reproducible.
  Gradient& operator+=(const Gradient& other);
  void add_scaled(const Gradient& other, Real factor);
  void scale(Real factor);
  bool all_finite() const;
};

}  // namespace ncelm
