#include "ncelm/gradient.hpp"

#include <cmath>

namespace ncelm {

template <typename Real>
SparseRows<Real>::SparseRows(std::size_t num_rows, std::size_t width)
    : width_(width), slot_(num_rows, -1) {}

template <typename Real>
typename SparseRows<Real>::RowMap SparseRows<Real>::row(WordId id) {
  auto& slot = slot_.at(id);
  if (slot < 0) {
    slot = static_cast<std::int32_t>(ids_.size());
    ids_.push_back(id);
    values_.resize(values_.size() + width_, Real(0));
  }
  return RowMap(values_.data() + static_cast<std::size_t>(slot) * width_,
                static_cast<Eigen::Index>(width_));
}

template <typename Real>
typename SparseRows<Real>::ConstRowMap SparseRows<Real>::row(WordId id) const {
  const auto slot = slot_.at(id);
  return ConstRowMap(values_.data() + static_cast<std::size_t>(slot) * width_,
                     static_cast<Eigen::Index>(width_));
}

template <typename Real>
Real SparseRows<Real>::get(WordId id, std::size_t j) const {
  const auto slot = slot_.at(id);
  return slot < 0 ? Real(0) : values_[static_cast<std::size_t>(slot) * width_ + j];
}

template <typename Real>
void SparseRows<Real>::assign_dense(Matrix<Real> values) {
  width_ = static_cast<std::size_t>(values.cols());
  const auto rows = static_cast<std::size_t>(values.rows());
  slot_.resize(rows);
  ids_.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    slot_[i] = static_cast<std::int32_t>(i);
    ids_[i] = static_cast<WordId>(i);
  }
  values_.assign(values.data(), values.data() + values.size());
}

template <typename Real>
void SparseRows<Real>::add(const SparseRows& other, Real scale) {
  for (WordId id : other.ids_) {
    row(id) += scale * other.row(id);
  }
}

template <typename Real>
void SparseRows<Real>::scale(Real factor) {
  for (auto& v : values_) v *= factor;
}

template <typename Real>
bool SparseRows<Real>::all_finite() const {
  for (Real v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename Real>
Gradient<Real>::Gradient(std::size_t vocab_size, std::size_t dim, std::size_t context_size,
                         MatrixMode mode)
    : context_rows(vocab_size, dim), target_rows(vocab_size, dim), bias(vocab_size, 1) {
  const auto d = static_cast<Eigen::Index>(dim);
  context_weights.assign(context_size, Matrix<Real>::Zero(d, mode == MatrixMode::kFull ? d : 1));
}

template <typename Real>
Real Gradient<Real>::normalizer_at(std::span<const WordId> context) const {
  auto it = normalizers.find(Context(context.begin(), context.end()));
  return it == normalizers.end() ? Real(0) : it->second;
}

template <typename Real>
void Gradient<Real>::add_normalizer(std::span<const WordId> context, Real delta) {
  normalizers[Context(context.begin(), context.end())] += delta;
}

template <typename Real>
Gradient<Real>& Gradient<Real>::operator+=(const Gradient& other) {
  add_scaled(other, Real(1));
  return *this;
}

template <typename Real>
void Gradient<Real>::add_scaled(const Gradient& other, Real factor) {
  context_rows.add(other.context_rows, factor);
  target_rows.add(other.target_rows, factor);
  bias.add(other.bias, factor);
  for (std::size_t i = 0; i < context_weights.size(); ++i) {
    context_weights[i] += factor * other.context_weights[i];
  }
  for (const auto& [ctx, g] : other.normalizers) normalizers[ctx] += factor * g;
}

template <typename Real>
void Gradient<Real>::scale(Real factor) {
  context_rows.scale(factor);
  target_rows.scale(factor);
  bias.scale(factor);
  for (auto& c : context_weights) c *= factor;
  for (auto& [ctx, g] : normalizers) g *= factor;
}

template <typename Real>
bool Gradient<Real>::all_finite() const {
  if (!context_rows.all_finite() || !target_rows.all_finite() || !bias.all_finite()) return false;
  for (const auto& c : context_weights) {
    if (!c.allFinite()) return false;
  }
  for (const auto& [ctx, g] : normalizers) {
    if (!std::isfinite(g)) return false;
  }
  return true;
}

template class SparseRows<float>;
template class SparseRows<double>;
template class Gradient<float>;
template class Gradient<double>;

}  // namespace ncelm
