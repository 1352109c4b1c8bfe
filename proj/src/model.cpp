#include "ncelm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ncelm/error.hpp"
#include "ncelm/gradient.hpp"

namespace ncelm {

template <typename Real>
bool LblParams<Real>::all_finite() const {
  if (!context_table.allFinite() || !target_table.allFinite() || !bias.allFinite()) return false;
  return std::all_of(context_weights.begin(), context_weights.end(),
                     [](const Matrix<Real>& c) { return c.allFinite(); });
}

template <typename Real>
void LblParams<Real>::check_context(std::span<const WordId> context) const {
  if (context.size() != context_size()) {
    throw ConfigError("context has " + std::to_string(context.size()) + " words, model expects " +
                      std::to_string(context_size()));
  }
  for (WordId id : context) {
    if (id >= vocab_size()) {
      throw std::out_of_range("word id " + std::to_string(id) + " out of range for V=" +
                              std::to_string(vocab_size()));
    }
  }
}

template <typename Real>
Real NormalizerStore<Real>::lookup(std::span<const WordId> context) const {
  if (mode_ == NormalizerMode::kFixedOne) return Real(0);
  auto it = table_.find(Context(context.begin(), context.end()));
  return it == table_.end() ? Real(0) : it->second;
}

template <typename Real>
void NormalizerStore<Real>::add(std::span<const WordId> context, Real delta) {
  if (mode_ == NormalizerMode::kFixedOne) return;
  table_[Context(context.begin(), context.end())] += delta;
}

template <typename Real>
void NormalizerStore<Real>::set(std::span<const WordId> context, Real value) {
  if (mode_ == NormalizerMode::kFixedOne) return;
  table_[Context(context.begin(), context.end())] = value;
}

template <typename Real>
std::vector<std::pair<Context, Real>> NormalizerStore<Real>::sorted_entries() const {
  std::vector<std::pair<Context, Real>> entries(table_.begin(), table_.end());
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return entries;
}

template <typename Real>
LblParams<Real> init_params(const InitOptions& options) {
  if (options.vocab_size < 1 || options.dim < 1 || options.context_size < 1) {
    throw ConfigError("vocab_size, dim and context_size must be positive");
  }
  if (!(options.init_scale >= 0)) throw ConfigError("init_scale must be non-negative");

  const auto V = static_cast<Eigen::Index>(options.vocab_size);
  const auto d = static_cast<Eigen::Index>(options.dim);
  LblParams<Real> params;
  params.matrix_mode = options.matrix_mode;
  params.context_table.resize(V, d);
  params.target_table.resize(V, d);

  Rng rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Matrix<Real>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<Real>(options.init_scale * normal(rng));
    }
  };
  fill(params.context_table);
  fill(params.target_table);

  params.context_weights.assign(options.context_size, options.matrix_mode == MatrixMode::kFull
                                                          ? Matrix<Real>(Matrix<Real>::Identity(d, d))
                                                          : Matrix<Real>(Matrix<Real>::Ones(d, 1)));

  params.bias = Vector<Real>::Zero(V);
  if (options.counts) {
    const auto& counts = *options.counts;
    if (counts.size() != options.vocab_size) throw ConfigError("counts length must equal V");
    double total = 0;
    for (auto c : counts) total += static_cast<double>(c) + 1.0;
    for (Eigen::Index w = 0; w < V; ++w) {
      params.bias[w] = static_cast<Real>(std::log((static_cast<double>(counts[w]) + 1.0) / total));
    }
  }
  return params;
}

template <typename Real>
Vector<Real> predicted_representation(const LblParams<Real>& params, std::span<const WordId> context) {
  params.check_context(context);
  Vector<Real> qhat = Vector<Real>::Zero(static_cast<Eigen::Index>(params.dim()));
  for (std::size_t i = 0; i < context.size(); ++i) {
    auto r = params.context_table.row(context[i]).transpose();
    if (params.matrix_mode == MatrixMode::kFull) {
      qhat.noalias() += params.context_weights[i] * r;
    } else {
      qhat += params.context_weights[i].col(0).cwiseProduct(r);
    }
  }
  return qhat;
}

template <typename Real>
Real score(const LblParams<Real>& params, const Vector<Real>& qhat, WordId w) {
  if (w >= params.vocab_size()) throw std::out_of_range("target id out of range");
  return params.target_table.row(w).dot(qhat.transpose()) + params.bias[w];
}

namespace {

template <typename Real>
Eigen::VectorXd qhat_double(const LblParams<Real>& params, std::span<const WordId> context) {
  params.check_context(context);
  const auto d = static_cast<Eigen::Index>(params.dim());
  Eigen::VectorXd qhat = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < context.size(); ++i) {
    Eigen::VectorXd r = params.context_table.row(context[i]).transpose().template cast<double>();
    if (params.matrix_mode == MatrixMode::kFull) {
      qhat.noalias() += params.context_weights[i].template cast<double>() * r;
    } else {
      qhat += params.context_weights[i].col(0).template cast<double>().cwiseProduct(r);
    }
  }
  return qhat;
}

}  // namespace

template <typename Real>
Eigen::VectorXd log_softmax(const LblParams<Real>& params, std::span<const WordId> context) {
  const Eigen::VectorXd qhat = qhat_double(params, context);
  const auto V = static_cast<Eigen::Index>(params.vocab_size());
  const auto d = static_cast<Eigen::Index>(params.dim());
  Eigen::VectorXd scores(V);
  for (Eigen::Index w = 0; w < V; ++w) {
    const Real* q = params.target_table.data() + w * d;
    double s = static_cast<double>(params.bias[w]);
    for (Eigen::Index j = 0; j < d; ++j) s += static_cast<double>(q[j]) * qhat[j];
    scores[w] = s;
  }
  const double max = scores.maxCoeff();
  const double log_z = max + std::log((scores.array() - max).exp().sum());
  return scores.array() - log_z;
}

template <typename Real>
Eigen::VectorXd full_distribution(const LblParams<Real>& params, std::span<const WordId> context) {
  return log_softmax(params, context).array().exp();
}

template <typename Real>
double unnormalized_log_prob(const LblParams<Real>& params, const NormalizerStore<Real>& normalizers,
                             std::span<const WordId> context, WordId w) {
  const auto qhat = predicted_representation(params, context);
  return static_cast<double>(score(params, qhat, w)) + static_cast<double>(normalizers.lookup(context));
}

template <typename Real>
Gradient<Real> score_gradients(const LblParams<Real>& params, std::span<const WordId> context, WordId w) {
  const auto qhat = predicted_representation(params, context);
  if (w >= params.vocab_size()) throw std::out_of_range("target id out of range");
  Gradient<Real> grad(params.vocab_size(), params.dim(), params.context_size(), params.matrix_mode);
  const Vector<Real> qw = params.target_table.row(w).transpose();
  grad.target_rows.row(w) += qhat;
  grad.bias.row(w)[0] += Real(1);
  for (std::size_t i = 0; i < context.size(); ++i) {
    const Vector<Real> r = params.context_table.row(context[i]).transpose();
    if (params.matrix_mode == MatrixMode::kFull) {
      grad.context_rows.row(context[i]) += params.context_weights[i].transpose() * qw;
      grad.context_weights[i] += qw * r.transpose();
    } else {
      grad.context_rows.row(context[i]) += params.context_weights[i].col(0).cwiseProduct(qw);
      grad.context_weights[i].col(0) += qw.cwiseProduct(r);
    }
  }
  return grad;
}

template <typename To, typename From>
LblParams<To> cast_params(const LblParams<From>& params) {
  LblParams<To> out;
  out.matrix_mode = params.matrix_mode;
  out.context_table = params.context_table.template cast<To>();
  out.target_table = params.target_table.template cast<To>();
  out.bias = params.bias.template cast<To>();
  for (const auto& c : params.context_weights) out.context_weights.push_back(c.template cast<To>());
  return out;
}

template <typename To, typename From>
NormalizerStore<To> cast_normalizers(const NormalizerStore<From>& store) {
  NormalizerStore<To> out(store.mode());
  for (const auto& [ctx, value] : store.sorted_entries()) out.set(ctx, static_cast<To>(value));
  return out;
}

#define NCELM_INSTANTIATE(Real)                                                                   \
  template struct LblParams<Real>;                                                                \
  template class NormalizerStore<Real>;                                                           \
  template LblParams<Real> init_params<Real>(const InitOptions&);                                 \
  template Vector<Real> predicted_representation(const LblParams<Real>&, std::span<const WordId>); \
  template Real score(const LblParams<Real>&, const Vector<Real>&, WordId);                       \
  template Eigen::VectorXd log_softmax(const LblParams<Real>&, std::span<const WordId>);          \
  template Eigen::VectorXd full_distribution(const LblParams<Real>&, std::span<const WordId>);    \
  template double unnormalized_log_prob(const LblParams<Real>&, const NormalizerStore<Real>&,     \
                                        std::span<const WordId>, WordId);                          \
  template Gradient<Real> score_gradients(const LblParams<Real>&, std::span<const WordId>, WordId);

NCELM_INSTANTIATE(float)
NCELM_INSTANTIATE(double)
#undef NCELM_INSTANTIATE

template LblParams<float> cast_params<float, double>(const LblParams<double>&);
template LblParams<double> cast_params<double, float>(const LblParams<float>&);
template LblParams<float> cast_params<float, float>(const LblParams<float>&);
template LblParams<double> cast_params<double, double>(const LblParams<double>&);
template NormalizerStore<float> cast_normalizers<float, double>(const NormalizerStore<double>&);
template NormalizerStore<double> cast_normalizers<double, float>(const NormalizerStore<float>&);
template NormalizerStore<float> cast_normalizers<float, float>(const NormalizerStore<float>&);
template NormalizerStore<double> cast_normalizers<double, double>(const NormalizerStore<double>&);

}  // namespace ncelm
