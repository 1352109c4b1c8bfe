#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ncelm {

using WordId = std::uint32_t;
using Context = std::vector<WordId>;

// All randomness in the toolkit flows through this engine type. Its output
// sequence is fixed by the standard, so seeded runs are reproducible.
using Rng = std::mt19937_64;

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

enum class MatrixMode { kFull, kDiagonal };
enum class NormalizerMode { kFixedOne, kPerContext };

struct ContextHash {
  std::size_t operator()(std::span<const WordId> ids) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (WordId id : ids) {
      h ^= id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
  std::size_t operator()(const Context& ids) const noexcept {
    return (*this)(std::span<const WordId>(ids));
  }
};

// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Independent stream for a worker, derived from the master seed.
inline Rng worker_rng(std::uint64_t seed, std::uint64_t worker_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker_index), 0x5eedu};
  return Rng(seq);
}

}  // namespace ncelm
