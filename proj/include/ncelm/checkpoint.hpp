#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ncelm/model.hpp"

namespace ncelm {

inline constexpr char kCheckpointMagic[] = "NCELM1\n";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary checkpoint layout (all integers u32 little-endian, all reals IEEE-754
// binary32 little-endian):
//
//   "NCELM1\n"
//   version, V, d, context_size, matrix_mode (0 full, 1 diagonal),
//   normalizer_mode (0 fixed-one, 1 per-context)
//   R (V x d, row-major), Q (V x d, row-major), C_1 .. C_n (d x d row-major, or
//   d values in diagonal mode), b (V)
//   per-context mode only: count, then count records of
//     (context_size ids, c^h)
//
// Records are written in lexicographic context order. 64-bit models are
// rounded to binary32 on save.
template <typename Real>
struct Checkpoint {
  LblParams<Real> params;
  NormalizerStore<Real> normalizers;
};

template <typename Real>
void write_checkpoint(std::ostream& out, const LblParams<Real>& params,
                      const NormalizerStore<Real>& normalizers);
template <typename Real>
Checkpoint<Real> read_checkpoint(std::istream& in);

template <typename Real>
void save_checkpoint(const std::string& path, const LblParams<Real>& params,
                     const NormalizerStore<Real>& normalizers);
template <typename Real>
Checkpoint<Real> load_checkpoint(const std::string& path);

}  // namespace ncelm
