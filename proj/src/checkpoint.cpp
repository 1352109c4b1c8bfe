#include "ncelm/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ncelm/error.hpp"

namespace ncelm {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError("truncated checkpoint");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

template <typename Derived>
void put_reals(std::ostream& out, const Eigen::DenseBase<Derived>& m) {
  // Row-major traversal regardless of storage order.
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f32(out, static_cast<float>(m(i, j)));
  }
}

template <typename Derived>
void get_reals(std::istream& in, Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f32(in);
  }
}

}  // namespace

template <typename Real>
void write_checkpoint(std::ostream& out, const LblParams<Real>& params,
                      const NormalizerStore<Real>& normalizers) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.vocab_size()));
  put_u32(out, static_cast<std::uint32_t>(params.dim()));
  put_u32(out, static_cast<std::uint32_t>(params.context_size()));
  put_u32(out, params.matrix_mode == MatrixMode::kFull ? 0u : 1u);
  put_u32(out, normalizers.mode() == NormalizerMode::kFixedOne ? 0u : 1u);
  put_reals(out, params.context_table);
  put_reals(out, params.target_table);
  for (const auto& c : params.context_weights) {
    if (params.matrix_mode == MatrixMode::kFull) {
      put_reals(out, c);
    } else {
      put_reals(out, c.col(0).transpose());
    }
  }
  put_reals(out, params.bias.transpose());
  if (normalizers.mode() == NormalizerMode::kPerContext) {
    const auto entries = normalizers.sorted_entries();
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [ctx, value] : entries) {
      for (WordId id : ctx) put_u32(out, id);
      put_f32(out, static_cast<float>(value));
    }
  }
}

template <typename Real>
Checkpoint<Real> read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic) - 1];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const auto version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto V = get_u32(in);
  const auto d = get_u32(in);
  const auto n = get_u32(in);
  const auto matrix_flag = get_u32(in);
  const auto norm_flag = get_u32(in);
  if (V == 0 || d == 0 || n == 0 || matrix_flag > 1 || norm_flag > 1) {
    throw FormatError("corrupt checkpoint header");
  }
  Checkpoint<Real> ck{LblParams<Real>{},
                      NormalizerStore<Real>(norm_flag == 0 ? NormalizerMode::kFixedOne
                                                           : NormalizerMode::kPerContext)};
  auto& p = ck.params;
  p.matrix_mode = matrix_flag == 0 ? MatrixMode::kFull : MatrixMode::kDiagonal;
  p.context_table.resize(V, d);
  p.target_table.resize(V, d);
  get_reals(in, p.context_table);
  get_reals(in, p.target_table);
  for (std::uint32_t i = 0; i < n; ++i) {
    Matrix<Real> c(d, p.matrix_mode == MatrixMode::kFull ? d : 1);
    if (p.matrix_mode == MatrixMode::kFull) {
      get_reals(in, c);
    } else {
      auto row = c.col(0).transpose();
      get_reals(in, row);
    }
    p.context_weights.push_back(std::move(c));
  }
  p.bias.resize(V);
  auto bias_row = p.bias.transpose();
  get_reals(in, bias_row);
  if (norm_flag == 1) {
    const auto count = get_u32(in);
    Context ctx(n);
    for (std::uint32_t r = 0; r < count; ++r) {
      for (auto& id : ctx) {
        id = get_u32(in);
        if (id >= V) throw FormatError("normalizer record references id out of range");
      }
      ck.normalizers.set(ctx, static_cast<Real>(get_f32(in)));
    }
  }
  return ck;
}

template <typename Real>
void save_checkpoint(const std::string& path, const LblParams<Real>& params,
                     const NormalizerStore<Real>& normalizers) {
  // Write-then-rename so an interrupted save never clobbers the previous file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp + "' for writing");
    write_checkpoint(out, params, normalizers);
    if (!out.flush()) throw Error("failed writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename '" + tmp + "'");
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint<Real>(in);
}

#define NCELM_INSTANTIATE(Real)                                                                  \
  template void write_checkpoint(std::ostream&, const LblParams<Real>&, const NormalizerStore<Real>&); \
  template Checkpoint<Real> read_checkpoint<Real>(std::istream&);                                \
  template void save_checkpoint(const std::string&, const LblParams<Real>&,                      \
                                const NormalizerStore<Real>&);                                   \
  template Checkpoint<Real> load_checkpoint<Real>(const std::string&);

NCELM_INSTANTIATE(float)
NCELM_INSTANTIATE(double)
#undef NCELM_INSTANTIATE

}  // namespace ncelm
