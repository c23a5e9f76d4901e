#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gcr/train.hpp"

namespace gcr {

// Binary model container, little-endian throughout:
//   magic "GCRCKPT\0", u32 version,
//   u8 head tag (0 linear, 1 cosine, 2 gcr),
//   head payload,
//   u8 backbone-present flag, backbone payload.
// The gcr payload is: u32 n, u32 C, u32 dims[C], blocks row-major f64,
// momentum row-major f64, f64 tau, f64 mu, u32 reorth_period, u64 iter,
// f64 gamma, u8 normalize.
inline constexpr char kCheckpointMagic[8] = {'G', 'C', 'R', 'C',
                                             'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  // Geometric optimizer state; meaningful only for gcr heads.
  Matrix momentum;
  double tau = 0.0;
  double mu = 0.0;
  std::uint32_t reorth_period = 0;
  std::uint64_t iter = 0;
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CorruptContainer("checkpoint: unexpected end of file");
  return v;
}

// Row-major serialization regardless of in-memory layout.
inline void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_pod(out, m(i, j));
}

inline Matrix read_matrix(std::istream& in, Eigen::Index rows,
                          Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_pod<double>(in);
  return m;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot open for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod(out, std::uint8_t(ckpt.model.kind));
  if (ckpt.model.kind == HeadKind::Linear) {
    const auto& h = std::get<LinearHead>(ckpt.model.head);
    detail::write_pod(out, std::uint32_t(h.feature_dim()));
    detail::write_pod(out, std::uint32_t(h.num_classes()));
    detail::write_matrix(out, h.weight);
    detail::write_matrix(out, h.bias);
  } else if (ckpt.model.kind == HeadKind::Cosine) {
    const auto& h = std::get<CosineHead>(ckpt.model.head);
    detail::write_pod(out, std::uint32_t(h.feature_dim()));
    detail::write_pod(out, std::uint32_t(h.num_classes()));
    detail::write_pod(out, h.scale);
    detail::write_matrix(out, h.weight);
  } else {
    const auto& h = std::get<GcrHead>(ckpt.model.head);
    detail::write_pod(out, std::uint32_t(h.param.n));
    detail::write_pod(out, std::uint32_t(h.param.num_classes()));
    for (Eigen::Index k : h.param.dims)
      detail::write_pod(out, std::uint32_t(k));
    detail::write_matrix(out, h.param.blocks);
    Matrix mom = ckpt.momentum.size() > 0
                     ? ckpt.momentum
                     : Matrix::Zero(h.param.n, h.param.total_cols());
    detail::write_matrix(out, mom);
    detail::write_pod(out, ckpt.tau);
    detail::write_pod(out, ckpt.mu);
    detail::write_pod(out, ckpt.reorth_period);
    detail::write_pod(out, ckpt.iter);
    detail::write_pod(out, h.gamma);
    detail::write_pod(out, std::uint8_t(h.normalize));
  }
  const bool has_net = !ckpt.model.net.layers.empty();
  detail::write_pod(out, std::uint8_t(has_net));
  if (has_net) {
    detail::write_pod(out, std::uint32_t(ckpt.model.net.layers.size()));
    for (const auto& layer : ckpt.model.net.layers) {
      detail::write_pod(out, std::uint32_t(layer.weight.rows()));
      detail::write_pod(out, std::uint32_t(layer.weight.cols()));
      detail::write_matrix(out, layer.weight);
      detail::write_matrix(out, layer.bias);
    }
  }
  if (!out) throw Error("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CorruptContainer("checkpoint: bad magic");
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint: unsupported version " +
                          std::to_string(version));
  Checkpoint ckpt;
  const auto tag = detail::read_pod<std::uint8_t>(in);
  if (tag > 2) throw CorruptContainer("checkpoint: unknown head tag");
  ckpt.model.kind = HeadKind(tag);
  if (ckpt.model.kind == HeadKind::Linear) {
    const auto n = detail::read_pod<std::uint32_t>(in);
    const auto c = detail::read_pod<std::uint32_t>(in);
    LinearHead h;
    h.weight = detail::read_matrix(in, n, c);
    h.bias = detail::read_matrix(in, c, 1);
    ckpt.model.head = std::move(h);
  } else if (ckpt.model.kind == HeadKind::Cosine) {
    const auto n = detail::read_pod<std::uint32_t>(in);
    const auto c = detail::read_pod<std::uint32_t>(in);
    CosineHead h;
    h.scale = detail::read_pod<double>(in);
    h.weight = detail::read_matrix(in, n, c);
    ckpt.model.head = std::move(h);
  } else {
    const auto n = detail::read_pod<std::uint32_t>(in);
    const auto c = detail::read_pod<std::uint32_t>(in);
    GcrHead h;
    h.param.n = n;
    Eigen::Index total = 0;
    for (std::uint32_t i = 0; i < c; ++i) {
      const auto k = detail::read_pod<std::uint32_t>(in);
      h.param.dims.push_back(k);
      total += k;
    }
    h.param.blocks = detail::read_matrix(in, n, total);
    ckpt.momentum = detail::read_matrix(in, n, total);
    ckpt.tau = detail::read_pod<double>(in);
    ckpt.mu = detail::read_pod<double>(in);
    ckpt.reorth_period = detail::read_pod<std::uint32_t>(in);
    ckpt.iter = detail::read_pod<std::uint64_t>(in);
    h.gamma = detail::read_pod<double>(in);
    h.normalize = detail::read_pod<std::uint8_t>(in) != 0;
    ckpt.model.head = std::move(h);
  }
  if (detail::read_pod<std::uint8_t>(in) != 0) {
    const auto num_layers = detail::read_pod<std::uint32_t>(in);
    for (std::uint32_t l = 0; l < num_layers; ++l) {
      MlpBackbone::Layer layer;
      const auto rows = detail::read_pod<std::uint32_t>(in);
      const auto cols = detail::read_pod<std::uint32_t>(in);
      layer.weight = detail::read_matrix(in, rows, cols);
      layer.bias = detail::read_matrix(in, rows, 1);
      ckpt.model.net.layers.push_back(std::move(layer));
    }
  }
  return ckpt;
}

}  // namespace gcr
