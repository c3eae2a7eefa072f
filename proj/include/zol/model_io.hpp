#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "convex.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "mlp01.hpp"
#include "vote.hpp"

// Ensemble blob ("M01V"), all integers and floats little-endian:
//
//   "M01V" | u32 version (=1) | u32 kind | u32 member_count
//   member_count x { u64 seed | payload }
//
// payload by kind:
//   scd01 (1), svm (2): u32 d | f32 w[d] | f32 w0
//   mlp01 (3):          u32 d | u32 k | f32 W[d*k] (row-major d x k) | f32 W0[k] | f32 w[k] | f32 w0
//   mlp (4):            u32 layers | layers x { u32 out | u32 in | f32 W[out*in] (row-major) | f32 b[out] }
//
// Parameters are stored as 32-bit floats; decode(encode(e)) is the model
// that predictions and attacks should be run against.

namespace zol {

enum class ModelKind : std::uint32_t { scd01 = 1, svm = 2, mlp01 = 3, mlp = 4 };

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "scd01") return ModelKind::scd01;
  if (s == "svm") return ModelKind::svm;
  if (s == "mlp01") return ModelKind::mlp01;
  if (s == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown model kind '" + s + "' (expected scd01, mlp01, svm or mlp)");
}

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::scd01: return "scd01";
    case ModelKind::svm: return "svm";
    case ModelKind::mlp01: return "mlp01";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

struct StoredEnsemble {
  ModelKind kind = ModelKind::scd01;
  std::variant<VoteEnsemble<LinearModel>, VoteEnsemble<Mlp01Model>, VoteEnsemble<SigmoidMlpModel>> ensemble;

  std::size_t dim() const {
    return std::visit([](const auto& e) { return e.dim(); }, ensemble);
  }
  std::size_t size() const {
    return std::visit([](const auto& e) { return e.members.size(); }, ensemble);
  }
  const std::vector<std::uint64_t>& member_seeds() const {
    return std::visit([](const auto& e) -> const std::vector<std::uint64_t>& { return e.member_seeds; },
                      ensemble);
  }
  int predict(std::span<const float> x) const {
    return std::visit([&](const auto& e) { return predict_vote(e, x); }, ensemble);
  }
  bool operator==(const StoredEnsemble&) const = default;
};

inline int predict(const StoredEnsemble& s, std::span<const float> x) { return s.predict(x); }

namespace detail {

inline void write_model(ByteWriter& w, const LinearModel& m) {
  w.u32(static_cast<std::uint32_t>(m.dim()));
  for (double v : m.w) w.f32(static_cast<float>(v));
  w.f32(static_cast<float>(m.w0));
}

inline void write_model(ByteWriter& w, const Mlp01Model& m) {
  w.u32(static_cast<std::uint32_t>(m.d));
  w.u32(static_cast<std::uint32_t>(m.k));
  for (double v : m.W) w.f32(static_cast<float>(v));
  for (double v : m.W0) w.f32(static_cast<float>(v));
  for (double v : m.w) w.f32(static_cast<float>(v));
  w.f32(static_cast<float>(m.w0));
}

inline void write_model(ByteWriter& w, const SigmoidMlpModel& m) {
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& layer : m.layers) {
    w.u32(static_cast<std::uint32_t>(layer.W.rows()));
    w.u32(static_cast<std::uint32_t>(layer.W.cols()));
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) w.f32(static_cast<float>(layer.W(r, c)));
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) w.f32(static_cast<float>(layer.b[r]));
  }
}

inline std::size_t nonzero(std::uint32_t v, const char* what) {
  if (v == 0) throw FormatError(std::string("M01V blob: zero ") + what);
  return v;
}

inline LinearModel read_linear(ByteReader& r) {
  const std::size_t d = nonzero(r.u32(), "dimension");
  r.need(d * 4 + 4);
  LinearModel m;
  m.w.resize(d);
  for (auto& v : m.w) v = r.f32();
  m.w0 = r.f32();
  return m;
}

inline Mlp01Model read_mlp01(ByteReader& r) {
  Mlp01Model m;
  m.d = nonzero(r.u32(), "dimension");
  m.k = nonzero(r.u32(), "hidden width");
  r.need((m.d * m.k + 2 * m.k + 1) * 4);
  m.W.resize(m.d * m.k);
  m.W0.resize(m.k);
  m.w.resize(m.k);
  for (auto& v : m.W) v = r.f32();
  for (auto& v : m.W0) v = r.f32();
  for (auto& v : m.w) v = r.f32();
  m.w0 = r.f32();
  return m;
}

inline SigmoidMlpModel read_mlp(ByteReader& r) {
  const std::size_t n_layers = nonzero(r.u32(), "layer count");
  SigmoidMlpModel m;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto out = static_cast<Eigen::Index>(nonzero(r.u32(), "layer width"));
    const auto in = static_cast<Eigen::Index>(nonzero(r.u32(), "layer input width"));
    if (!m.layers.empty() && m.layers.back().W.rows() != in)
      throw FormatError("M01V blob: layer dimensions do not chain");
    r.need(static_cast<std::size_t>(out * in + out) * 4);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index i = 0; i < out; ++i)
      for (Eigen::Index j = 0; j < in; ++j) layer.W(i, j) = r.f32();
    for (Eigen::Index i = 0; i < out; ++i) layer.b[i] = r.f32();
    m.layers.push_back(std::move(layer));
  }
  if (m.layers.back().W.rows() != 1) throw FormatError("M01V blob: output layer must have one unit");
  return m;
}

template <typename Model, typename Reader>
VoteEnsemble<Model> read_members(ByteReader& r, std::size_t count, Reader&& read) {
  VoteEnsemble<Model> e;
  for (std::size_t i = 0; i < count; ++i) {
    e.member_seeds.push_back(r.u64());
    e.members.push_back(read(r));
    if (e.members.back().dim() != e.members.front().dim())
      throw FormatError("M01V blob: members disagree on input dimension");
  }
  return e;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_ensemble(const StoredEnsemble& s) {
  detail::ByteWriter w;
  w.raw("M01V");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(s.kind));
  std::visit(
      [&](const auto& e) {
        w.u32(static_cast<std::uint32_t>(e.members.size()));
        for (std::size_t i = 0; i < e.members.size(); ++i) {
          w.u64(e.member_seeds[i]);
          detail::write_model(w, e.members[i]);
        }
      },
      s.ensemble);
  return w.take();
}

inline StoredEnsemble decode_ensemble(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "M01V blob");
  if (!r.expect_magic("M01V")) throw FormatError("not an M01V model blob (bad magic)");
  if (r.u32() != 1) throw FormatError("unsupported M01V version");
  const auto kind_tag = r.u32();
  const std::size_t count = detail::nonzero(r.u32(), "member count");
  StoredEnsemble s;
  switch (kind_tag) {
    case 1:
    case 2:
      s.kind = static_cast<ModelKind>(kind_tag);
      s.ensemble = detail::read_members<LinearModel>(r, count, detail::read_linear);
      break;
    case 3:
      s.kind = ModelKind::mlp01;
      s.ensemble = detail::read_members<Mlp01Model>(r, count, detail::read_mlp01);
      break;
    case 4:
      s.kind = ModelKind::mlp;
      s.ensemble = detail::read_members<SigmoidMlpModel>(r, count, detail::read_mlp);
      break;
    default:
      throw FormatError("M01V blob: unknown kind tag " + std::to_string(kind_tag));
  }
  if (r.remaining() != 0) throw FormatError("M01V blob has trailing bytes");
  return s;
}

/// The ensemble as it will be after a save/load cycle (float32 parameters).
inline StoredEnsemble quantized(const StoredEnsemble& s) { return decode_ensemble(encode_ensemble(s)); }

inline void save_ensemble(const StoredEnsemble& s, const std::filesystem::path& path) {
  detail::write_file(path, encode_ensemble(s));
}

inline StoredEnsemble load_ensemble(const std::filesystem::path& path) {
  return decode_ensemble(detail::read_file(path));
}

}  // namespace zol
