#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace zol {

/// Raw 8-bit images as read from a benchmark file. Pixels are stored one
/// image per row in the source file's own layout (CIFAR-10 keeps its
/// channel-planar R,G,B ordering).
struct RawImageSet {
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t row_size() const { return height * width * channels; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * row_size(), row_size()};
  }
};

/// Row-major features in [0,1] with labels in {+1,-1}. Never empty.
class BinaryDataset {
 public:
  BinaryDataset(std::vector<float> features, std::vector<std::int8_t> labels, std::size_t d)
      : features_(std::move(features)), labels_(std::move(labels)), d_(d) {
    if (labels_.empty()) throw EmptyDatasetError("dataset has no rows");
    if (d_ == 0) throw FormatError("dataset has zero features");
    if (features_.size() != labels_.size() * d_)
      throw ConsistencyError("feature count " + std::to_string(features_.size()) +
                             " != n*d = " + std::to_string(labels_.size() * d_));
    for (float v : features_)
      if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("feature value outside [0,1]");
    for (auto y : labels_)
      if (y != 1 && y != -1) throw FormatError("label must be +1 or -1");
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return d_; }
  std::span<const float> row(std::size_t i) const { return {features_.data() + i * d_, d_}; }
  float at(std::size_t i, std::size_t j) const { return features_[i * d_ + j]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<float>& features() const { return features_; }
  const std::vector<std::int8_t>& labels() const { return labels_; }

  std::size_t count_positive() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::int8_t{1}));
  }
  bool single_class() const {
    auto pos = count_positive();
    return pos == 0 || pos == size();
  }

  bool operator==(const BinaryDataset&) const = default;

 private:
  std::vector<float> features_;
  std::vector<std::int8_t> labels_;
  std::size_t d_;
};

/// Rows of `ds` at `indices`, in that order (duplicates allowed).
inline BinaryDataset subset(const BinaryDataset& ds, std::span<const std::size_t> indices) {
  std::vector<float> f;
  std::vector<std::int8_t> y;
  f.reserve(indices.size() * ds.dim());
  y.reserve(indices.size());
  for (auto i : indices) {
    auto r = ds.row(i);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(static_cast<std::int8_t>(ds.label(i)));
  }
  return BinaryDataset(std::move(f), std::move(y), ds.dim());
}

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

// Little-endian byte writer/reader shared by the container and model blobs.
class ByteWriter {
 public:
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LengthError(what_ + ": truncated");
  }
  bool expect_magic(std::string_view magic) {
    if (bytes_.size() - pos_ < magic.size()) return false;
    if (!std::equal(magic.begin(), magic.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                    [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
      return false;
    pos_ += magic.size();
    return true;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{bytes_[pos_ + k]} << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{bytes_[pos_ + k]} << (8 * k);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace detail

/// MNIST IDX pair: images (magic 0x00000803) and labels (magic 0x00000801).
inline RawImageSet load_idx(const std::filesystem::path& image_path,
                            const std::filesystem::path& label_path) {
  auto img = detail::read_file(image_path);
  auto lab = detail::read_file(label_path);
  if (img.size() < 4 || detail::read_be32(img.data()) != 0x00000803u)
    throw FormatError(image_path.string() + ": bad IDX image magic");
  if (lab.size() < 4 || detail::read_be32(lab.data()) != 0x00000801u)
    throw FormatError(label_path.string() + ": bad IDX label magic");
  if (img.size() < 16) throw LengthError(image_path.string() + ": truncated header");
  if (lab.size() < 8) throw LengthError(label_path.string() + ": truncated header");

  const std::size_t n = detail::read_be32(img.data() + 4);
  const std::size_t rows = detail::read_be32(img.data() + 8);
  const std::size_t cols = detail::read_be32(img.data() + 12);
  const std::size_t n_labels = detail::read_be32(lab.data() + 4);
  if (n != n_labels)
    throw ConsistencyError("image count " + std::to_string(n) + " != label count " +
                           std::to_string(n_labels));
  if (img.size() - 16 < n * rows * cols) throw LengthError(image_path.string() + ": truncated pixels");
  if (lab.size() - 8 < n) throw LengthError(label_path.string() + ": truncated labels");

  RawImageSet raw;
  raw.height = rows;
  raw.width = cols;
  raw.channels = 1;
  raw.pixels.assign(img.begin() + 16, img.begin() + 16 + static_cast<std::ptrdiff_t>(n * rows * cols));
  raw.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  for (auto l : raw.labels)
    if (l >= 10) throw FormatError(label_path.string() + ": label >= 10");
  return raw;
}

inline constexpr std::size_t kCifarRecord = 1 + 32 * 32 * 3;

/// CIFAR-10 binary batches: 3073-byte records, label byte then 1024 R, 1024
/// G, 1024 B. Records are concatenated in file order.
inline RawImageSet load_cifar10_bin(std::span<const std::filesystem::path> paths) {
  RawImageSet raw;
  raw.height = 32;
  raw.width = 32;
  raw.channels = 3;
  for (const auto& path : paths) {
    auto bytes = detail::read_file(path);
    if (bytes.size() % kCifarRecord != 0)
      throw FormatError(path.string() + ": length " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073");
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
      if (bytes[off] >= 10) throw FormatError(path.string() + ": label >= 10");
      raw.labels.push_back(bytes[off]);
      raw.pixels.insert(raw.pixels.end(), bytes.begin() + static_cast<std::ptrdiff_t>(off + 1),
                        bytes.begin() + static_cast<std::ptrdiff_t>(off + kCifarRecord));
    }
  }
  return raw;
}

/// Keeps rows of class_a (-> +1) and class_b (-> -1) in original order and
/// scales pixels by 1/255. One absent class yields a single-class dataset.
inline BinaryDataset select_binary(const RawImageSet& raw, unsigned class_a, unsigned class_b) {
  if (class_a == class_b) throw ConfigError("class_a and class_b must differ");
  const std::size_t d = raw.row_size();
  std::vector<float> f;
  std::vector<std::int8_t> y;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const unsigned l = raw.labels[i];
    if (l != class_a && l != class_b) continue;
    y.push_back(l == class_a ? 1 : -1);
    for (auto p : raw.image(i)) f.push_back(static_cast<float>(p / 255.0));
  }
  if (y.empty())
    throw EmptyDatasetError("neither class " + std::to_string(class_a) + " nor " +
                            std::to_string(class_b) + " present");
  return BinaryDataset(std::move(f), std::move(y), d);
}

// "BDS1" container: magic, u32 n, u32 d, n*d f32 row-major, n i8 labels;
// all little-endian.
inline std::vector<std::uint8_t> encode_container(const BinaryDataset& ds) {
  detail::ByteWriter w;
  w.raw("BDS1");
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.dim()));
  for (float v : ds.features()) w.f32(v);
  for (auto y : ds.labels()) w.u8(static_cast<std::uint8_t>(y));
  return w.take();
}

inline BinaryDataset decode_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "BDS1 container");
  if (!r.expect_magic("BDS1")) throw FormatError("not a BDS1 container (bad magic)");
  const std::size_t n = r.u32();
  const std::size_t d = r.u32();
  if (n == 0 || d == 0) throw FormatError("BDS1 container with n or d of zero");
  r.need(n * d * 4 + n);
  std::vector<float> f(n * d);
  for (auto& v : f) v = r.f32();
  std::vector<std::int8_t> y(n);
  for (auto& v : y) v = static_cast<std::int8_t>(r.u8());
  if (r.remaining() != 0) throw FormatError("BDS1 container has trailing bytes");
  return BinaryDataset(std::move(f), std::move(y), d);
}

inline void save_container(const BinaryDataset& ds, const std::filesystem::path& path) {
  detail::write_file(path, encode_container(ds));
}

inline BinaryDataset load_container(const std::filesystem::path& path) {
  return decode_container(detail::read_file(path));
}

/// Disjoint partition into (first n_first rows, rest), optionally after a
/// seeded shuffle.
inline std::pair<BinaryDataset, BinaryDataset> split(const BinaryDataset& ds, std::size_t n_first,
                                                     std::uint64_t seed, bool shuffle_rows) {
  if (n_first == 0 || n_first >= ds.size())
    throw ConfigError("split size " + std::to_string(n_first) + " must lie in (0, " +
                      std::to_string(ds.size()) + ")");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_rows) {
    Rng rng(seed);
    shuffle(rng, order);
  }
  std::span<const std::size_t> all(order);
  return {subset(ds, all.first(n_first)), subset(ds, all.subspan(n_first))};
}

}  // namespace zol
