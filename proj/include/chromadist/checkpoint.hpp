// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary model container, little-endian throughout:
//
//   magic "CDST" | u16 version | u8 kind (0 baseline, 1 cdest)
//   dims: u32 vocab | u32 embed | u32 hidden | u32 resolution
//   vocabulary: u32 count, then per token u32 byte length + UTF-8 bytes
//   tokenizer: u32 min_stem | u32 rule count, then per rule the word (u32
//              length + bytes), u32 token count and the tokens
//   kind cdest:    every weight block in Block order as row-major f32
//   kind baseline: f64 sigma | u8 hue mode (0 wrapped, 1 truncated) |
//                  u32 description count, then per description its text
//                  (u32 length + bytes), u64 observation count and
//                  3 x resolution f64 masses (h, s, v)
//
// Baseline records carry zero vocab/embed/hidden dims and an empty vocabulary.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chromadist/baseline.hpp"
#include "chromadist/cdest/train.hpp"
#include "chromadist/error.hpp"
#include "chromadist/io.hpp"

namespace chromadist {

enum class ModelKind : std::uint8_t { baseline = 0, cdest = 1 };

inline const char* to_string(ModelKind k) { return k == ModelKind::baseline ? "baseline" : "cdest"; }

inline constexpr std::string_view kCheckpointMagic = "CDST";
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint64_t v) {
    if (v > UINT32_MAX) throw Error(ErrorKind::configuration, "value too large for checkpoint field");
    put_le(static_cast<std::uint32_t>(v));
  }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }
  void str(std::string_view s) {
    u32(s.size());
    bytes(s);
  }
  std::string take() { return std::move(buf_); }

 private:
  template <class U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le<std::uint8_t>()); }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string str() { return std::string(bytes(u32())); }
  /// Fails early when a declared element count cannot fit in what is left.
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw Error(ErrorKind::corrupt_checkpoint, "file is truncated");
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  template <class U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline void write_header(ByteWriter& w, ModelKind kind, const cdest::Dims& dims) {
  w.bytes(kCheckpointMagic);
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u32(dims.vocab);
  w.u32(dims.embed);
  w.u32(dims.hidden);
  w.u32(dims.resolution);
}

inline void write_vocabulary(ByteWriter& w, const Vocabulary& vocab) {
  w.u32(vocab.size());
  for (const auto& t : vocab.tokens()) w.str(t);
}

inline void write_tokenizer(ByteWriter& w, const Tokenizer& tok, const std::vector<std::pair<std::string, std::vector<std::string>>>& rules) {
  w.u32(tok.min_stem());
  w.u32(rules.size());
  for (const auto& [word, tokens] : rules) {
    w.str(word);
    w.u32(tokens.size());
    for (const auto& t : tokens) w.str(t);
  }
}

}  // namespace detail

/// Everything a checkpoint can hold; exactly one of the models is set.
struct Checkpoint {
  ModelKind kind = ModelKind::cdest;
  std::optional<HistogramModel> baseline;
  std::optional<cdest::CdestModel> cdest;

  std::size_t resolution() const {
    return kind == ModelKind::baseline ? baseline->resolution() : cdest->resolution();
  }

  ChannelDistributions predict(std::string_view description) const {
    return kind == ModelKind::baseline ? baseline->query(description) : cdest->predict(description);
  }
};

inline std::string serialize(const cdest::CdestModel& model) {
  detail::ByteWriter w;
  const auto& dims = model.params.dims();
  if (model.vocabulary.size() != dims.vocab)
    throw Error(ErrorKind::configuration, "vocabulary size does not match the embedding table");
  detail::write_header(w, ModelKind::cdest, dims);
  detail::write_vocabulary(w, model.vocabulary);
  detail::write_tokenizer(w, model.tokenizer, model.tokenizer.rules().entries());
  for (float x : model.params.values()) w.f32(x);
  return w.take();
}

inline std::string serialize(const HistogramModel& model) {
  detail::ByteWriter w;
  const std::size_t n = model.resolution();
  detail::write_header(w, ModelKind::baseline, {0, 0, 0, n});
  detail::write_vocabulary(w, Vocabulary{});
  detail::write_tokenizer(w, Tokenizer{}, {});
  w.f64(model.config().blur_sigma());
  w.u8(model.config().hue_mode == HueMode::wrapped ? 0 : 1);
  w.u32(model.table().size());
  for (const auto& [desc, entry] : model.table()) {
    w.str(desc);
    w.u64(entry.count);
    for (const auto& d : entry.dists)
      for (double m : d.masses()) w.f64(m);
  }
  return w.take();
}

/// Parses a checkpoint. With `expected_resolution` set, a checkpoint of any
/// other resolution is rejected as a configuration error.
inline Checkpoint parse_checkpoint(std::string_view bytes,
                                   std::optional<std::size_t> expected_resolution = std::nullopt) {
  detail::ByteReader r(bytes);
  if (bytes.size() < kCheckpointMagic.size() || r.bytes(4) != kCheckpointMagic)
    throw Error(ErrorKind::corrupt_checkpoint, "bad magic");
  const auto version = r.u16();
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::corrupt_checkpoint, "unsupported version " + std::to_string(version));
  const auto kind_byte = r.u8();
  if (kind_byte > 1) throw Error(ErrorKind::corrupt_checkpoint, "unknown record kind");
  cdest::Dims dims;
  dims.vocab = r.u32();
  dims.embed = r.u32();
  dims.hidden = r.u32();
  dims.resolution = r.u32();
  if (dims.resolution < 1) throw Error(ErrorKind::corrupt_checkpoint, "zero resolution");
  if (expected_resolution && *expected_resolution != dims.resolution)
    throw Error(ErrorKind::configuration,
                "checkpoint has resolution " + std::to_string(dims.resolution) + ", expected " +
                    std::to_string(*expected_resolution));

  const std::size_t token_count = r.u32();
  r.need(token_count * 4);
  std::vector<std::string> tokens(token_count);
  for (auto& t : tokens) t = r.str();
  Vocabulary vocab;
  try {
    vocab = Vocabulary::from_tokens(tokens);
  } catch (const Error&) {
    throw Error(ErrorKind::corrupt_checkpoint, "duplicate vocabulary token");
  }

  const std::size_t min_stem = r.u32();
  ReplacementRules rules;
  const std::size_t rule_count = r.u32();
  r.need(rule_count * 8);
  for (std::size_t i = 0; i < rule_count; ++i) {
    std::string word = r.str();
    const std::size_t rep_count = r.u32();
    r.need(rep_count * 4);
    std::vector<std::string> rep(rep_count);
    for (auto& t : rep) t = r.str();
    try {
      rules.add(std::move(word), std::move(rep));
    } catch (const Error&) {
      throw Error(ErrorKind::corrupt_checkpoint, "malformed replacement rule");
    }
  }

  Checkpoint ckpt;
  ckpt.kind = static_cast<ModelKind>(kind_byte);
  if (ckpt.kind == ModelKind::cdest) {
    if (dims.vocab == 0 || dims.embed == 0 || dims.hidden == 0)
      throw Error(ErrorKind::corrupt_checkpoint, "zero network dimension");
    if (vocab.size() != dims.vocab)
      throw Error(ErrorKind::corrupt_checkpoint, "vocabulary size does not match dims");
    const cdest::Layout layout(dims);
    r.need(layout.total() * 4);
    cdest::CdestModel model;
    model.params = cdest::Parameters<float>(dims);
    for (float& x : model.params.values()) x = r.f32();
    model.vocabulary = std::move(vocab);
    model.tokenizer = Tokenizer(std::move(rules), min_stem);
    ckpt.cdest = std::move(model);
  } else {
    if (dims.vocab != 0 || !vocab.tokens().empty())
      throw Error(ErrorKind::corrupt_checkpoint, "baseline record carries a vocabulary");
    DiscretizerConfig config;
    config.resolution = dims.resolution;
    config.sigma = r.f64();
    const auto mode = r.u8();
    if (mode > 1) throw Error(ErrorKind::corrupt_checkpoint, "unknown hue mode");
    config.hue_mode = mode == 0 ? HueMode::wrapped : HueMode::truncated;
    HistogramModel model(config);
    const std::size_t count = r.u32();
    r.need(count * (4 + 8 + 24 * dims.resolution));
    for (std::size_t i = 0; i < count; ++i) {
      std::string desc = r.str();
      HistogramModel::Entry entry;
      entry.count = r.u64();
      for (auto& d : entry.dists) {
        std::vector<double> masses(dims.resolution);
        for (double& m : masses) m = r.f64();
        d = BinnedDistribution(std::move(masses));
      }
      model.insert(std::move(desc), std::move(entry));
    }
    ckpt.baseline = std::move(model);
  }
  if (!r.at_end()) throw Error(ErrorKind::corrupt_checkpoint, "trailing bytes");
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const cdest::CdestModel& model) {
  write_file_atomic(path, serialize(model));
}

inline void save_checkpoint(const std::filesystem::path& path, const HistogramModel& model) {
  write_file_atomic(path, serialize(model));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path,
                                  std::optional<std::size_t> expected_resolution = std::nullopt) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorKind::invalid_input, "cannot read checkpoint " + path.string());
  }
  return parse_checkpoint(bytes, expected_resolution);
}

}  // namespace chromadist
