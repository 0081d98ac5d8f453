// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chromadist/error.hpp"
#include "chromadist/random.hpp"

namespace chromadist::cdest {

struct Dims {
  std::size_t vocab = 0;
  std::size_t embed = 16;
  std::size_t hidden = 128;
  std::size_t resolution = 64;

  void validate() const {
    if (vocab == 0 || embed == 0 || hidden == 0 || resolution == 0)
      throw Error(ErrorKind::configuration, "network dimensions must all be positive");
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Weight blocks in storage (and checkpoint) order. Matrices are row-major
/// with one row per output unit: W_* maps the embedding, U_* the previous
/// hidden state.
enum class Block : std::size_t {
  embedding,  // vocab x embed
  w_update, u_update, b_update,
  w_reset, u_reset, b_reset,
  w_candidate, u_candidate, b_candidate,
  w_relu, b_relu,  // hidden x hidden, hidden
  w_hue, b_hue,    // resolution x hidden, resolution
  w_sat, b_sat,
  w_val, b_val,
  count_
};

inline constexpr std::size_t kBlockCount = static_cast<std::size_t>(Block::count_);

struct BlockShape {
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t size() const { return rows * cols; }
  bool is_bias() const { return cols == 1; }
};

inline BlockShape block_shape(Block b, const Dims& d) {
  switch (b) {
    case Block::embedding: return {d.vocab, d.embed};
    case Block::w_update:
    case Block::w_reset:
    case Block::w_candidate: return {d.hidden, d.embed};
    case Block::u_update:
    case Block::u_reset:
    case Block::u_candidate:
    case Block::w_relu: return {d.hidden, d.hidden};
    case Block::b_update:
    case Block::b_reset:
    case Block::b_candidate:
    case Block::b_relu: return {d.hidden, 1};
    case Block::w_hue:
    case Block::w_sat:
    case Block::w_val: return {d.resolution, d.hidden};
    case Block::b_hue:
    case Block::b_sat:
    case Block::b_val: return {d.resolution, 1};
    case Block::count_: break;
  }
  return {};
}

/// Flat parameter storage; each Block is a contiguous slice.
struct Layout {
  Dims dims;
  std::array<std::size_t, kBlockCount + 1> offsets{};

  explicit Layout(const Dims& d = {}) : dims(d) {
    for (std::size_t i = 0; i < kBlockCount; ++i)
      offsets[i + 1] = offsets[i] + block_shape(static_cast<Block>(i), d).size();
  }

  std::size_t total() const { return offsets[kBlockCount]; }
  std::size_t offset(Block b) const { return offsets[static_cast<std::size_t>(b)]; }
  BlockShape shape(Block b) const { return block_shape(b, dims); }
};

inline constexpr std::array<Block, 3> kHeadWeights{Block::w_hue, Block::w_sat, Block::w_val};
inline constexpr std::array<Block, 3> kHeadBiases{Block::b_hue, Block::b_sat, Block::b_val};

/// All trainable weights of the network (also used for gradients).
template <class T>
class Parameters {
 public:
  Parameters() = default;
  explicit Parameters(const Dims& dims) : layout_(dims), values_(layout_.total(), T(0)) {}

  const Dims& dims() const { return layout_.dims; }
  const Layout& layout() const { return layout_; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  std::span<T> block(Block b) {
    return std::span<T>(values_).subspan(layout_.offset(b), layout_.shape(b).size());
  }
  std::span<const T> block(Block b) const {
    return std::span<const T>(values_).subspan(layout_.offset(b), layout_.shape(b).size());
  }

  /// Bumped by every in-place update; forward caches remember it so stale
  /// caches are detected.
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  void set_zero() { std::fill(values_.begin(), values_.end(), T(0)); }

  bool all_finite() const {
    for (T x : values_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  template <class U>
  Parameters<U> cast() const {
    Parameters<U> out(dims());
    for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
    return out;
  }

  /// Glorot-uniform matrices, zero biases.
  static Parameters initialized(const Dims& dims, std::uint64_t seed) {
    dims.validate();
    Parameters p(dims);
    Rng rng(derive_seed(seed, 0x1417));
    for (std::size_t i = 0; i < kBlockCount; ++i) {
      const auto b = static_cast<Block>(i);
      const auto shape = p.layout_.shape(b);
      if (shape.is_bias()) continue;
      const double limit = std::sqrt(6.0 / static_cast<double>(shape.rows + shape.cols));
      for (T& w : p.block(b)) w = static_cast<T>(uniform(rng, -limit, limit));
    }
    return p;
  }

  friend bool operator==(const Parameters& a, const Parameters& b) {
    return a.dims() == b.dims() && a.values_ == b.values_;
  }

 private:
  Layout layout_;
  std::vector<T> values_;
  std::uint64_t version_ = 0;
};

}  // namespace chromadist::cdest
