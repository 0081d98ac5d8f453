// SPDX-License-Identifier: Apache-2.0
#pragma once

// Embedding -> GRU -> affine+ReLU -> three affine+softmax heads (hue,
// saturation, value).
//
// GRU step, with x the token embedding and h the previous state:
//
//   z  = sigmoid(W_z x + U_z h + b_z)           update gate
//   r  = sigmoid(W_r x + U_r h + b_r)           reset gate
//   c  = tanh(W_c x + U_c (r * h) + b_c)        candidate
//   h' = z * h + (1 - z) * c
//
// The state starts at zero and the last state feeds the ReLU layer. In train
// mode inverted dropout masks the GRU output and the ReLU output.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "chromadist/cdest/parameters.hpp"
#include "chromadist/discretize.hpp"
#include "chromadist/error.hpp"
#include "chromadist/random.hpp"

namespace chromadist::cdest {

enum class Mode { train, infer };

namespace detail {

// y[r] += sum_c W[r,c] x[c]
template <class T>
void matvec_acc(std::span<const T> w, std::size_t rows, std::size_t cols, const T* x, T* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = w.data() + r * cols;
    T acc = T(0);
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// dx[c] += sum_r W[r,c] dy[r]
template <class T>
void matvec_t_acc(std::span<const T> w, std::size_t rows, std::size_t cols, const T* dy, T* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = w.data() + r * cols;
    const T g = dy[r];
    if (g == T(0)) continue;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

// dW[r,c] += dy[r] x[c]
template <class T>
void outer_acc(std::span<T> dw, std::size_t rows, std::size_t cols, const T* dy, const T* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T g = dy[r];
    if (g == T(0)) continue;
    T* row = dw.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
void softmax_inplace(std::span<T> v) {
  const T mx = *std::max_element(v.begin(), v.end());
  T sum = T(0);
  for (T& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (T& x : v) x /= sum;
}

template <class T>
void make_mask(std::vector<T>& mask, std::size_t size, double keep, Rng& rng) {
  mask.assign(size, T(0));
  const T scale = static_cast<T>(1.0 / keep);
  for (auto& m : mask)
    if (keep >= 1.0 || uniform01(rng) < keep) m = scale;
}

}  // namespace detail

/// Activations kept by `forward` for the backward pass.
template <class T>
struct ForwardCache {
  std::vector<std::size_t> tokens;
  std::size_t hidden = 0;
  std::vector<T> states;     // (steps + 1) x hidden; row 0 is the zero state
  std::vector<T> update;     // steps x hidden
  std::vector<T> reset;      // steps x hidden
  std::vector<T> candidate;  // steps x hidden
  std::vector<T> gru_mask;   // empty when no dropout was applied
  std::vector<T> gru_out;    // last state after dropout
  std::vector<T> relu;       // ReLU activations before dropout
  std::vector<T> relu_mask;
  std::vector<T> shared;     // ReLU output after dropout
  std::array<std::vector<T>, 3> probs;

  const void* owner = nullptr;
  std::uint64_t owner_version = 0;

  std::size_t steps() const { return tokens.size(); }
  const T* state(std::size_t t) const { return states.data() + t * hidden; }

  ChannelDistributions distributions() const {
    ChannelDistributions out;
    for (std::size_t c = 0; c < 3; ++c)
      out[c] = BinnedDistribution(std::vector<double>(probs[c].begin(), probs[c].end()));
    return out;
  }
};

/// Dropout for train mode. keep = 1 reproduces inference exactly.
struct Dropout {
  double keep = 1.0;
  Rng* rng = nullptr;
};

template <class T>
ForwardCache<T> forward(const Parameters<T>& params, std::span<const std::size_t> tokens,
                        Mode mode = Mode::infer, Dropout dropout = {}) {
  const Dims& d = params.dims();
  if (tokens.empty()) throw Error(ErrorKind::invalid_input, "empty token sequence");
  for (auto t : tokens)
    if (t >= d.vocab)
      throw Error(ErrorKind::invalid_input,
                  "token index " + std::to_string(t) + " out of range for vocabulary of " +
                      std::to_string(d.vocab));
  const bool use_dropout = mode == Mode::train && dropout.keep < 1.0;
  if (mode == Mode::train && !(dropout.keep > 0.0 && dropout.keep <= 1.0))
    throw Error(ErrorKind::configuration, "dropout keep probability must be in (0, 1]");
  if (use_dropout && dropout.rng == nullptr)
    throw Error(ErrorKind::configuration, "train-mode dropout needs a random source");

  const std::size_t H = d.hidden, E = d.embed, steps = tokens.size();
  ForwardCache<T> cache;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.hidden = H;
  cache.owner = &params;
  cache.owner_version = params.version();
  cache.states.assign((steps + 1) * H, T(0));
  cache.update.resize(steps * H);
  cache.reset.resize(steps * H);
  cache.candidate.resize(steps * H);

  const auto emb = params.block(Block::embedding);
  std::vector<T> az(H), ar(H), ac(H), rh(H);
  for (std::size_t t = 0; t < steps; ++t) {
    const T* x = emb.data() + tokens[t] * E;
    const T* h = cache.states.data() + t * H;
    T* h_next = cache.states.data() + (t + 1) * H;
    T* z = cache.update.data() + t * H;
    T* r = cache.reset.data() + t * H;
    T* c = cache.candidate.data() + t * H;

    auto bz = params.block(Block::b_update);
    auto br = params.block(Block::b_reset);
    std::copy(bz.begin(), bz.end(), az.begin());
    std::copy(br.begin(), br.end(), ar.begin());
    detail::matvec_acc(params.block(Block::w_update), H, E, x, az.data());
    detail::matvec_acc(params.block(Block::u_update), H, H, h, az.data());
    detail::matvec_acc(params.block(Block::w_reset), H, E, x, ar.data());
    detail::matvec_acc(params.block(Block::u_reset), H, H, h, ar.data());
    for (std::size_t i = 0; i < H; ++i) {
      z[i] = detail::sigmoid(az[i]);
      r[i] = detail::sigmoid(ar[i]);
      rh[i] = r[i] * h[i];
    }
    auto bc = params.block(Block::b_candidate);
    std::copy(bc.begin(), bc.end(), ac.begin());
    detail::matvec_acc(params.block(Block::w_candidate), H, E, x, ac.data());
    detail::matvec_acc(params.block(Block::u_candidate), H, H, rh.data(), ac.data());
    for (std::size_t i = 0; i < H; ++i) {
      c[i] = std::tanh(ac[i]);
      h_next[i] = z[i] * h[i] + (T(1) - z[i]) * c[i];
    }
  }

  const T* last = cache.state(steps);
  cache.gru_out.assign(last, last + H);
  if (use_dropout) {
    detail::make_mask(cache.gru_mask, H, dropout.keep, *dropout.rng);
    for (std::size_t i = 0; i < H; ++i) cache.gru_out[i] *= cache.gru_mask[i];
  }

  auto br = params.block(Block::b_relu);
  cache.relu.assign(br.begin(), br.end());
  detail::matvec_acc(params.block(Block::w_relu), H, H, cache.gru_out.data(), cache.relu.data());
  for (auto& a : cache.relu) a = std::max(a, T(0));
  cache.shared = cache.relu;
  if (use_dropout) {
    detail::make_mask(cache.relu_mask, H, dropout.keep, *dropout.rng);
    for (std::size_t i = 0; i < H; ++i) cache.shared[i] *= cache.relu_mask[i];
  }

  for (std::size_t c = 0; c < 3; ++c) {
    auto bias = params.block(kHeadBiases[c]);
    cache.probs[c].assign(bias.begin(), bias.end());
    detail::matvec_acc(params.block(kHeadWeights[c]), d.resolution, H, cache.shared.data(),
                       cache.probs[c].data());
    detail::softmax_inplace(std::span<T>(cache.probs[c]));
  }
  return cache;
}

/// Soft-label target: three probability vectors of the network's resolution.
template <class T>
using Target = std::array<std::span<const T>, 3>;

/// Summed cross-entropy of the three heads, in nats.
template <class P, class Q>
double cross_entropy(const std::array<P, 3>& predicted, const std::array<Q, 3>& target) {
  double loss = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& p = predicted[c];
    const auto& q = target[c];
    if (std::size(p) != std::size(q))
      throw Error(ErrorKind::configuration, "prediction/target resolution mismatch");
    for (std::size_t i = 0; i < std::size(p); ++i)
      if (q[i] != 0) loss -= static_cast<double>(q[i]) * std::log(static_cast<double>(p[i]));
  }
  return loss;
}

inline double loss(const ChannelDistributions& predicted, const ChannelDistributions& target) {
  std::array<std::span<const double>, 3> p, q;
  for (std::size_t c = 0; c < 3; ++c) {
    p[c] = predicted[c].masses();
    q[c] = target[c].masses();
  }
  return cross_entropy(p, q);
}

/// Adds d(loss)/d(params) for one forward pass to `grad`. Returns the loss.
template <class T>
double backward(const Parameters<T>& params, const ForwardCache<T>& cache, const Target<T>& target,
                Parameters<T>& grad) {
  const Dims& d = params.dims();
  if (cache.owner != &params || cache.owner_version != params.version() || cache.steps() == 0)
    throw Error(ErrorKind::invalid_state, "forward cache does not belong to these parameters");
  if (!(grad.dims() == d))
    throw Error(ErrorKind::configuration, "gradient dimensions do not match parameters");
  for (std::size_t c = 0; c < 3; ++c)
    if (target[c].size() != d.resolution)
      throw Error(ErrorKind::configuration, "target resolution mismatch");

  const std::size_t H = d.hidden, E = d.embed, n = d.resolution;
  std::array<std::span<const T>, 3> predicted;
  for (std::size_t c = 0; c < 3; ++c) predicted[c] = cache.probs[c];
  const double total_loss = cross_entropy(predicted, target);

  // Heads. d(CE)/d(logits) = p * sum(target) - target.
  std::vector<T> d_shared(H, T(0)), d_logits(n);
  for (std::size_t c = 0; c < 3; ++c) {
    T mass = T(0);
    for (T q : target[c]) mass += q;
    for (std::size_t i = 0; i < n; ++i) d_logits[i] = cache.probs[c][i] * mass - target[c][i];
    detail::outer_acc(grad.block(kHeadWeights[c]), n, H, d_logits.data(), cache.shared.data());
    auto gb = grad.block(kHeadBiases[c]);
    for (std::size_t i = 0; i < n; ++i) gb[i] += d_logits[i];
    detail::matvec_t_acc(params.block(kHeadWeights[c]), n, H, d_logits.data(), d_shared.data());
  }

  // ReLU layer.
  std::vector<T> d_pre(H);
  for (std::size_t i = 0; i < H; ++i) {
    T g = d_shared[i];
    if (!cache.relu_mask.empty()) g *= cache.relu_mask[i];
    d_pre[i] = cache.relu[i] > T(0) ? g : T(0);
  }
  detail::outer_acc(grad.block(Block::w_relu), H, H, d_pre.data(), cache.gru_out.data());
  {
    auto gb = grad.block(Block::b_relu);
    for (std::size_t i = 0; i < H; ++i) gb[i] += d_pre[i];
  }
  std::vector<T> dh(H, T(0));
  detail::matvec_t_acc(params.block(Block::w_relu), H, H, d_pre.data(), dh.data());
  if (!cache.gru_mask.empty())
    for (std::size_t i = 0; i < H; ++i) dh[i] *= cache.gru_mask[i];

  // Back through time.
  std::vector<T> dh_prev(H), daz(H), dar(H), dac(H), drh(H), rh(H), dx(E);
  auto g_emb = grad.block(Block::embedding);
  const auto emb = params.block(Block::embedding);
  for (std::size_t step = cache.steps(); step-- > 0;) {
    const T* x = emb.data() + cache.tokens[step] * E;
    const T* h = cache.state(step);
    const T* z = cache.update.data() + step * H;
    const T* r = cache.reset.data() + step * H;
    const T* c = cache.candidate.data() + step * H;

    for (std::size_t i = 0; i < H; ++i) {
      dh_prev[i] = dh[i] * z[i];
      const T dz = dh[i] * (h[i] - c[i]);
      const T dc = dh[i] * (T(1) - z[i]);
      daz[i] = dz * z[i] * (T(1) - z[i]);
      dac[i] = dc * (T(1) - c[i] * c[i]);
      rh[i] = r[i] * h[i];
    }
    std::fill(drh.begin(), drh.end(), T(0));
    detail::matvec_t_acc(params.block(Block::u_candidate), H, H, dac.data(), drh.data());
    for (std::size_t i = 0; i < H; ++i) {
      dar[i] = drh[i] * h[i] * r[i] * (T(1) - r[i]);
      dh_prev[i] += drh[i] * r[i];
    }

    detail::outer_acc(grad.block(Block::w_update), H, E, daz.data(), x);
    detail::outer_acc(grad.block(Block::u_update), H, H, daz.data(), h);
    detail::outer_acc(grad.block(Block::w_reset), H, E, dar.data(), x);
    detail::outer_acc(grad.block(Block::u_reset), H, H, dar.data(), h);
    detail::outer_acc(grad.block(Block::w_candidate), H, E, dac.data(), x);
    detail::outer_acc(grad.block(Block::u_candidate), H, H, dac.data(), rh.data());
    auto gbz = grad.block(Block::b_update);
    auto gbr = grad.block(Block::b_reset);
    auto gbc = grad.block(Block::b_candidate);
    for (std::size_t i = 0; i < H; ++i) {
      gbz[i] += daz[i];
      gbr[i] += dar[i];
      gbc[i] += dac[i];
    }

    detail::matvec_t_acc(params.block(Block::u_update), H, H, daz.data(), dh_prev.data());
    detail::matvec_t_acc(params.block(Block::u_reset), H, H, dar.data(), dh_prev.data());

    std::fill(dx.begin(), dx.end(), T(0));
    detail::matvec_t_acc(params.block(Block::w_update), H, E, daz.data(), dx.data());
    detail::matvec_t_acc(params.block(Block::w_reset), H, E, dar.data(), dx.data());
    detail::matvec_t_acc(params.block(Block::w_candidate), H, E, dac.data(), dx.data());
    T* g_row = g_emb.data() + cache.tokens[step] * E;
    for (std::size_t k = 0; k < E; ++k) g_row[k] += dx[k];

    dh.swap(dh_prev);
  }
  return total_loss;
}

}  // namespace chromadist::cdest
