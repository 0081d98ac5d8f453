// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chromadist/cdest/network.hpp"
#include "chromadist/cdest/parameters.hpp"
#include "chromadist/corpus.hpp"
#include "chromadist/discretize.hpp"
#include "chromadist/error.hpp"
#include "chromadist/evaluate.hpp"
#include "chromadist/parallel.hpp"
#include "chromadist/random.hpp"
#include "chromadist/tokenize.hpp"

namespace chromadist::cdest {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct CdestConfig {
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 128;
  std::size_t resolution = 64;
  std::optional<double> sigma;  // blur; unset means 1/(2n)
  HueMode hue_mode = HueMode::wrapped;
  double dropout = 0.5;  // drop probability
  AdamConfig optimizer;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: CHROMADIST_THREADS or hardware

  double keep() const { return 1.0 - dropout; }

  DiscretizerConfig discretizer() const { return {resolution, sigma, hue_mode}; }

  void validate() const {
    if (embed_dim == 0 || hidden_dim == 0 || resolution == 0)
      throw Error(ErrorKind::configuration, "embed, hidden and resolution must be positive");
    if (!(keep() > 0.0 && keep() <= 1.0))
      throw Error(ErrorKind::configuration, "dropout must be in [0, 1)");
    if (batch_size == 0) throw Error(ErrorKind::configuration, "batch size must be positive");
    if (!(optimizer.learning_rate > 0.0))
      throw Error(ErrorKind::configuration, "learning rate must be positive");
    discretizer().validate();
  }
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(AdamConfig config, std::size_t size)
      : config_(config), m_(size, 0.0f), v_(size, 0.0f) {}

  /// `grad` holds the (already averaged) gradient.
  void step(Parameters<float>& params, const Parameters<float>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<float>(config_.beta1);
    const auto b2 = static_cast<float>(config_.beta2);
    const auto lr = static_cast<float>(config_.learning_rate * std::sqrt(c2) / c1);
    const auto eps = static_cast<float>(config_.epsilon * std::sqrt(c2));
    auto w = params.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0f - b1) * g[i];
      v_[i] = b2 * v_[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= lr * m_[i] / (std::sqrt(v_[i]) + eps);
    }
    params.touch();
  }

 private:
  AdamConfig config_;
  std::vector<float> m_, v_;
  std::uint64_t t_ = 0;
};

/// Trained network plus what is needed to query it by description.
struct CdestModel {
  Parameters<float> params;
  Vocabulary vocabulary;
  Tokenizer tokenizer;

  std::size_t resolution() const { return params.dims().resolution; }

  /// Throws unknown_token listing any token outside the vocabulary.
  ChannelDistributions predict(std::string_view description) const {
    const auto indices = vocabulary.encode(tokenizer(description));
    return forward(params, std::span<const std::size_t>(indices), Mode::infer).distributions();
  }

  ChannelDistributions predict_tokens(std::span<const std::size_t> tokens) const {
    return forward(params, tokens, Mode::infer).distributions();
  }
};

inline ChannelDistributions predict(const Parameters<float>& params, const Vocabulary& vocabulary,
                                    std::string_view description,
                                    const Tokenizer& tokenizer = Tokenizer{}) {
  const auto indices = vocabulary.encode(tokenizer(description));
  return forward(params, std::span<const std::size_t>(indices), Mode::infer).distributions();
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_pp = std::numeric_limits<double>::quiet_NaN();
  double dev_pp_std = std::numeric_limits<double>::quiet_NaN();
};

/// `epoch<TAB>train_loss<TAB>dev_pp<TAB>dev_pp_std`
inline std::string format_epoch_log(const EpochLog& e) {
  return std::to_string(e.epoch) + '\t' + format_double(e.train_loss) + '\t' +
         format_double(e.dev_pp) + '\t' + format_double(e.dev_pp_std);
}

struct TrainResult {
  Parameters<float> params;  // best by dev standardized perplexity
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Called after every epoch with the epoch's log entry and the best
/// parameters so far; `improved` says whether this epoch produced them.
using EpochCallback =
    std::function<void(const EpochLog&, const Parameters<float>& best, bool improved)>;

namespace detail {

inline constexpr std::size_t kChunk = 16;

inline std::vector<float> blurred_target(const ColorPoint& p, const DiscretizerConfig& dc) {
  const auto dists = blur(p, dc);
  std::vector<float> out;
  out.reserve(3 * dc.resolution);
  for (const auto& d : dists)
    for (double m : d.masses()) out.push_back(static_cast<float>(m));
  return out;
}

}  // namespace detail

/// Standardized perplexity of the network on observations (one-hot bin
/// selection of the point under each head).
inline EvalReport evaluate_params(const Parameters<float>& params,
                                  std::span<const Observation> observations,
                                  std::string label = "cdest") {
  std::unordered_map<std::string, const Observation*> first_seen;
  for (const auto& o : observations) first_seen.try_emplace(o.description, &o);
  DistributionOracle oracle([&](std::string_view desc) {
    const auto& tokens = first_seen.at(std::string(desc))->tokens;
    return forward(params, std::span<const std::size_t>(tokens), Mode::infer).distributions();
  });
  return perplexity(oracle, observations, params.dims().resolution, std::move(label));
}

/// Mini-batch Adam on the summed cross-entropy against blurred targets, with
/// early stopping on dev standardized perplexity (train loss when there is no
/// dev data). Reproducible for a given seed regardless of thread count.
inline TrainResult train(const CorpusSplit& split, const CdestConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (split.train.empty()) throw Error(ErrorKind::invalid_input, "no training observations");
  const Dims dims{split.vocabulary.size(), config.embed_dim, config.hidden_dim, config.resolution};
  for (auto label : kSplitLabels)
    for (const auto& o : split.part(label))
      for (auto t : o.tokens)
        if (t >= dims.vocab)
          throw Error(ErrorKind::invalid_input, "observation token outside the vocabulary");

  const DiscretizerConfig dc = config.discretizer();
  const std::size_t n = config.resolution;
  const std::size_t threads = thread_count(config.threads);

  std::vector<std::vector<float>> targets(split.train.size());
  parallel_for(split.train.size(), threads,
               [&](std::size_t i) { targets[i] = detail::blurred_target(split.train[i].color, dc); });

  Parameters<float> params = Parameters<float>::initialized(dims, config.seed);
  Adam adam(config.optimizer, params.size());
  TrainResult result;
  result.params = params;
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, 0x5eed));

  const std::size_t max_chunks = (config.batch_size + detail::kChunk - 1) / detail::kChunk;
  std::vector<Parameters<float>> chunk_grads;
  chunk_grads.reserve(max_chunks);
  for (std::size_t i = 0; i < max_chunks; ++i) chunk_grads.emplace_back(dims);
  std::vector<double> chunk_loss(max_chunks);
  Parameters<float> grad(dims);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::size_t chunks = (stop - start + detail::kChunk - 1) / detail::kChunk;
      parallel_for(chunks, threads, [&](std::size_t k) {
        auto& g = chunk_grads[k];
        g.set_zero();
        double l = 0.0;
        const std::size_t lo = start + k * detail::kChunk;
        const std::size_t hi = std::min(stop, lo + detail::kChunk);
        for (std::size_t pos = lo; pos < hi; ++pos) {
          const std::size_t idx = order[pos];
          Rng rng(derive_seed(config.seed, epoch, pos));
          const auto cache = forward(params, std::span<const std::size_t>(split.train[idx].tokens),
                                     Mode::train, Dropout{config.keep(), &rng});
          const auto& tv = targets[idx];
          const Target<float> target{std::span<const float>(tv.data(), n),
                                     std::span<const float>(tv.data() + n, n),
                                     std::span<const float>(tv.data() + 2 * n, n)};
          l += backward(params, cache, target, g);
        }
        chunk_loss[k] = l;
      });

      grad.set_zero();
      double batch_loss = 0.0;
      auto gv = grad.values();
      for (std::size_t k = 0; k < chunks; ++k) {
        batch_loss += chunk_loss[k];
        auto cv = chunk_grads[k].values();
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += cv[i];
      }
      const auto scale = 1.0f / static_cast<float>(stop - start);
      for (auto& x : gv) x *= scale;
      if (!std::isfinite(batch_loss) || !grad.all_finite())
        throw Error(ErrorKind::training_failure, "non-finite loss at epoch " +
                                                     std::to_string(epoch) + ", batch " +
                                                     std::to_string(batch_no));
      adam.step(params, grad);
      if (!params.all_finite())
        throw Error(ErrorKind::training_failure, "non-finite parameters at epoch " +
                                                     std::to_string(epoch) + ", batch " +
                                                     std::to_string(batch_no));
      epoch_loss += batch_loss;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_loss / static_cast<double>(order.size());
    double score = entry.train_loss;
    if (!split.dev.empty()) {
      const auto report = evaluate_params(params, split.dev);
      entry.dev_pp = report.perplexity;
      entry.dev_pp_std = report.standardized;
      score = report.standardized;
    }
    const bool improved = score < best_score;
    if (improved) {
      best_score = score;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry, result.params, improved);
    if (since_best >= config.patience && config.patience > 0) break;
  }
  return result;
}

}  // namespace chromadist::cdest
