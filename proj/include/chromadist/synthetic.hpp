// SPDX-License-Identifier: Apache-2.0
#pragma once

// Compositional toy corpora with known generating distributions. Base tokens
// ("red", "blue", ...) each own a factorized HSV distribution: a wrapped
// Gaussian on hue and Gaussians truncated to [0,1] on saturation and value.
// Modifier tokens ("dark", "pale", ...) rescale those parameters the same way
// for every base, so "dark red" is predictable from "dark blue" and "red".

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "chromadist/color.hpp"
#include "chromadist/corpus.hpp"
#include "chromadist/discretize.hpp"
#include "chromadist/error.hpp"
#include "chromadist/random.hpp"

namespace chromadist {

struct ChannelLaw {
  double mean = 0.5;
  double sd = 0.1;
};

/// Generating distribution of one description.
struct GroundTruth {
  std::string description;
  std::array<ChannelLaw, 3> channels;  // h (wrapped), s, v (truncated)

  ColorPoint mode() const { return {channels[0].mean, channels[1].mean, channels[2].mean}; }

  /// A point far from the mode in every channel.
  ColorPoint anti_mode() const {
    const auto far = [](double m) { return m >= 0.5 ? 0.01 : 0.99; };
    return {std::fmod(channels[0].mean + 0.5, 1.0), far(channels[1].mean), far(channels[2].mean)};
  }

  /// Exact bin masses of the generating distribution.
  ChannelDistributions binned(std::size_t n) const {
    return {blur(channels[0].mean, channels[0].sd, n, true),
            blur(channels[1].mean, channels[1].sd, n, false),
            blur(channels[2].mean, channels[2].sd, n, false)};
  }

  ColorPoint sample(Rng& rng) const {
    ColorPoint p;
    const double h = channels[0].mean + channels[0].sd * standard_normal(rng);
    p.h = h - std::floor(h);
    const auto truncated = [&](const ChannelLaw& law) {
      for (;;) {
        const double x = law.mean + law.sd * standard_normal(rng);
        if (x >= 0.0 && x <= 1.0) return x;
      }
    };
    p.s = truncated(channels[1]);
    p.v = truncated(channels[2]);
    return p;
  }
};

struct Modifier {
  std::string name;
  double saturation_scale = 1.0;
  double value_scale = 1.0;
  double hue_spread = 1.0;  // multiplies the hue standard deviation
};

struct SyntheticOptions {
  std::uint64_t seed = 1;
  std::size_t n_base = 5;
  std::size_t n_modifiers = 2;
  std::size_t samples_per_name = 500;
  /// Per-name train/dev/test weights.
  std::array<double, 3> ratio{8.0, 1.0, 1.0};
  /// Modifier-base pairs per modifier that never reach the extrapolation
  /// training set.
  std::size_t held_out_per_modifier = 1;
};

struct SyntheticCorpus {
  /// Every name with observations in all three parts.
  CorpusSplit full;
  /// Train lacks the held-out pairs entirely; dev/test hold only them.
  CorpusSplit extrapolation;
  std::vector<GroundTruth> truth;
  std::vector<std::string> bases;
  std::vector<std::string> modifiers;
  std::vector<std::string> held_out;

  const GroundTruth& truth_for(std::string_view description) const {
    for (const auto& t : truth)
      if (t.description == description) return t;
    throw Error(ErrorKind::unknown_description, std::string(description));
  }

  bool is_held_out(std::string_view description) const {
    return std::find(held_out.begin(), held_out.end(), description) != held_out.end();
  }
};

namespace detail {

inline const std::vector<std::string>& base_names() {
  static const std::vector<std::string> names{"red",   "orange", "yellow", "green",
                                              "blue",  "purple", "pink",   "teal",
                                              "olive", "violet", "cyan",   "magenta"};
  return names;
}

// The first two are the pure forms: a value-darkening modifier and an
// "-ish"-style modifier that only widens the hue spread.
inline const std::vector<Modifier>& modifier_table() {
  static const std::vector<Modifier> mods{
      {"dark", 1.0, 0.5, 1.0},   {"dull", 1.0, 1.0, 2.5},   {"pale", 0.4, 1.0, 1.0},
      {"deep", 1.2, 0.65, 1.0},  {"bright", 1.0, 1.25, 1.0}, {"dusty", 0.6, 1.0, 1.8},
  };
  return mods;
}

inline GroundTruth apply_modifier(const GroundTruth& base, const Modifier& m) {
  GroundTruth out = base;
  out.description = m.name + " " + base.description;
  out.channels[0].sd *= m.hue_spread;
  out.channels[1].mean = std::clamp(base.channels[1].mean * m.saturation_scale, 0.05, 0.95);
  out.channels[2].mean = std::clamp(base.channels[2].mean * m.value_scale, 0.05, 0.95);
  return out;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic(const SyntheticOptions& opts) {
  if (opts.n_base < 2 || opts.n_modifiers < 1 || opts.samples_per_name < 1)
    throw Error(ErrorKind::configuration,
                "synthetic corpus needs n_base >= 2, n_modifiers >= 1, samples_per_name >= 1");
  if (opts.held_out_per_modifier >= opts.n_base)
    throw Error(ErrorKind::configuration, "every modifier needs at least one training pair");

  Rng rng(derive_seed(opts.seed, 0xc0105));
  SyntheticCorpus corpus;
  const double nb = static_cast<double>(opts.n_base);

  std::vector<GroundTruth> bases;
  for (std::size_t b = 0; b < opts.n_base; ++b) {
    GroundTruth g;
    g.description = b < detail::base_names().size() ? detail::base_names()[b]
                                                    : "hue" + std::to_string(b + 1);
    const double hue = (static_cast<double>(b) + 0.5 + uniform(rng, -0.15, 0.15)) / nb;
    g.channels[0] = {hue - std::floor(hue), uniform(rng, 0.02, 0.04)};
    g.channels[1] = {uniform(rng, 0.45, 0.7), uniform(rng, 0.06, 0.08)};
    g.channels[2] = {uniform(rng, 0.5, 0.75), uniform(rng, 0.06, 0.08)};
    bases.push_back(g);
    corpus.bases.push_back(g.description);
  }

  std::vector<Modifier> modifiers;
  for (std::size_t m = 0; m < opts.n_modifiers; ++m) {
    if (m < detail::modifier_table().size()) {
      modifiers.push_back(detail::modifier_table()[m]);
    } else {
      modifiers.push_back({"mod" + std::to_string(m + 1), uniform(rng, 0.4, 1.2),
                           uniform(rng, 0.4, 1.2), uniform(rng, 1.0, 2.5)});
    }
    corpus.modifiers.push_back(modifiers.back().name);
  }

  corpus.truth = bases;
  std::set<std::string> held;
  for (std::size_t m = 0; m < modifiers.size(); ++m) {
    for (std::size_t b = 0; b < bases.size(); ++b) {
      corpus.truth.push_back(detail::apply_modifier(bases[b], modifiers[m]));
      // Pair (m, b) is held out when b is one of the next
      // held_out_per_modifier bases after m (cyclically).
      const std::size_t offset = (b + opts.n_base - m % opts.n_base) % opts.n_base;
      if (offset < opts.held_out_per_modifier) {
        corpus.held_out.push_back(corpus.truth.back().description);
        held.insert(corpus.truth.back().description);
      }
    }
  }

  const double total = opts.ratio[0] + opts.ratio[1] + opts.ratio[2];
  const double per = static_cast<double>(opts.samples_per_name);
  const auto n_train = static_cast<std::size_t>(std::llround(per * opts.ratio[0] / total));
  const auto n_dev = std::min(opts.samples_per_name - std::min(n_train, opts.samples_per_name),
                              static_cast<std::size_t>(std::llround(per * opts.ratio[1] / total)));

  std::vector<RawRecord> records;
  records.reserve(corpus.truth.size() * opts.samples_per_name);
  for (const auto& g : corpus.truth) {
    for (std::size_t k = 0; k < opts.samples_per_name; ++k) {
      RawRecord rec;
      rec.description = g.description;
      rec.color = g.sample(rng);
      rec.split = k < n_train ? SplitLabel::train : k < n_train + n_dev ? SplitLabel::dev : SplitLabel::test;
      rec.line = records.size() + 1;
      records.push_back(std::move(rec));
    }
  }
  corpus.full = ingest(records, Tokenizer{});

  auto& ex = corpus.extrapolation;
  std::vector<Observation> train, dev, test;
  for (const auto& o : corpus.full.train)
    if (!held.contains(o.description)) train.push_back(o);
  for (const auto& o : corpus.full.dev)
    if (held.contains(o.description)) dev.push_back(o);
  for (const auto& o : corpus.full.test)
    if (held.contains(o.description)) test.push_back(o);
  for (const auto& o : train)
    for (auto t : o.tokens) ex.vocabulary.add(corpus.full.vocabulary.token(t));
  ex.train = detail::reindex(train, corpus.full.vocabulary, ex.vocabulary);
  ex.dev = detail::reindex(dev, corpus.full.vocabulary, ex.vocabulary);
  ex.test = detail::reindex(test, corpus.full.vocabulary, ex.vocabulary);
  return corpus;
}

/// `description<TAB>h_mean<TAB>h_sd<TAB>s_mean<TAB>s_sd<TAB>v_mean<TAB>v_sd<TAB>held_out`
inline void write_ground_truth(std::ostream& out, const SyntheticCorpus& corpus) {
  out << "description\th_mean\th_sd\ts_mean\ts_sd\tv_mean\tv_sd\theld_out\n";
  for (const auto& g : corpus.truth) {
    out << g.description;
    for (const auto& law : g.channels) out << '\t' << format_double(law.mean) << '\t' << format_double(law.sd);
    out << '\t' << (corpus.is_held_out(g.description) ? 1 : 0) << '\n';
  }
}

}  // namespace chromadist
