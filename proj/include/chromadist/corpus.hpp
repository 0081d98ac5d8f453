// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chromadist/color.hpp"
#include "chromadist/error.hpp"
#include "chromadist/io.hpp"
#include "chromadist/random.hpp"
#include "chromadist/tokenize.hpp"

namespace chromadist {

enum class SplitLabel : std::uint8_t { train = 0, dev = 1, test = 2 };

inline constexpr std::array<SplitLabel, 3> kSplitLabels{SplitLabel::train, SplitLabel::dev,
                                                        SplitLabel::test};

inline const char* to_string(SplitLabel s) {
  switch (s) {
    case SplitLabel::train: return "train";
    case SplitLabel::dev: return "dev";
    case SplitLabel::test: return "test";
  }
  return "?";
}

inline std::optional<SplitLabel> parse_split_label(std::string_view text) {
  if (text == "train") return SplitLabel::train;
  if (text == "dev") return SplitLabel::dev;
  if (text == "test") return SplitLabel::test;
  return std::nullopt;
}

/// Dense bidirectional token <-> index map. Indices are assigned in insertion
/// order starting at 0.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary vocab;
    for (const auto& t : tokens) {
      if (vocab.find(t))
        throw Error(ErrorKind::invalid_input, "duplicate vocabulary token '" + t + "'");
      vocab.add(t);
    }
    return vocab;
  }

  std::size_t add(std::string_view token) {
    if (auto idx = find(token)) return *idx;
    const std::size_t idx = index_to_token_.size();
    index_to_token_.emplace_back(token);
    token_to_index_.emplace(index_to_token_.back(), idx);
    return idx;
  }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = token_to_index_.find(std::string(token));
    if (it == token_to_index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& token(std::size_t index) const { return index_to_token_.at(index); }
  std::size_t size() const { return index_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return index_to_token_; }

  /// Throws unknown_token naming every token that is missing.
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    std::vector<std::string> missing;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
      if (auto idx = find(t)) {
        out.push_back(*idx);
      } else if (std::find(missing.begin(), missing.end(), t) == missing.end()) {
        missing.push_back(t);
      }
    }
    if (!missing.empty()) {
      std::string msg = "not in vocabulary:";
      for (const auto& m : missing) msg += " '" + m + "'";
      throw Error(ErrorKind::unknown_token, msg);
    }
    return out;
  }

  std::vector<std::string> decode(std::span<const std::size_t> indices) const {
    std::vector<std::string> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(token(i));
    return out;
  }

  /// One token per line; line number (from 0) is the index.
  void write(std::ostream& out) const {
    for (const auto& t : index_to_token_) out << t << '\n';
  }

  static Vocabulary read(std::istream& in) {
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return from_tokens(tokens);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.index_to_token_ == b.index_to_token_;
  }

 private:
  std::unordered_map<std::string, std::size_t> token_to_index_;
  std::vector<std::string> index_to_token_;
};

/// One survey response.
struct Observation {
  std::string description;  // normalized text
  std::vector<std::size_t> tokens;
  ColorPoint color;
};

struct CorpusSplit {
  std::vector<Observation> train;
  std::vector<Observation> dev;
  std::vector<Observation> test;
  Vocabulary vocabulary;

  std::vector<Observation>& part(SplitLabel s) {
    return s == SplitLabel::train ? train : s == SplitLabel::dev ? dev : test;
  }
  const std::vector<Observation>& part(SplitLabel s) const {
    return s == SplitLabel::train ? train : s == SplitLabel::dev ? dev : test;
  }
  std::size_t size() const { return train.size() + dev.size() + test.size(); }
};

/// A parsed input row before tokenization.
struct RawRecord {
  std::string description;
  ColorPoint color;
  std::optional<SplitLabel> split;
  std::size_t line = 0;
};

/// Reads `description<TAB>h<TAB>s<TAB>v[<TAB>split]` rows. Lines starting
/// with '#' and blank lines are skipped.
inline std::vector<RawRecord> read_records(std::istream& in, bool has_header = false) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    while (true) {
      auto tab = rest.find('\t');
      cols.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    const std::string where = "line " + std::to_string(line_no);
    if (cols.size() != 4 && cols.size() != 5)
      throw Error(ErrorKind::invalid_input,
                  where + ": expected 4 or 5 tab-separated columns, got " +
                      std::to_string(cols.size()));
    RawRecord rec;
    rec.line = line_no;
    rec.description = std::string(cols[0]);
    if (normalize_description(rec.description).empty())
      throw Error(ErrorKind::invalid_input, where + ": empty description");
    double* fields[3] = {&rec.color.h, &rec.color.s, &rec.color.v};
    for (std::size_t c = 0; c < 3; ++c) {
      const char* name = channel_name(kChannels[c]);
      if (!parse_double(cols[c + 1], *fields[c]))
        throw Error(ErrorKind::invalid_input,
                    where + ": channel " + name + " is not a number: '" + std::string(cols[c + 1]) + "'");
      if (!(*fields[c] >= 0.0 && *fields[c] <= 1.0))
        throw Error(ErrorKind::domain, where + ": channel " + name + " = " +
                                           std::string(cols[c + 1]) + " outside [0,1]");
    }
    if (cols.size() == 5) {
      rec.split = parse_split_label(cols[4]);
      if (!rec.split)
        throw Error(ErrorKind::invalid_input,
                    where + ": split must be train, dev or test, got '" + std::string(cols[4]) + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

struct IngestOptions {
  /// train/dev/test weights for records without an explicit split column.
  std::array<double, 3> ratio{8.0, 1.0, 1.0};
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<SplitLabel> assign_splits(std::span<const RawRecord> records,
                                             const IngestOptions& opts) {
  std::vector<SplitLabel> labels(records.size(), SplitLabel::train);
  std::vector<std::size_t> unlabeled;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split) labels[i] = *records[i].split;
    else unlabeled.push_back(i);
  }
  if (unlabeled.empty()) return labels;

  const double total = opts.ratio[0] + opts.ratio[1] + opts.ratio[2];
  if (!(total > 0.0) || opts.ratio[0] < 0.0 || opts.ratio[1] < 0.0 || opts.ratio[2] < 0.0)
    throw Error(ErrorKind::configuration, "split ratio weights must be non-negative with a positive sum");
  Rng rng(opts.seed);
  shuffle(std::span<std::size_t>(unlabeled), rng);
  const auto n = static_cast<double>(unlabeled.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * opts.ratio[0] / total));
  const auto n_dev = std::min(unlabeled.size() - std::min(n_train, unlabeled.size()),
                              static_cast<std::size_t>(std::llround(n * opts.ratio[1] / total)));
  for (std::size_t k = 0; k < unlabeled.size(); ++k) {
    labels[unlabeled[k]] = k < n_train           ? SplitLabel::train
                           : k < n_train + n_dev ? SplitLabel::dev
                                                 : SplitLabel::test;
  }
  return labels;
}

/// Re-encodes observations from one vocabulary to another.
inline std::vector<Observation> reindex(std::span<const Observation> obs, const Vocabulary& from,
                                        const Vocabulary& to) {
  std::vector<Observation> out;
  out.reserve(obs.size());
  for (const auto& o : obs) {
    Observation copy = o;
    copy.tokens = to.encode(from.decode(o.tokens));
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace detail

/// Tokenizes and indexes records. The vocabulary comes from the train portion
/// only; dev/test tokens missing from it are rejected.
inline CorpusSplit ingest(std::span<const RawRecord> records, const Tokenizer& tokenizer,
                          const IngestOptions& opts = {}) {
  const auto labels = detail::assign_splits(records, opts);
  std::vector<std::vector<std::string>> token_strings(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      token_strings[i] = tokenizer(records[i].description);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(records[i].line) + ": " + e.what());
    }
  }

  CorpusSplit split;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (labels[i] == SplitLabel::train)
      for (const auto& t : token_strings[i]) split.vocabulary.add(t);

  std::set<std::string> missing;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Observation obs;
    obs.description = normalize_description(records[i].description);
    obs.color = records[i].color;
    for (const auto& t : token_strings[i]) {
      if (auto idx = split.vocabulary.find(t)) obs.tokens.push_back(*idx);
      else missing.insert(t);
    }
    split.part(labels[i]).push_back(std::move(obs));
  }
  if (!missing.empty()) {
    std::string msg = "dev/test tokens absent from the training vocabulary:";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw Error(ErrorKind::unknown_token, msg);
  }
  return split;
}

/// Writes observations in the input schema, with the split column filled in.
inline void write_manifest(std::ostream& out, std::span<const Observation> observations,
                           SplitLabel label, std::string_view header_comment = {}) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (const auto& o : observations) {
    out << o.description << '\t' << format_double(o.color.h) << '\t' << format_double(o.color.s)
        << '\t' << format_double(o.color.v) << '\t' << to_string(label) << '\n';
  }
}

struct ExtrapolationOptions {
  std::size_t count = 100;
  std::size_t min_other_uses = 8;
};

struct ExtrapolationSplit {
  CorpusSplit split;
  /// Held-out descriptions, in selection order (rarest first).
  std::vector<std::string> selected;
};

/// Holds out the `count` rarest descriptions whose every token keeps at least
/// `min_other_uses` training observations among the remaining descriptions.
/// Rarity counts observations across all three parts; ties go to the
/// lexicographically smaller description. Train keeps only non-selected
/// descriptions, dev/test keep only selected ones.
inline ExtrapolationSplit build_extrapolation_split(const CorpusSplit& full,
                                                    const ExtrapolationOptions& opts = {}) {
  if (opts.count == 0 || opts.min_other_uses == 0)
    throw Error(ErrorKind::configuration, "count and min_other_uses must be positive");

  std::map<std::string, std::size_t> desc_count;
  std::map<std::string, std::vector<std::size_t>> desc_tokens;
  for (auto label : kSplitLabels) {
    for (const auto& o : full.part(label)) {
      ++desc_count[o.description];
      desc_tokens.try_emplace(o.description, o.tokens);
    }
  }
  if (desc_count.size() <= opts.count)
    throw Error(ErrorKind::configuration,
                "corpus has " + std::to_string(desc_count.size()) +
                    " distinct descriptions; need more than count = " + std::to_string(opts.count));

  // Training observations containing each token, overall and per description.
  std::vector<std::size_t> token_uses(full.vocabulary.size(), 0);
  std::map<std::string, std::map<std::size_t, std::size_t>> desc_token_uses;
  for (const auto& o : full.train) {
    std::set<std::size_t> distinct(o.tokens.begin(), o.tokens.end());
    auto& per = desc_token_uses[o.description];
    for (auto t : distinct) {
      ++token_uses[t];
      ++per[t];
    }
  }

  std::vector<std::string> candidates;
  for (const auto& [d, _] : desc_count) candidates.push_back(d);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const std::string& a, const std::string& b) {
                     return desc_count[a] < desc_count[b];
                   });

  std::vector<std::string> selected;
  for (const auto& d : candidates) {
    if (selected.size() == opts.count) break;
    const auto& own = desc_token_uses[d];
    std::set<std::size_t> distinct(desc_tokens[d].begin(), desc_tokens[d].end());
    const bool ok = std::all_of(distinct.begin(), distinct.end(), [&](std::size_t t) {
      auto it = own.find(t);
      const std::size_t mine = it == own.end() ? 0 : it->second;
      return token_uses[t] - mine >= opts.min_other_uses;
    });
    if (!ok) continue;
    for (auto [t, n] : own) token_uses[t] -= n;
    selected.push_back(d);
  }
  if (selected.size() < opts.count)
    throw Error(ErrorKind::configuration,
                "only " + std::to_string(selected.size()) +
                    " descriptions satisfy min_other_uses = " + std::to_string(opts.min_other_uses) +
                    " (requested count = " + std::to_string(opts.count) + ")");

  const std::set<std::string> held(selected.begin(), selected.end());
  std::vector<Observation> train, dev, test;
  for (const auto& o : full.train)
    if (!held.contains(o.description)) train.push_back(o);
  for (const auto& o : full.dev)
    if (held.contains(o.description)) dev.push_back(o);
  for (const auto& o : full.test)
    if (held.contains(o.description)) test.push_back(o);

  ExtrapolationSplit out;
  for (const auto& o : train)
    for (auto t : o.tokens) out.split.vocabulary.add(full.vocabulary.token(t));
  out.split.train = detail::reindex(train, full.vocabulary, out.split.vocabulary);
  out.split.dev = detail::reindex(dev, full.vocabulary, out.split.vocabulary);
  out.split.test = detail::reindex(test, full.vocabulary, out.split.vocabulary);
  out.selected = std::move(selected);
  return out;
}

/// Groups observations by description, preserving first-seen order.
inline std::vector<std::pair<std::string, std::vector<const Observation*>>> group_by_description(
    std::span<const Observation> observations) {
  std::vector<std::pair<std::string, std::vector<const Observation*>>> groups;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& o : observations) {
    auto [it, inserted] = where.try_emplace(o.description, groups.size());
    if (inserted) groups.emplace_back(o.description, std::vector<const Observation*>{});
    groups[it->second].second.push_back(&o);
  }
  return groups;
}

}  // namespace chromadist
