// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chromadist/error.hpp"

namespace chromadist {

inline constexpr std::string_view kHyphenToken = "-";
inline constexpr std::string_view kIshToken = "ish";
inline constexpr std::string_view kYToken = "y";

/// Lowercases ASCII, trims, and collapses internal whitespace runs to one space.
/// This is also the key used for whole-description lookups.
inline std::string normalize_description(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

/// Whole-word replacements applied before affix splitting. Each rule maps one
/// word to one or more tokens, which are emitted verbatim.
///
/// File format: one rule per line, `word<TAB>token token ...`; blank lines and
/// lines starting with '#' are ignored.
class ReplacementRules {
 public:
  ReplacementRules() = default;

  void add(std::string word, std::vector<std::string> tokens) {
    if (word.empty() || tokens.empty())
      throw Error(ErrorKind::invalid_input, "replacement rule needs a word and at least one token");
    rules_[normalize_description(word)] = std::move(tokens);
  }

  const std::vector<std::string>* find(std::string_view word) const {
    auto it = rules_.find(std::string(word));
    return it == rules_.end() ? nullptr : &it->second;
  }

  /// Rules sorted by word.
  std::vector<std::pair<std::string, std::vector<std::string>>> entries() const {
    std::vector<std::pair<std::string, std::vector<std::string>>> out(rules_.begin(), rules_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  bool empty() const { return rules_.empty(); }
  std::size_t size() const { return rules_.size(); }

  static ReplacementRules parse(std::istream& in) {
    ReplacementRules rules;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error(ErrorKind::invalid_input,
                    "replacement rules line " + std::to_string(line_no) + ": expected a tab");
      std::vector<std::string> tokens;
      std::istringstream rest(line.substr(tab + 1));
      for (std::string tok; rest >> tok;) tokens.push_back(normalize_description(tok));
      rules.add(line.substr(0, tab), std::move(tokens));
    }
    return rules;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> rules_;
};

/// Splits color descriptions into words and affixes: hyphens become their own
/// token, and a trailing "ish" or "y" is split off when the remaining stem has
/// at least `min_stem` characters.
class Tokenizer {
 public:
  static constexpr std::size_t kDefaultMinStem = 4;

  Tokenizer() = default;
  explicit Tokenizer(ReplacementRules rules, std::size_t min_stem = kDefaultMinStem)
      : rules_(std::move(rules)), min_stem_(min_stem) {}

  std::vector<std::string> operator()(std::string_view description) const {
    const std::string normalized = normalize_description(description);
    if (normalized.empty())
      throw Error(ErrorKind::invalid_input, "empty color description");

    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos < normalized.size()) {
      auto end = normalized.find(' ', pos);
      if (end == std::string::npos) end = normalized.size();
      split_word(std::string_view(normalized).substr(pos, end - pos), tokens);
      pos = end + 1;
    }
    return tokens;
  }

  std::size_t min_stem() const { return min_stem_; }
  const ReplacementRules& rules() const { return rules_; }

 private:
  void split_word(std::string_view word, std::vector<std::string>& out) const {
    if (const auto* rep = rules_.find(word)) {
      out.insert(out.end(), rep->begin(), rep->end());
      return;
    }
    std::size_t pos = 0;
    while (pos <= word.size()) {
      auto hyphen = word.find('-', pos);
      const auto end = hyphen == std::string_view::npos ? word.size() : hyphen;
      if (end > pos) split_segment(word.substr(pos, end - pos), out);
      if (hyphen == std::string_view::npos) break;
      out.emplace_back(kHyphenToken);
      pos = hyphen + 1;
    }
  }

  void split_segment(std::string_view segment, std::vector<std::string>& out) const {
    if (const auto* rep = rules_.find(segment)) {
      out.insert(out.end(), rep->begin(), rep->end());
      return;
    }
    for (std::string_view affix : {kIshToken, kYToken}) {
      if (segment.size() >= affix.size() + min_stem_ && segment.ends_with(affix)) {
        out.emplace_back(segment.substr(0, segment.size() - affix.size()));
        out.emplace_back(affix);
        return;
      }
    }
    out.emplace_back(segment);
  }

  ReplacementRules rules_;
  std::size_t min_stem_ = kDefaultMinStem;
};

inline std::vector<std::string> tokenize(std::string_view description) {
  static const Tokenizer tokenizer;
  return tokenizer(description);
}

/// Inverse of tokenization: affix tokens attach to the preceding word and
/// hyphens join their neighbours without spaces.
inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  bool glue = true;
  for (const auto& tok : tokens) {
    if (tok == kHyphenToken) {
      out += tok;
      glue = true;
      continue;
    }
    const bool affix = (tok == kIshToken || tok == kYToken) && !out.empty() && out.back() != '-';
    if (!glue && !affix) out.push_back(' ');
    out += tok;
    glue = false;
  }
  return out;
}

}  // namespace chromadist
