// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "chromadist/corpus.hpp"
#include "chromadist/discretize.hpp"
#include "chromadist/error.hpp"
#include "chromadist/tokenize.hpp"

namespace chromadist {

/// Per-description histogram estimator. For each description t, channel c and
/// bin i the stored mass is
///
///     (sum over observations of t of blur(v_c)[i] + 1) / (count_t + n)
///
/// i.e. the mean blurred observation with add-one smoothing. Descriptions are
/// keyed by their normalized full text; the model has no notion of tokens.
class HistogramModel {
 public:
  struct Entry {
    ChannelDistributions dists;
    std::size_t count = 0;
  };

  HistogramModel() = default;
  explicit HistogramModel(DiscretizerConfig config) : config_(config) {}

  const DiscretizerConfig& config() const { return config_; }
  std::size_t resolution() const { return config_.resolution; }
  const std::map<std::string, Entry>& table() const { return table_; }

  bool contains(std::string_view description) const {
    return table_.contains(normalize_description(description));
  }

  const ChannelDistributions& query(std::string_view description) const {
    auto it = table_.find(normalize_description(description));
    if (it == table_.end())
      throw Error(ErrorKind::unknown_description,
                  "'" + std::string(description) + "' has no training observations");
    return it->second.dists;
  }

  std::size_t count(std::string_view description) const {
    auto it = table_.find(normalize_description(description));
    return it == table_.end() ? 0 : it->second.count;
  }

  /// Used by checkpoint loading; distributions must already be normalized.
  void insert(std::string description, Entry entry) {
    for (const auto& d : entry.dists)
      if (d.resolution() != config_.resolution)
        throw Error(ErrorKind::configuration, "histogram entry resolution mismatch");
    table_[normalize_description(description)] = std::move(entry);
  }

 private:
  DiscretizerConfig config_;
  std::map<std::string, Entry> table_;
};

inline HistogramModel fit_baseline(std::span<const Observation> train,
                                   const DiscretizerConfig& config) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::invalid_input, "baseline needs training observations");
  const std::size_t n = config.resolution;

  std::map<std::string, HistogramModel::Entry> sums;
  for (const auto& obs : train) {
    auto& entry = sums[normalize_description(obs.description)];
    if (entry.count == 0)
      for (auto& d : entry.dists) d = BinnedDistribution(std::vector<double>(n, 0.0));
    ++entry.count;
    for (auto c : kChannels) {
      const auto ci = static_cast<std::size_t>(c);
      const auto blurred = blur(obs.color[c], c, config);
      for (std::size_t i = 0; i < n; ++i) entry.dists[ci][i] += blurred[i];
    }
  }

  HistogramModel model(config);
  for (auto& [desc, entry] : sums) {
    const double denom = static_cast<double>(entry.count + n);
    for (auto& d : entry.dists)
      for (std::size_t i = 0; i < n; ++i) d[i] = (d[i] + 1.0) / denom;
    model.insert(desc, std::move(entry));
  }
  return model;
}

}  // namespace chromadist
