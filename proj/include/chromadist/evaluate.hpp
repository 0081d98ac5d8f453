// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chromadist/color.hpp"
#include "chromadist/corpus.hpp"
#include "chromadist/discretize.hpp"
#include "chromadist/error.hpp"
#include "chromadist/io.hpp"

namespace chromadist {

struct EvalReport {
  std::string model;
  std::size_t resolution = 0;
  std::size_t observation_count = 0;
  double perplexity = 0.0;
  /// perplexity / n^3; a uniform model scores 1.
  double standardized = 0.0;
};

namespace detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

/// Perplexity 2^(-mean log2 p) of `oracle(description, point)` over `test`.
template <class Oracle>
EvalReport perplexity(Oracle&& oracle, std::span<const Observation> test, std::size_t resolution,
                      std::string model_label = {}) {
  if (test.empty()) throw Error(ErrorKind::evaluation, "empty test set");
  if (resolution == 0) throw Error(ErrorKind::configuration, "resolution must be positive");
  detail::CompensatedSum sum;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& obs = test[i];
    const double p = oracle(std::string_view(obs.description), obs.color);
    if (!(p > 0.0) || !std::isfinite(p))
      throw Error(ErrorKind::evaluation, "model assigned probability " + format_double(p) +
                                             " to item " + std::to_string(i) + " ('" +
                                             obs.description + "')");
    sum.add(std::log2(p));
  }
  EvalReport report;
  report.model = std::move(model_label);
  report.resolution = resolution;
  report.observation_count = test.size();
  report.perplexity = std::exp2(-sum.value() / static_cast<double>(test.size()));
  const double n = static_cast<double>(resolution);
  report.standardized = report.perplexity / (n * n * n);
  return report;
}

/// Oracle assigning every point the uniform probability n^-3.
inline auto uniform_oracle(std::size_t resolution) {
  const double n = static_cast<double>(resolution);
  const double p = 1.0 / (n * n * n);
  return [p](std::string_view, const ColorPoint&) { return p; };
}

/// Turns a description -> ChannelDistributions estimator into a probability
/// oracle, estimating each distinct description once.
template <class Estimator>
class DistributionOracle {
 public:
  explicit DistributionOracle(Estimator estimator) : estimator_(std::move(estimator)) {}

  const ChannelDistributions& distributions(std::string_view description) {
    auto it = cache_.find(std::string(description));
    if (it == cache_.end())
      it = cache_.emplace(std::string(description), estimator_(description)).first;
    return it->second;
  }

  double operator()(std::string_view description, const ColorPoint& point) {
    return joint_probability(distributions(description), point);
  }

 private:
  Estimator estimator_;
  std::unordered_map<std::string, ChannelDistributions> cache_;
};

/// `model<TAB>resolution<TAB>perp<TAB>perpstd`
inline void write_eval_tsv(std::ostream& out, std::span<const EvalReport> reports,
                           bool header = true) {
  if (header) out << "model\tresolution\tperp\tperpstd\n";
  for (const auto& r : reports)
    out << r.model << '\t' << r.resolution << '\t' << format_double(r.perplexity) << '\t'
        << format_double(r.standardized) << '\n';
}

struct RankedCandidate {
  std::size_t input_index = 0;
  ColorPoint point;
  double score = 0.0;
};

/// Candidates by descending probability under the description; ties keep
/// input order.
template <class Oracle>
std::vector<RankedCandidate> rank_candidates(Oracle&& oracle, std::string_view description,
                                             std::span<const ColorPoint> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::invalid_input, "no candidates to rank");
  std::vector<RankedCandidate> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    ranked.push_back({i, candidates[i], oracle(description, candidates[i])});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) { return a.score > b.score; });
  return ranked;
}

// ---------------------------------------------------------------------------
// Rank correlation between channels, per description.

/// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

/// Spearman's rho as the Pearson correlation of average ranks. A constant
/// input has no monotone relationship to anything and scores 0.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorKind::invalid_input, "spearman needs two equal-length samples of size >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Linearly interpolated sample quantile (the usual "type 7" definition).
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::invalid_input, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline constexpr std::array<std::pair<int, int>, 3> kChannelPairs{{{0, 1}, {0, 2}, {1, 2}}};
inline constexpr std::array<const char*, 3> kChannelPairNames{"h-s", "h-v", "s-v"};

struct DescriptionCorrelation {
  std::string description;
  std::size_t count = 0;
  /// |rho| for h-s, h-v, s-v.
  std::array<double, 3> abs_rho{};
};

struct CorrelationReport {
  std::vector<DescriptionCorrelation> per_description;
  std::array<double, 3> q3{};
};

using ChannelSample = std::array<double, 3>;
using DescriptionSamples = std::vector<std::pair<std::string, std::vector<ChannelSample>>>;

/// Absolute Spearman correlation of each channel pair within every
/// description with at least `min_count` samples, and the third quartile of
/// each pair's values across descriptions. Channels are generic, so any
/// three-channel color space can be analysed.
inline CorrelationReport spearman_independence(const DescriptionSamples& groups,
                                               std::size_t min_count = 100) {
  CorrelationReport report;
  for (const auto& [desc, samples] : groups) {
    if (samples.size() < std::max<std::size_t>(min_count, 2)) continue;
    std::array<std::vector<double>, 3> channels;
    for (auto& ch : channels) ch.reserve(samples.size());
    for (const auto& s : samples)
      for (std::size_t c = 0; c < 3; ++c) channels[c].push_back(s[c]);
    DescriptionCorrelation dc{desc, samples.size(), {}};
    for (std::size_t p = 0; p < 3; ++p) {
      const auto [a, b] = kChannelPairs[p];
      dc.abs_rho[p] = std::fabs(spearman(channels[static_cast<std::size_t>(a)],
                                         channels[static_cast<std::size_t>(b)]));
    }
    report.per_description.push_back(std::move(dc));
  }
  if (report.per_description.empty())
    throw Error(ErrorKind::evaluation,
                "no description has at least " + std::to_string(min_count) + " observations");
  for (std::size_t p = 0; p < 3; ++p) {
    std::vector<double> values;
    values.reserve(report.per_description.size());
    for (const auto& dc : report.per_description) values.push_back(dc.abs_rho[p]);
    report.q3[p] = quantile(std::move(values), 0.75);
  }
  return report;
}

inline DescriptionSamples group_hsv_samples(std::span<const Observation> observations) {
  DescriptionSamples groups;
  for (const auto& [desc, members] : group_by_description(observations)) {
    std::vector<ChannelSample> samples;
    samples.reserve(members.size());
    for (const auto* o : members) samples.push_back({o->color.h, o->color.s, o->color.v});
    groups.emplace_back(desc, std::move(samples));
  }
  return groups;
}

inline CorrelationReport spearman_independence(std::span<const Observation> observations,
                                               std::size_t min_count = 100) {
  return spearman_independence(group_hsv_samples(observations), min_count);
}

/// `pair<TAB>q3`
inline void write_correlation_tsv(std::ostream& out, const CorrelationReport& report,
                                  std::span<const char* const, 3> pair_names = kChannelPairNames) {
  out << "pair\tq3\n";
  for (std::size_t p = 0; p < 3; ++p) out << pair_names[p] << '\t' << format_double(report.q3[p]) << '\n';
}

}  // namespace chromadist
