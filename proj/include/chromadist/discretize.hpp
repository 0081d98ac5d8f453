// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "chromadist/color.hpp"
#include "chromadist/error.hpp"
#include "chromadist/io.hpp"

namespace chromadist {

enum class HueMode { wrapped, truncated };

/// Probability mass over n equal-width bins of [0,1]. Bin i (0-based here)
/// covers (i/n, (i+1)/n], with 0 itself assigned to the first bin.
class BinnedDistribution {
 public:
  BinnedDistribution() = default;
  explicit BinnedDistribution(std::vector<double> masses) : masses_(std::move(masses)) {}

  static BinnedDistribution uniform(std::size_t n) {
    return BinnedDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t resolution() const { return masses_.size(); }
  std::span<const double> masses() const { return masses_; }
  std::span<double> masses() { return masses_; }
  double operator[](std::size_t i) const { return masses_[i]; }
  double& operator[](std::size_t i) { return masses_[i]; }

  double total() const { return std::accumulate(masses_.begin(), masses_.end(), 0.0); }

  bool is_valid(double tol = 1e-6) const {
    if (masses_.empty()) return false;
    for (double m : masses_)
      if (!(m >= 0.0) || !std::isfinite(m)) return false;
    return std::fabs(total() - 1.0) <= tol;
  }

  friend bool operator==(const BinnedDistribution&, const BinnedDistribution&) = default;

 private:
  std::vector<double> masses_;
};

/// The three per-channel distributions that make up one estimate.
using ChannelDistributions = std::array<BinnedDistribution, 3>;

struct DiscretizerConfig {
  std::size_t resolution = 64;
  /// Blur standard deviation; unset means 1/(2n).
  std::optional<double> sigma;
  HueMode hue_mode = HueMode::wrapped;

  double blur_sigma() const { return sigma ? *sigma : 0.5 / static_cast<double>(resolution); }

  void validate() const {
    if (resolution < 2)
      throw Error(ErrorKind::configuration, "resolution must be at least 2");
    if (!(blur_sigma() > 0.0) || !std::isfinite(blur_sigma()))
      throw Error(ErrorKind::configuration, "blur sigma must be positive and finite");
  }
};

namespace detail {

inline void check_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw Error(ErrorKind::domain, "channel value " + format_double(x) + " outside [0,1]");
}

/// P(lo < Z <= hi) for a standard normal Z, accurate in both tails.
inline double normal_interval(double lo, double hi) {
  constexpr double r2 = std::numbers::sqrt2;
  if (hi <= lo) return 0.0;
  if (lo >= 0.0) return 0.5 * (std::erfc(lo / r2) - std::erfc(hi / r2));
  if (hi <= 0.0) return 0.5 * (std::erfc(-hi / r2) - std::erfc(-lo / r2));
  return 1.0 - 0.5 * std::erfc(-lo / r2) - 0.5 * std::erfc(hi / r2);
}

// Normal tail mass beyond this many standard deviations is below 1e-13.
inline constexpr double kTailCutoff = 7.5;

}  // namespace detail

/// 1-based index of the bin containing x: (i-1)/n < x <= i/n, with x = 0 in bin 1.
inline std::size_t bin_index(double x, std::size_t n) {
  detail::check_unit(x);
  if (n == 0) throw Error(ErrorKind::configuration, "resolution must be positive");
  const double nd = static_cast<double>(n);
  auto i = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(x * nd)), 1, n);
  // x * n can round across an edge; settle against the edges as computed in
  // the blur routines.
  if (i > 1 && x <= static_cast<double>(i - 1) / nd) --i;
  else if (i < n && x > static_cast<double>(i) / nd) ++i;
  return i;
}

inline BinnedDistribution one_hot(double x, std::size_t n) {
  const std::size_t i = bin_index(x, n);
  std::vector<double> masses(n, 0.0);
  masses[i - 1] = 1.0;
  return BinnedDistribution(std::move(masses));
}

/// Gaussian with mean x restricted to [0,1] and renormalized, binned exactly
/// via differences of the normal CDF on the bin edges.
inline BinnedDistribution blur_truncated(double x, double sigma, std::size_t n) {
  detail::check_unit(x);
  std::vector<double> masses(n);
  const double nd = static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = (static_cast<double>(i) / nd - x) / sigma;
    const double hi = (static_cast<double>(i + 1) / nd - x) / sigma;
    masses[i] = detail::normal_interval(lo, hi);
    total += masses[i];
  }
  if (!(total > 0.0))
    throw Error(ErrorKind::domain, "blur sigma too small to place mass on [0,1]");
  for (double& m : masses) m /= total;
  return BinnedDistribution(std::move(masses));
}

/// Gaussian with mean x wrapped around the unit circle: each bin collects the
/// mass of all its integer translates whose contribution exceeds ~1e-13.
inline BinnedDistribution blur_wrapped(double x, double sigma, std::size_t n) {
  detail::check_unit(x);
  std::vector<double> masses(n, 0.0);
  const double nd = static_cast<double>(n);
  const double reach = detail::kTailCutoff * sigma;
  const auto k_lo = static_cast<long>(std::floor(x - reach)) - 1;
  const auto k_hi = static_cast<long>(std::ceil(x + reach)) + 1;
  for (long k = k_lo; k <= k_hi; ++k) {
    const double shift = static_cast<double>(k) - x;
    if (shift + 1.0 < -reach || shift > reach) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = (static_cast<double>(i) / nd + shift) / sigma;
      const double hi = (static_cast<double>(i + 1) / nd + shift) / sigma;
      masses[i] += detail::normal_interval(lo, hi);
    }
  }
  // Normalize away the omitted tails so the vector sums to 1.
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  for (double& m : masses) m /= total;
  return BinnedDistribution(std::move(masses));
}

inline BinnedDistribution blur(double x, double sigma, std::size_t n, bool wrapped) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::configuration, "blur sigma must be positive");
  if (n < 1) throw Error(ErrorKind::configuration, "resolution must be positive");
  return wrapped ? blur_wrapped(x, sigma, n) : blur_truncated(x, sigma, n);
}

/// Blurred binning of one channel value under the config. Hue follows
/// `hue_mode`; saturation and value always use the truncated form.
inline BinnedDistribution blur(double x, Channel channel, const DiscretizerConfig& config) {
  const bool wrapped = channel == Channel::hue && config.hue_mode == HueMode::wrapped;
  return blur(x, config.blur_sigma(), config.resolution, wrapped);
}

inline ChannelDistributions blur(const ColorPoint& p, const DiscretizerConfig& config) {
  return {blur(p.h, Channel::hue, config), blur(p.s, Channel::saturation, config),
          blur(p.v, Channel::value, config)};
}

/// Product over channels of the mass in the bin holding the point's value.
inline double joint_probability(const ChannelDistributions& dists, const ColorPoint& point) {
  const std::size_t n = dists[0].resolution();
  if (n == 0 || dists[1].resolution() != n || dists[2].resolution() != n)
    throw Error(ErrorKind::configuration, "channel distributions must share one resolution");
  double p = 1.0;
  for (auto c : kChannels) p *= dists[static_cast<std::size_t>(c)][bin_index(point[c], n) - 1];
  return p;
}

inline double total_variation(const BinnedDistribution& a, const BinnedDistribution& b) {
  if (a.resolution() != b.resolution())
    throw Error(ErrorKind::configuration, "resolution mismatch in total variation");
  double d = 0.0;
  for (std::size_t i = 0; i < a.resolution(); ++i) d += std::fabs(a[i] - b[i]);
  return 0.5 * d;
}

/// Plot-export rows: `channel,bin_index,bin_low,bin_high,mass`, 1-based bins.
inline void write_distribution_csv(std::ostream& out, const ChannelDistributions& dists,
                                   bool header = true) {
  if (header) out << "channel,bin_index,bin_low,bin_high,mass\n";
  for (auto c : kChannels) {
    const auto& d = dists[static_cast<std::size_t>(c)];
    const double n = static_cast<double>(d.resolution());
    for (std::size_t i = 0; i < d.resolution(); ++i) {
      out << channel_name(c) << ',' << (i + 1) << ',' << format_double(static_cast<double>(i) / n)
          << ',' << format_double(static_cast<double>(i + 1) / n) << ',' << format_double(d[i])
          << '\n';
    }
  }
}

}  // namespace chromadist
