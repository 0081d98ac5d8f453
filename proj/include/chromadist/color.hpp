// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace chromadist {

enum class Channel { hue = 0, saturation = 1, value = 2 };

inline constexpr std::array<Channel, 3> kChannels{Channel::hue, Channel::saturation,
                                                  Channel::value};

inline constexpr const char* channel_name(Channel c) {
  switch (c) {
    case Channel::hue: return "h";
    case Channel::saturation: return "s";
    case Channel::value: return "v";
  }
  return "?";
}

/// A point in HSV space with every channel scaled to [0,1]. Hue is circular.
struct ColorPoint {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;

  double operator[](Channel c) const {
    switch (c) {
      case Channel::hue: return h;
      case Channel::saturation: return s;
      case Channel::value: return v;
    }
    return 0.0;
  }

  bool valid() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    return in_unit(h) && in_unit(s) && in_unit(v);
  }

  friend bool operator==(const ColorPoint&, const ColorPoint&) = default;
};

inline double hue_distance(double h1, double h2) {
  const double d = std::fabs(h1 - h2);
  return std::min(d, 1.0 - d);
}

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

inline ColorPoint rgb_to_hsv(const Rgb& c) {
  const double max = std::max({c.r, c.g, c.b});
  const double min = std::min({c.r, c.g, c.b});
  const double delta = max - min;
  ColorPoint out;
  out.v = max;
  out.s = max > 0.0 ? delta / max : 0.0;
  if (delta <= 0.0) {
    out.h = 0.0;
    return out;
  }
  double sector;
  if (max == c.r) {
    sector = std::fmod((c.g - c.b) / delta, 6.0);
    if (sector < 0.0) sector += 6.0;
  } else if (max == c.g) {
    sector = (c.b - c.r) / delta + 2.0;
  } else {
    sector = (c.r - c.g) / delta + 4.0;
  }
  out.h = sector / 6.0;
  if (out.h >= 1.0) out.h -= 1.0;
  return out;
}

inline Rgb hsv_to_rgb(const ColorPoint& p) {
  const double h6 = (p.h >= 1.0 ? 0.0 : p.h) * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double a = p.v * (1.0 - p.s);
  const double b = p.v * (1.0 - p.s * f);
  const double c = p.v * (1.0 - p.s * (1.0 - f));
  switch (sector) {
    case 0: return {p.v, c, a};
    case 1: return {b, p.v, a};
    case 2: return {a, p.v, c};
    case 3: return {a, b, p.v};
    case 4: return {c, a, p.v};
    default: return {p.v, a, b};
  }
}

}  // namespace chromadist
