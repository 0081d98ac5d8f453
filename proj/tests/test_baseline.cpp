// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>

#include "chromadist/baseline.hpp"
#include "chromadist/evaluate.hpp"
#include "chromadist/random.hpp"

namespace chromadist {
namespace {

Observation obs(std::string desc, ColorPoint c) {
  Observation o;
  o.description = std::move(desc);
  o.tokens = {0};
  o.color = c;
  return o;
}

std::vector<Observation> random_corpus(Rng& rng, std::size_t max_size = 100) {
  const std::vector<std::string> names{"red", "dark red", "blue", "pale blue", "Teal"};
  std::vector<Observation> out(1 + uniform_index(rng, max_size));
  for (auto& o : out)
    o = obs(names[uniform_index(rng, names.size())], {uniform01(rng), uniform01(rng), uniform01(rng)});
  return out;
}

// Direct per-description, per-bin evaluation of the smoothed mean.
double naive_mass(std::span<const Observation> train, const std::string& desc, Channel c,
                  std::size_t bin, const DiscretizerConfig& cfg) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& o : train) {
    if (normalize_description(o.description) != desc) continue;
    count += 1.0;
    sum += blur(o.color[c], c, cfg)[bin];
  }
  return (sum + 1.0) / (count + static_cast<double>(cfg.resolution));
}

TEST(Baseline, SingleObservationTwoBins) {
  const std::vector<Observation> train{obs("t", {0.25, 0.25, 0.25})};
  const DiscretizerConfig cfg{.resolution = 2, .sigma = 1e-9, .hue_mode = HueMode::truncated};
  const auto model = fit_baseline(train, cfg);
  for (const auto& d : model.query("t")) {
    EXPECT_NEAR(d[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(d[1], 1.0 / 3.0, 1e-12);
  }
  EXPECT_EQ(model.count("t"), 1u);
}

TEST(Baseline, UnseenDescriptionIsAbsent) {
  const std::vector<Observation> train{obs("red", {0.0, 0.5, 0.5})};
  const auto model = fit_baseline(train, {.resolution = 8});
  EXPECT_FALSE(model.contains("blue"));
  EXPECT_EQ(model.table().size(), 1u);
  try {
    model.query("blue");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_description);
  }
}

TEST(Baseline, KeysAreNormalizedDescriptions) {
  const std::vector<Observation> train{obs("Dark  Red", {0.0, 0.5, 0.5}),
                                       obs("dark red", {0.1, 0.5, 0.5})};
  const auto model = fit_baseline(train, {.resolution = 8});
  EXPECT_EQ(model.count("DARK RED"), 2u);
  EXPECT_EQ(model.table().size(), 1u);
}

TEST(Baseline, MassesSumToOneAtResolution64) {
  Rng rng(1);
  const auto train = random_corpus(rng);
  const auto model = fit_baseline(train, {.resolution = 64});
  for (const auto& [desc, entry] : model.table())
    for (const auto& d : entry.dists) EXPECT_NEAR(d.total(), 1.0, 1e-12) << desc;
}

TEST(Baseline, EmptyTrainingSetIsRejected) {
  EXPECT_THROW(fit_baseline(std::vector<Observation>{}, {}), Error);
}

TEST(BaselineProperty, MatchesNaiveFormula) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto train = random_corpus(rng);
    const DiscretizerConfig cfg{.resolution = 2 + uniform_index(rng, 15),
                                .sigma = uniform(rng, 0.005, 0.2),
                                .hue_mode = uniform_index(rng, 2) ? HueMode::wrapped : HueMode::truncated};
    const auto model = fit_baseline(train, cfg);
    for (const auto& [desc, entry] : model.table())
      for (auto c : kChannels)
        for (std::size_t i = 0; i < cfg.resolution; ++i)
          ASSERT_NEAR(entry.dists[static_cast<std::size_t>(c)][i], naive_mass(train, desc, c, i, cfg),
                      1e-12);
  }
}

TEST(BaselineProperty, OrderIndependent) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto train = random_corpus(rng);
    const DiscretizerConfig cfg{.resolution = 16};
    const auto a = fit_baseline(train, cfg);
    shuffle(std::span<Observation>(train), rng);
    const auto b = fit_baseline(train, cfg);
    ASSERT_EQ(a.table().size(), b.table().size());
    for (const auto& [desc, entry] : a.table()) {
      const auto& other = b.query(desc);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < cfg.resolution; ++i)
          ASSERT_NEAR(entry.dists[c][i], other[c][i], 1e-12);
    }
  }
}

TEST(BaselineProperty, SmoothingFloorKeepsEveryPointPositive) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto train = random_corpus(rng);
    const DiscretizerConfig cfg{.resolution = 4 + uniform_index(rng, 60)};
    const auto model = fit_baseline(train, cfg);
    for (const auto& [desc, entry] : model.table()) {
      const double floor = 1.0 / static_cast<double>(entry.count + cfg.resolution);
      for (const auto& d : entry.dists) {
        ASSERT_TRUE(d.is_valid(1e-12));
        for (double m : d.masses()) ASSERT_GE(m, floor * (1.0 - 1e-12));
      }
      for (int k = 0; k < 20; ++k) {
        const ColorPoint p{uniform01(rng), uniform01(rng), uniform01(rng)};
        ASSERT_GE(joint_probability(entry.dists, p), floor * floor * floor * (1.0 - 1e-12));
      }
    }
  }
}

TEST(BaselineProperty, PerplexityOnOwnTrainingSetIsFinite) {
  Rng rng(5);
  const auto train = random_corpus(rng);
  const auto model = fit_baseline(train, {.resolution = 64});
  const auto report = perplexity(
      [&](std::string_view d, const ColorPoint& p) { return joint_probability(model.query(d), p); },
      train, 64, "baseline");
  EXPECT_TRUE(std::isfinite(report.perplexity));
  EXPECT_LT(report.standardized, 1.0);
}

}  // namespace
}  // namespace chromadist
