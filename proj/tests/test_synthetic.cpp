// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "chromadist/synthetic.hpp"

namespace chromadist {
namespace {

std::string dump(const SyntheticCorpus& c) {
  std::ostringstream out;
  write_ground_truth(out, c);
  for (const auto* split : {&c.full, &c.extrapolation}) {
    for (auto label : kSplitLabels) write_manifest(out, split->part(label), label);
    split->vocabulary.write(out);
  }
  return out.str();
}

bool contains(std::span<const Observation> obs, std::string_view desc) {
  return std::any_of(obs.begin(), obs.end(), [&](const auto& o) { return o.description == desc; });
}

TEST(Synthetic, DefaultCorpusHoldsOutDarkRed) {
  const auto c = generate_synthetic({});
  EXPECT_EQ(c.bases.size(), 5u);
  EXPECT_EQ(c.modifiers, (std::vector<std::string>{"dark", "dull"}));
  EXPECT_EQ(c.truth.size(), 15u);
  EXPECT_TRUE(c.is_held_out("dark red"));
  EXPECT_FALSE(c.is_held_out("dark blue"));

  const auto& ex = c.extrapolation;
  EXPECT_TRUE(contains(ex.train, "dark blue"));
  EXPECT_FALSE(contains(ex.train, "dark red"));
  EXPECT_TRUE(contains(ex.test, "dark red"));
  for (const auto& held : c.held_out) EXPECT_FALSE(contains(ex.train, held)) << held;
  for (auto label : {SplitLabel::dev, SplitLabel::test})
    for (const auto& o : ex.part(label)) EXPECT_TRUE(c.is_held_out(o.description));

  // The full split keeps every name in every part.
  EXPECT_EQ(c.full.size(), 15u * 500u);
  EXPECT_EQ(c.full.train.size(), 15u * 400u);
  EXPECT_TRUE(contains(c.full.train, "dark red"));
}

TEST(Synthetic, SameSeedGivesIdenticalCorpora) {
  SyntheticOptions opts;
  opts.samples_per_name = 50;
  EXPECT_EQ(dump(generate_synthetic(opts)), dump(generate_synthetic(opts)));
  auto other = opts;
  other.seed = 2;
  EXPECT_NE(dump(generate_synthetic(opts)), dump(generate_synthetic(other)));
}

TEST(Synthetic, SampleMeansMatchGeneratorParameters) {
  const auto c = generate_synthetic({});
  for (const auto& base : c.bases) {
    const auto& law = c.truth_for(base).channels[1];
    double sum = 0.0;
    std::size_t n = 0;
    for (auto label : kSplitLabels)
      for (const auto& o : c.full.part(label))
        if (o.description == base) {
          sum += o.color.s;
          ++n;
        }
    ASSERT_EQ(n, 500u);
    EXPECT_NEAR(sum / static_cast<double>(n), law.mean, 3.0 * law.sd / std::sqrt(double(n))) << base;
  }
}

TEST(Synthetic, ModifiersDarkenOrWidenTheBase) {
  const auto c = generate_synthetic({});
  for (const auto& base : c.bases) {
    const auto& b = c.truth_for(base);
    const auto& dark = c.truth_for("dark " + base);
    const auto& dull = c.truth_for("dull " + base);
    EXPECT_NEAR(dark.channels[2].mean, 0.5 * b.channels[2].mean, 1e-15);
    EXPECT_EQ(dark.channels[0].mean, b.channels[0].mean);
    EXPECT_NEAR(dull.channels[0].sd, 2.5 * b.channels[0].sd, 1e-15);
    EXPECT_EQ(dull.channels[2].mean, b.channels[2].mean);
  }
}

TEST(Synthetic, GroundTruthBinsAreDistributions) {
  const auto c = generate_synthetic({.samples_per_name = 10});
  for (const auto& g : c.truth) {
    for (const auto& d : g.binned(16)) EXPECT_TRUE(d.is_valid(1e-9)) << g.description;
    EXPECT_GT(joint_probability(g.binned(16), g.mode()),
              joint_probability(g.binned(16), g.anti_mode()));
  }
}

TEST(Synthetic, RejectsDegenerateOptions) {
  EXPECT_THROW(generate_synthetic({.n_base = 1}), Error);
  EXPECT_THROW(generate_synthetic({.n_modifiers = 0}), Error);
  EXPECT_THROW(generate_synthetic({.samples_per_name = 0}), Error);
}

TEST(Synthetic, ExtraBasesAndModifiersGetGeneratedNames) {
  const auto c = generate_synthetic({.n_base = 14, .n_modifiers = 8, .samples_per_name = 10});
  EXPECT_EQ(c.bases.back(), "hue14");
  EXPECT_EQ(c.modifiers.back(), "mod8");
  EXPECT_EQ(c.held_out.size(), 8u);
  EXPECT_EQ(std::set<std::string>(c.held_out.begin(), c.held_out.end()).size(), 8u);
}

}  // namespace
}  // namespace chromadist
