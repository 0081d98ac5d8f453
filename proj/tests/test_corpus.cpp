// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "chromadist/corpus.hpp"

namespace chromadist {
namespace {

RawRecord record(std::string desc, std::optional<SplitLabel> split = SplitLabel::train,
                 ColorPoint c = {0.5, 0.5, 0.5}) {
  RawRecord r;
  r.description = std::move(desc);
  r.color = c;
  r.split = split;
  return r;
}

void add(std::vector<RawRecord>& out, const std::string& desc, std::size_t n,
         SplitLabel split = SplitLabel::train) {
  for (std::size_t i = 0; i < n; ++i) out.push_back(record(desc, split));
}

std::set<std::string> descriptions(std::span<const Observation> obs) {
  std::set<std::string> out;
  for (const auto& o : obs) out.insert(o.description);
  return out;
}

TEST(ReadRecords, ParsesRowsWithAndWithoutSplit) {
  std::istringstream in("# comment\nvery dark blue\t0.63\t0.9\t0.3\ttrain\n\nred\t0\t1\t1\n");
  const auto recs = read_records(in);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].description, "very dark blue");
  EXPECT_DOUBLE_EQ(recs[0].color.h, 0.63);
  EXPECT_EQ(recs[0].split, SplitLabel::train);
  EXPECT_EQ(recs[0].line, 2u);
  EXPECT_FALSE(recs[1].split.has_value());
}

TEST(ReadRecords, SkipsHeaderWhenRequested) {
  std::istringstream in("description\th\ts\tv\nred\t0\t1\t1\n");
  EXPECT_EQ(read_records(in, true).size(), 1u);
}

TEST(ReadRecords, OutOfRangeChannelNamesLineAndChannel) {
  std::istringstream in("red\t0.1\t0.2\t0.3\nblue\t0.5\t1.2\t0.4\n");
  try {
    read_records(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("channel s"), std::string::npos) << msg;
  }
}

TEST(ReadRecords, RejectsMalformedRows) {
  for (const char* text : {"red\t0.1\t0.2\n", "red\tx\t0.2\t0.3\n", "red\t0.1\t0.2\t0.3\tvalid\n",
                           "red\t0.1\t0.2\t0.3\ttrain\textra\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_records(in), Error) << text;
  }
}

TEST(Ingest, SingleTrainRecord) {
  const std::vector<RawRecord> recs{record("very dark blue", SplitLabel::train, {0.63, 0.9, 0.3})};
  const auto split = ingest(recs, Tokenizer{});
  ASSERT_EQ(split.train.size(), 1u);
  EXPECT_TRUE(split.dev.empty());
  EXPECT_TRUE(split.test.empty());
  EXPECT_EQ(split.train[0].tokens.size(), 3u);
  EXPECT_EQ(split.vocabulary.decode(split.train[0].tokens),
            (std::vector<std::string>{"very", "dark", "blue"}));
}

TEST(Ingest, RatioSplitIsReproducible) {
  std::vector<RawRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back(record("red", std::nullopt, {0.01 * i, 0.5, 0.5}));
  IngestOptions opts;
  opts.seed = 7;
  const auto a = ingest(recs, Tokenizer{}, opts);
  const auto b = ingest(recs, Tokenizer{}, opts);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.dev.size(), 1u);
  EXPECT_EQ(a.test.size(), 1u);
  for (auto label : kSplitLabels) {
    ASSERT_EQ(a.part(label).size(), b.part(label).size());
    for (std::size_t i = 0; i < a.part(label).size(); ++i)
      EXPECT_EQ(a.part(label)[i].color.h, b.part(label)[i].color.h);
  }
}

TEST(Ingest, UnknownDevTokensAreListed) {
  std::vector<RawRecord> recs{record("red"), record("dark teal", SplitLabel::dev),
                              record("mauve", SplitLabel::test)};
  try {
    ingest(recs, Tokenizer{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_token);
    const std::string msg = e.what();
    for (const char* t : {"'dark'", "'teal'", "'mauve'"})
      EXPECT_NE(msg.find(t), std::string::npos) << msg;
  }
}

TEST(Ingest, VocabularyIsContiguousAndTrainOnly) {
  std::vector<RawRecord> recs{record("pale red"), record("blue-green"), record("red", SplitLabel::dev)};
  const auto split = ingest(recs, Tokenizer{});
  const auto& v = split.vocabulary;
  ASSERT_EQ(v.size(), 5u);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.find(v.token(i)), i);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"pale", "red", "blue", "-", "green"}));

  std::stringstream io;
  v.write(io);
  EXPECT_EQ(Vocabulary::read(io), v);
}

// "pale red" is rarest among eligible descriptions; "tan red" is rarer but
// "tan" has too few other uses.
std::vector<RawRecord> toy_extrapolation_records() {
  std::vector<RawRecord> recs;
  add(recs, "pale red", 1);
  add(recs, "pale red", 1, SplitLabel::test);
  add(recs, "pale blue", 5);
  add(recs, "pale green", 5);
  add(recs, "red", 12);
  add(recs, "tan red", 1);
  add(recs, "tan brown", 3);
  return recs;
}

TEST(Extrapolation, SelectsRarestEligibleDescription) {
  const auto full = ingest(toy_extrapolation_records(), Tokenizer{});
  const auto ex = build_extrapolation_split(full, {.count = 1, .min_other_uses = 8});
  EXPECT_EQ(ex.selected, (std::vector<std::string>{"pale red"}));
  EXPECT_FALSE(descriptions(ex.split.train).contains("pale red"));
  EXPECT_EQ(descriptions(ex.split.test), (std::set<std::string>{"pale red"}));
  EXPECT_TRUE(ex.split.dev.empty());
  EXPECT_EQ(ex.split.train.size(), full.train.size() - 1);
}

TEST(Extrapolation, InfeasibleCountReportsAchievableMaximum) {
  const auto full = ingest(toy_extrapolation_records(), Tokenizer{});
  try {
    build_extrapolation_split(full, {.count = 2, .min_other_uses = 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_user_error());
    EXPECT_NE(std::string(e.what()).find("only 1"), std::string::npos) << e.what();
  }
}

TEST(Extrapolation, TiesBreakLexicographically) {
  std::vector<RawRecord> recs;
  add(recs, "dark red", 1, SplitLabel::test);
  add(recs, "dark blue", 1, SplitLabel::test);
  add(recs, "dark", 10);
  add(recs, "red", 10);
  add(recs, "blue", 10);
  const auto full = ingest(recs, Tokenizer{});
  const auto ex = build_extrapolation_split(full, {.count = 1, .min_other_uses = 8});
  EXPECT_EQ(ex.selected, (std::vector<std::string>{"dark blue"}));
}

TEST(ExtrapolationProperty, DisjointDescriptionsAndTokenCoverage) {
  const std::vector<std::string> mods{"dark", "pale", "light", "deep", "dull"};
  const std::vector<std::string> bases{"red", "blue", "green", "pink", "teal", "olive"};
  Rng rng(3);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<RawRecord> recs;
    for (const auto& b : bases) {
      add(recs, b, 1 + uniform_index(rng, 20));
      for (const auto& m : mods) {
        const std::size_t n = uniform_index(rng, 8);
        for (std::size_t i = 0; i < n; ++i)
          recs.push_back(record(m + " " + b, kSplitLabels[uniform_index(rng, 3)]));
      }
    }
    // Ensure every token reaches the vocabulary through train.
    for (const auto& m : mods) add(recs, m, 1);
    const auto full = ingest(recs, Tokenizer{});
    const std::size_t min_uses = 1 + uniform_index(rng, 8);
    ExtrapolationSplit ex;
    try {
      ex = build_extrapolation_split(full, {.count = 1 + uniform_index(rng, 6), .min_other_uses = min_uses});
    } catch (const Error& e) {
      ASSERT_EQ(e.kind(), ErrorKind::configuration);
      continue;
    }
    ++checked;
    const auto train_desc = descriptions(ex.split.train);
    std::vector<std::size_t> uses(ex.split.vocabulary.size(), 0);
    for (const auto& o : ex.split.train) {
      const std::set<std::size_t> distinct(o.tokens.begin(), o.tokens.end());
      for (auto t : distinct) ++uses[t];
    }
    for (auto label : {SplitLabel::dev, SplitLabel::test}) {
      for (const auto& o : ex.split.part(label)) {
        EXPECT_FALSE(train_desc.contains(o.description));
        for (auto t : o.tokens) EXPECT_GE(uses.at(t), min_uses);
      }
    }
  }
  EXPECT_GT(checked, 10);
}

}  // namespace
}  // namespace chromadist
