// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "chromadist/cdest/train.hpp"
#include "chromadist/evaluate.hpp"
#include "chromadist/synthetic.hpp"

namespace chromadist::cdest {
namespace {

CdestConfig small_config() {
  CdestConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 16;
  cfg.resolution = 8;
  cfg.batch_size = 32;
  cfg.max_epochs = 3;
  cfg.seed = 5;
  return cfg;
}

const SyntheticCorpus& small_corpus() {
  static const SyntheticCorpus c = generate_synthetic({.samples_per_name = 40});
  return c;
}

// Desk-scale corpus and models, trained at most once per process.
const SyntheticCorpus& desk_corpus() {
  static const SyntheticCorpus c = generate_synthetic({});
  return c;
}

CdestConfig desk_config() {
  CdestConfig cfg;
  cfg.resolution = 16;
  return cfg;
}

const TrainResult& trained_full() {
  static const TrainResult r = train(desk_corpus().full, desk_config());
  return r;
}

const TrainResult& trained_extrapolating() {
  static const TrainResult r = train(desk_corpus().extrapolation, desk_config());
  return r;
}

TEST(Train, SameSeedGivesIdenticalParameters) {
  auto cfg = small_config();
  cfg.threads = 1;
  const auto a = train(small_corpus().full, cfg);
  const auto b = train(small_corpus().full, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i)
    EXPECT_EQ(format_epoch_log(a.log[i]), format_epoch_log(b.log[i]));

  cfg.threads = 3;
  EXPECT_EQ(train(small_corpus().full, cfg).params, a.params);

  cfg.seed = 6;
  EXPECT_FALSE(train(small_corpus().full, cfg).params == a.params);
}

TEST(Train, OneEpochOnOneObservationReducesItsLoss) {
  CorpusSplit split;
  split.vocabulary = Vocabulary::from_tokens({"dark", "red"});
  Observation o;
  o.description = "dark red";
  o.tokens = {0, 1};
  o.color = {0.02, 0.7, 0.3};
  split.train = {o};

  auto cfg = small_config();
  cfg.dropout = 0.0;
  cfg.max_epochs = 1;
  cfg.optimizer.learning_rate = 0.05;
  const auto before = Parameters<float>::initialized(
      {split.vocabulary.size(), cfg.embed_dim, cfg.hidden_dim, cfg.resolution}, cfg.seed);
  const auto result = train(split, cfg);
  ASSERT_EQ(result.log.size(), 1u);
  const auto target = blur(o.color, cfg.discretizer());
  const auto loss_of = [&](const Parameters<float>& p) {
    return loss(forward(p, std::span<const std::size_t>(o.tokens)).distributions(), target);
  };
  EXPECT_LT(loss_of(result.params), loss_of(before));
}

TEST(Train, DivergenceReportsEpochAndBatch) {
  auto cfg = small_config();
  cfg.optimizer.learning_rate = 1e300;
  try {
    train(small_corpus().full, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::training_failure);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Train, RejectsBadConfigAndEmptyTrain) {
  auto cfg = small_config();
  cfg.dropout = 1.0;
  EXPECT_THROW(train(small_corpus().full, cfg), Error);
  cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(train(small_corpus().full, cfg), Error);
  EXPECT_THROW(train(CorpusSplit{}, small_config()), Error);
}

TEST(Train, EarlyStoppingKeepsBestEpoch) {
  auto cfg = small_config();
  cfg.max_epochs = 40;
  cfg.patience = 2;
  std::vector<bool> improvements;
  const auto result = train(small_corpus().full, cfg,
                            [&](const EpochLog&, const Parameters<float>&, bool improved) {
                              improvements.push_back(improved);
                            });
  ASSERT_EQ(improvements.size(), result.log.size());
  double best = 1e300;
  for (const auto& e : result.log) best = std::min(best, e.dev_pp_std);
  EXPECT_EQ(result.log[result.best_epoch - 1].dev_pp_std, best);
  if (result.log.size() < cfg.max_epochs) {
    EXPECT_FALSE(improvements.back());
    EXPECT_EQ(result.log.size() - result.best_epoch, cfg.patience);
  }
  EXPECT_EQ(evaluate_params(result.params, small_corpus().full.dev).standardized, best);
}

TEST(Train, EpochLogFormat) {
  EpochLog e{3, 1.5, 2.0, 0.25};
  EXPECT_EQ(format_epoch_log(e), "3\t1.5\t2\t0.25");
}

TEST(TrainSynthetic, FullModelFitsRanksAndPredicts) {
  const auto& corpus = desk_corpus();
  const auto& result = trained_full();
  ASSERT_FALSE(result.log.empty());
  EXPECT_LT(result.log.back().dev_pp_std, 0.2);
  EXPECT_LT(evaluate_params(result.params, corpus.full.dev).standardized, 0.2);

  const CdestModel model{result.params, corpus.full.vocabulary, Tokenizer{}};
  DistributionOracle oracle([&](std::string_view d) { return model.predict(d); });
  const std::vector<ColorPoint> candidates{corpus.truth_for("red").mode(),
                                           corpus.truth_for("blue").mode()};
  EXPECT_EQ(rank_candidates(oracle, "blue", candidates).front().input_index, 1u);

  EXPECT_EQ(model.predict("dark blue"), model.predict("dark blue"));
  EXPECT_EQ(predict(result.params, corpus.full.vocabulary, "Dark  Blue"), model.predict("dark blue"));
  try {
    model.predict("dark mauve");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_token);
    EXPECT_NE(std::string(e.what()).find("mauve"), std::string::npos);
  }
}

TEST(TrainSynthetic, HeldOutPairModeBeatsAntiMode) {
  const auto& corpus = desk_corpus();
  const CdestModel model{trained_extrapolating().params, corpus.extrapolation.vocabulary, Tokenizer{}};
  const auto& truth = corpus.truth_for("dark red");
  const auto dists = model.predict("dark red");
  EXPECT_GT(joint_probability(dists, truth.mode()), joint_probability(dists, truth.anti_mode()));
  EXPECT_LT(evaluate_params(trained_extrapolating().params, corpus.extrapolation.test).standardized, 1.0);
}

}  // namespace
}  // namespace chromadist::cdest
