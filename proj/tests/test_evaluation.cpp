#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "wsd/error.hpp"
#include "wsd/evaluation.hpp"
#include "wsd/synth.hpp"

using namespace wsd;

TEST(Scorer, MatchesBruteForceOnFixtures) {
  for (const auto& fx : wsd::testing::scorer_fixtures()) {
    const Score s = score(fx.predictions, fx.gold);
    EXPECT_EQ(s, wsd::testing::brute_force_score(fx.predictions, fx.gold)) << fx.name;
  }
}

TEST(Scorer, KnownNumbers) {
  const auto fixtures = wsd::testing::scorer_fixtures();
  const Score multi = score(fixtures[2].predictions, fixtures[2].gold);
  EXPECT_EQ(multi.correct, 2u);
  EXPECT_EQ(multi.f1, 2.0 / 3.0);
  const Score partial = score(fixtures[3].predictions, fixtures[3].gold);
  EXPECT_EQ(partial.total, 7u);
  EXPECT_EQ(partial.attempted, 3u);
  EXPECT_EQ(partial.correct, 2u);
  EXPECT_EQ(partial.precision, 2.0 / 3.0);
  EXPECT_EQ(partial.recall, 2.0 / 7.0);
  EXPECT_DOUBLE_EQ(partial.f1, 2.0 * (2.0 / 3.0) * (2.0 / 7.0) / (2.0 / 3.0 + 2.0 / 7.0));
  const Score none = score({}, fixtures[4].gold);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(Scorer, F1EqualsAccuracyWhenAllAttempted) {
  const auto fx = wsd::testing::scorer_fixtures()[1];
  const Score s = score(fx.predictions, fx.gold);
  EXPECT_EQ(s.f1, s.precision);
  EXPECT_EQ(s.f1, s.recall);
}

TEST(Scorer, UnknownIdIsContractError) {
  EXPECT_THROW(score({{"zz", "k"}}, {{"a", {"k"}}}), ContractError);
}

class Reports : public ::testing::Test {
 protected:
  SynthBundle b = synth_corpus(SynthSpec{});
};

TEST_F(Reports, PerPosScoresRecombine) {
  Predictions preds;
  std::size_t i = 0;
  for (const auto& inst : b.test.instances) {
    const auto& senses = b.inventory.at(inst.key());
    if (i % 5 != 4) preds[inst.id] = senses[i % senses.size()].key;  // some wrong, some missing
    ++i;
  }
  const ScoreReport r = score_report(preds, b.gold, b.test);
  std::size_t total = 0, attempted = 0, correct = 0;
  for (const auto& [p, s] : r.by_pos) {
    total += s.total;
    attempted += s.attempted;
    correct += s.correct;
  }
  EXPECT_EQ(total, r.overall.total);
  EXPECT_EQ(attempted, r.overall.attempted);
  EXPECT_EQ(correct, r.overall.correct);
  std::size_t dtotal = 0;
  for (const auto& [d, s] : r.datasets) dtotal += s.total;
  EXPECT_EQ(dtotal, b.test.instances.size());
  EXPECT_EQ(r.datasets.size(), 2u);
  EXPECT_LT(r.overall.attempted, r.overall.total);

  const std::string tsv = format_report_tsv(r);
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "scope\tname\ttotal\tattempted\tcorrect\tprecision\trecall\tf1");
  EXPECT_NE(tsv.find("\nall\tAll\t72\t"), std::string::npos);
  const std::string table = format_report_table(r, "sys");
  EXPECT_NE(table.find("NOUN"), std::string::npos);
  EXPECT_NE(table.find("test1"), std::string::npos);
}

TEST_F(Reports, MfsMatchesIndependentCounter) {
  SynthSpec spec;
  spec.zipf_exponent = 0.8;
  spec.held_out_lemmas = 2;
  const SynthBundle z = synth_corpus(spec);
  const Predictions got = mfs_baseline(count_senses(z.train, z.gold), z.inventory, z.test);
  EXPECT_EQ(got, wsd::testing::brute_force_mfs(z.train, z.gold, z.inventory, z.test));
  // Zipfian data makes rank 0 the most frequent sense; held-out lemmas back off to it too.
  for (const auto& inst : z.test.instances) EXPECT_EQ(z.inventory.rank_of(inst.key(), got.at(inst.id)), 0);
}

TEST(Mfs, TiesAndUnseenGoToFirstSense) {
  const SenseInventory inv(SenseInventory::Entries{
      {{"w", Pos::Noun}, {{"w%1", "g1"}, {"w%2", "g2"}, {"w%3", "g3"}}},
      {{"u", Pos::Verb}, {{"u%1", "g1"}, {"u%2", "g2"}}},
  });
  AnnotatedCorpus train, test;
  train.sentences.push_back({"s0", "t", {{"w", "w", "NOUN", "a"}, {"w", "w", "NOUN", "b"}, {"w", "w", "NOUN", "c"}}});
  train.instances = {{"a", "w", Pos::Noun, 0, 0, "t"}, {"b", "w", Pos::Noun, 0, 1, "t"}, {"c", "w", Pos::Noun, 0, 2, "t"}};
  const GoldKeys gold{{"a", {"w%3"}}, {"b", {"w%2"}}, {"c", {"w%2", "w%3"}}};
  test.sentences.push_back({"s1", "t", {{"w", "w", "NOUN", "x"}, {"u", "u", "VERB", "y"}}});
  test.instances = {{"x", "w", Pos::Noun, 0, 0, "t"}, {"y", "u", Pos::Verb, 0, 1, "t"}};
  const Predictions p = mfs_baseline(count_senses(train, gold), inv, test);
  EXPECT_EQ(p.at("x"), "w%2");  // 2 vs 2: lower rank wins
  EXPECT_EQ(p.at("y"), "u%1");
  EXPECT_EQ(p, wsd::testing::brute_force_mfs(train, gold, inv, test));
}

TEST(Buckets, EdgesAndReport) {
  EXPECT_EQ(frequency_bucket(0), 0u);
  EXPECT_EQ(frequency_bucket(1), 1u);
  EXPECT_EQ(frequency_bucket(10), 1u);
  EXPECT_EQ(frequency_bucket(11), 2u);
  EXPECT_EQ(frequency_bucket(50), 2u);
  EXPECT_EQ(frequency_bucket(51), 3u);
  EXPECT_EQ(frequency_bucket(200), 3u);
  EXPECT_EQ(frequency_bucket(201), 4u);

  SynthSpec spec;
  spec.held_out_lemmas = 2;
  spec.sentences_per_sense = 3;
  const SynthBundle b = synth_corpus(spec);
  const Predictions p = mfs_baseline(count_senses(b.train, b.gold), b.inventory, b.test);
  const FrequencyBuckets fb = frequency_report(b.train, b.test, p, b.gold, b.inventory);
  ASSERT_EQ(fb.rows.size(), 5u);
  EXPECT_EQ(fb.rows[0].words, 2u);  // held-out lemmas
  EXPECT_EQ(fb.rows[0].instances, 18u);
  EXPECT_EQ(fb.rows[1].words, 6u);  // 9 training instances each
  EXPECT_EQ(fb.rows[1].instances, 54u);
  EXPECT_DOUBLE_EQ(fb.rows[0].ambiguity, 3.0);
  std::size_t total = 0;
  for (const auto& r : fb.rows) total += r.score.total;
  EXPECT_EQ(total, b.test.instances.size());
  const std::string table = format_buckets_table(fb);
  EXPECT_NE(table.find("#Instances"), std::string::npos);
  EXPECT_NE(format_buckets_tsv(fb).find("1-10\t6\t54\t"), std::string::npos);
}

TEST(Ablation, GridHasFourRows) {
  SynthSpec spec;
  spec.num_lemmas = 2;
  spec.sentences_per_sense = 2;
  spec.vocab_size = 12;
  const SynthBundle b = synth_corpus(spec);
  EncoderConfig e;
  e.num_layers = 1;
  e.hidden_size = 8;
  e.num_heads = 2;
  e.ffn_size = 8;
  TrainConfig t;
  t.epochs = 2;
  t.freeze_epochs = 1;
  const TrainingData data{b.train, b.dev, b.gold, b.inventory, b.vocab};
  const AblationReport par = ablation_grid(data, b.test, e, t, true);
  const AblationReport seq = ablation_grid(data, b.test, e, t, false);
  ASSERT_EQ(par.rows.size(), 4u);
  const char* labels[] = {"Mean", "Max", "Mean_Concat", "Max_Concat"};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(par.rows[i].label, labels[i]);
    EXPECT_EQ(par.rows[i].all_f1, seq.rows[i].all_f1);
    EXPECT_EQ(serialize_checkpoint(par.rows[i].checkpoint), serialize_checkpoint(seq.rows[i].checkpoint));
    EXPECT_EQ(par.rows[i].dataset_f1.size(), 2u);
  }
  EXPECT_EQ(format_ablation_tsv(par), format_ablation_tsv(seq));
  EXPECT_EQ(format_ablation_tsv(par).substr(0, 22), "model\ttest1\ttest2\tAll\n");
}
