#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "support/grad_check.hpp"
#include "wsd/error.hpp"
#include "wsd/model.hpp"
#include "wsd/synth.hpp"

using namespace wsd;

namespace {

ClassifierShared toy_shared() {
  return {Tensor::matrix(2, 2, {1, 2, 0.5, -1}, true), Tensor::vector({0.1, -0.2}, true)};
}

ModelConfig small_model(const Vocabulary& vocab, Variant v) {
  ModelConfig m;
  m.encoder.num_layers = 1;
  m.encoder.hidden_size = 8;
  m.encoder.num_heads = 2;
  m.encoder.ffn_size = 16;
  m.encoder.vocab_size = static_cast<int>(vocab.size());
  m.encoder.max_positions = 32;
  m.variant = v;
  m.max_len = 32;
  return m;
}

SynthSpec fixture_spec() {
  SynthSpec spec;
  spec.num_lemmas = 4;
  spec.sentences_per_sense = 2;
  spec.held_out_lemmas = 1;
  return spec;
}

struct Fixture {
  SynthBundle bundle = synth_corpus(fixture_spec());
  std::set<LemmaKey> seen;
  Fixture() {
    for (const auto& i : bundle.train.instances) seen.insert(i.key());
  }
};

}  // namespace

TEST(Pooling, MeanMaxAndConcat) {
  const Tensor h = Tensor::matrix(4, 2, {9, 9, 1, 4, 3, 2, 0, 0});
  const Tensor mean = pool_span(h, {1, 2}, {Merge::Mean, false});
  const Tensor max = pool_span(h, {1, 2}, {Merge::Max, false});
  EXPECT_EQ(std::vector<double>(mean.data().begin(), mean.data().end()), (std::vector<double>{2, 3}));
  EXPECT_EQ(std::vector<double>(max.data().begin(), max.data().end()), (std::vector<double>{3, 4}));
  const Tensor cat = pool_span(h, {1, 2}, {Merge::Max, true});
  EXPECT_EQ(std::vector<double>(cat.data().begin(), cat.data().end()), (std::vector<double>{3, 4, 9, 9}));
  EXPECT_THROW(pool_span(h, {3, 2}, {}), ContractError);
  EXPECT_THROW(pool_span(h, {1, 0}, {}), ContractError);
}

TEST(Pooling, MeanEqualsMaxForSinglePiece) {
  Rng rng(1);
  std::normal_distribution<double> n;
  std::vector<double> v(5 * 3);
  for (auto& x : v) x = n(rng);
  const Tensor h = Tensor::matrix(5, 3, v);
  for (std::size_t s = 0; s < 5; ++s) {
    const Tensor a = pool_span(h, {s, 1}, {Merge::Mean, false}), b = pool_span(h, {s, 1}, {Merge::Max, false});
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a[k], b[k]);
  }
}

TEST(Heads, MlpFrozenValue) {
  const LemmaHead head{Tensor::matrix(3, 2, {1, 1, 2, -1, 0, 0.5}), Tensor::vector({0, 0.1, -0.1})};
  const Tensor lg = mlp_head_logits(Tensor::vector({1, -1}), head, toy_shared());
  // ReLU(W1 f + b1) = [0, 1.3]
  EXPECT_NEAR(lg[0], 1.3, 1e-15);
  EXPECT_NEAR(lg[1], -1.2, 1e-15);
  EXPECT_NEAR(lg[2], 0.55, 1e-15);
  const Tensor p = mlp_head_forward(Tensor::vector({1, -1}), &head, toy_shared());
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  EXPECT_THROW(mlp_head_forward(Tensor::vector({1, -1}), nullptr, toy_shared()), UnseenLemma);
  EXPECT_THROW(mlp_head_logits(Tensor::vector({1, -1, 0}), head, toy_shared()), DimensionError);
}

TEST(Heads, DefinitionFrozenValue) {
  const Tensor d = Tensor::matrix(3, 2, {1, 1, 2, -1, 0, 0.5});
  const Tensor lg = def_head_logits(Tensor::vector({1, -1}), d, toy_shared(), 2);
  const double s = std::sqrt(2.0);
  EXPECT_NEAR(lg[0], 1.3 / s, 1e-15);
  EXPECT_NEAR(lg[1], -1.3 / s, 1e-15);
  EXPECT_NEAR(lg[2], 0.65 / s, 1e-15);
}

TEST(Heads, DefinitionLogitsAreLinearInSenseVectors) {
  Rng rng(2);
  std::normal_distribution<double> n;
  auto rand = [&](std::size_t k) {
    std::vector<double> v(k);
    for (auto& x : v) x = n(rng);
    return v;
  };
  const ClassifierShared shared{Tensor::matrix(4, 4, rand(16)), Tensor::vector(rand(4))};
  const Tensor f = Tensor::vector(rand(4));
  const auto a = rand(12), b = rand(12);
  std::vector<double> c(12);
  for (std::size_t i = 0; i < 12; ++i) c[i] = 2.0 * a[i] - 0.5 * b[i];
  const Tensor la = def_head_logits(f, Tensor::matrix(3, 4, a), shared, 4);
  const Tensor lb = def_head_logits(f, Tensor::matrix(3, 4, b), shared, 4);
  const Tensor lc = def_head_logits(f, Tensor::matrix(3, 4, c), shared, 4);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(lc[i], 2.0 * la[i] - 0.5 * lb[i], 1e-12);
}

TEST(Heads, ArgmaxFirstBreaksTiesLow) {
  const std::vector<double> v{0.2, 0.4, 0.4};
  EXPECT_EQ(argmax_first(v), 1u);
  const std::vector<double> w{0.5, 0.5};
  EXPECT_EQ(argmax_first(w), 0u);
}

TEST(SenseVectors, MeanOverGlossPieces) {
  const Fixture fx;
  const ModelConfig mc = small_model(fx.bundle.vocab, Variant::BertDef);
  const EncoderParams p = init_params(mc.encoder, 3);
  const auto& [key, senses] = *fx.bundle.inventory.entries().begin();
  const Tensor bank = sense_vectors(senses, p, mc.encoder, fx.bundle.vocab, mc.max_len);
  ASSERT_EQ(bank.shape(), (Shape{senses.size(), 8}));
  // Independent recomputation for sense 1.
  std::vector<std::string> words;
  std::istringstream is(senses[1].gloss);
  for (std::string w; is >> w;) words.push_back(w);
  const auto t = tokenize_sentence(words, fx.bundle.vocab, mc.max_len);
  const Tensor h = encode(t.piece_ids, p, mc.encoder, false);
  for (std::size_t k = 0; k < 8; ++k) {
    double s = 0.0;
    for (std::size_t r = 1; r + 1 < t.piece_ids.size(); ++r) s += h.at(r, k);
    EXPECT_NEAR(bank.at(1, k), s / static_cast<double>(t.piece_ids.size() - 2), 1e-12);
  }
}

TEST(Windows, EveryTargetIsCovered) {
  const Vocabulary v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b", "c"});
  std::vector<std::string> words;
  for (int i = 0; i < 30; ++i) words.push_back(std::string(1, static_cast<char>('a' + i % 3)));
  const std::vector<std::size_t> targets{0, 3, 14, 15, 29};
  const auto windows = plan_windows(words, targets, v, 8);
  std::vector<int> covered(targets.size(), 0);
  for (const auto& w : windows) {
    EXPECT_LE(w.tokens.piece_ids.size(), 8u);
    for (auto t : w.targets) {
      ASSERT_NE(w.tokens.span_of(targets[t]), nullptr);
      ++covered[t];
    }
  }
  for (int c : covered) EXPECT_EQ(c, 1);
  EXPECT_EQ(plan_windows(words, targets, v, 64).size(), 1u);
}

TEST(WsdModel, ParameterLayoutPerVariant) {
  const Fixture fx;
  auto names = [](const WsdModel& m) {
    std::set<std::string> out;
    for (const auto& [n, t] : m.parameters()) out.insert(n);
    return out;
  };
  const WsdModel def = WsdModel::create(small_model(fx.bundle.vocab, Variant::BertDef), fx.bundle.inventory, fx.seen, 1);
  const auto dn = names(def);
  EXPECT_TRUE(dn.count("definition.embedding.token"));
  EXPECT_TRUE(dn.count("context.embedding.token"));
  EXPECT_TRUE(dn.count("classifier.l1.weight"));
  for (const auto& n : dn) EXPECT_FALSE(n.starts_with("head.")) << n;

  ModelConfig shared = small_model(fx.bundle.vocab, Variant::BertDef);
  shared.share_encoders = true;
  const WsdModel sh = WsdModel::create(shared, fx.bundle.inventory, fx.seen, 1);
  for (const auto& n : names(sh)) EXPECT_FALSE(n.starts_with("definition.")) << n;
  EXPECT_EQ(&sh.definition_encoder(), &sh.context_encoder());

  const WsdModel bert = WsdModel::create(small_model(fx.bundle.vocab, Variant::Bert), fx.bundle.inventory, fx.seen, 1);
  const auto bn = names(bert);
  std::size_t heads = 0;
  for (const auto& n : bn) {
    EXPECT_FALSE(n.starts_with("definition.")) << n;
    heads += n.starts_with("head.weight.");
  }
  EXPECT_EQ(heads, fx.seen.size());
  for (const auto& k : fx.bundle.held_out) EXPECT_EQ(bert.head(k), nullptr);
}

TEST(WsdModel, FromParametersChecksLayout) {
  const Fixture fx;
  const ModelConfig mc = small_model(fx.bundle.vocab, Variant::BertDef);
  const WsdModel m = WsdModel::create(mc, fx.bundle.inventory, fx.seen, 1);
  auto params = m.parameters();
  EXPECT_NO_THROW(WsdModel::from_parameters(mc, params));
  params.pop_back();
  EXPECT_THROW(WsdModel::from_parameters(mc, params), IntegrityError);
  params = m.parameters();
  params[0].second = Tensor::zeros({1, 1});
  EXPECT_THROW(WsdModel::from_parameters(mc, params), IntegrityError);
  params = m.parameters();
  params.emplace_back("bogus", Tensor::zeros({1}));
  EXPECT_THROW(WsdModel::from_parameters(mc, params), IntegrityError);
}

TEST(WsdModel, PredictionsAreDistributionsAndDeterministic) {
  const Fixture fx;
  for (Variant v : {Variant::Bert, Variant::BertDef}) {
    const WsdModel m = WsdModel::create(small_model(fx.bundle.vocab, v), fx.bundle.inventory, fx.seen, 4);
    const auto p1 = m.predict_corpus(fx.bundle.test, fx.bundle.inventory, fx.bundle.vocab);
    const auto p2 = m.predict_corpus(fx.bundle.test, fx.bundle.inventory, fx.bundle.vocab);
    ASSERT_EQ(p1.size(), fx.bundle.test.instances.size());
    for (const auto& [id, p] : p1) {
      double s = 0.0;
      for (double x : p.probabilities) s += x;
      EXPECT_NEAR(s, 1.0, 1e-12);
      EXPECT_EQ(p.probabilities, p2.at(id).probabilities);
      EXPECT_EQ(p.sense_index, argmax_first(p.probabilities));
    }
    // Reloading from the parameter list reproduces the predictions.
    std::vector<NamedTensor> copy;
    for (const auto& [n, t] : m.parameters()) copy.emplace_back(n, t.clone(true));
    const WsdModel r = WsdModel::from_parameters(m.config(), copy);
    const auto p3 = r.predict_corpus(fx.bundle.test, fx.bundle.inventory, fx.bundle.vocab);
    for (const auto& [id, p] : p1) EXPECT_EQ(p.probabilities, p3.at(id).probabilities);
  }
}

TEST(WsdModel, BertBacksOffOnUnseenLemmas) {
  const Fixture fx;
  const WsdModel bert = WsdModel::create(small_model(fx.bundle.vocab, Variant::Bert), fx.bundle.inventory, fx.seen, 4);
  const WsdModel def = WsdModel::create(small_model(fx.bundle.vocab, Variant::BertDef), fx.bundle.inventory, fx.seen, 4);
  const auto pb = bert.predict_corpus(fx.bundle.test, fx.bundle.inventory, fx.bundle.vocab);
  const auto pd = def.predict_corpus(fx.bundle.test, fx.bundle.inventory, fx.bundle.vocab);
  std::size_t unseen = 0;
  for (const auto& inst : fx.bundle.test.instances) {
    const bool held = fx.bundle.held_out.count(inst.key()) > 0;
    EXPECT_EQ(pb.at(inst.id).backoff, held);
    EXPECT_FALSE(pd.at(inst.id).backoff);
    if (held) {
      ++unseen;
      EXPECT_EQ(pb.at(inst.id).sense_index, 0u);
      EXPECT_EQ(pb.at(inst.id).probabilities[0], 1.0);
    }
  }
  EXPECT_GT(unseen, 0u);
  EXPECT_THROW(bert.predict({"x"}, 0, {"nolemma", Pos::Noun}, fx.bundle.inventory, fx.bundle.vocab), UnknownLemma);
}

TEST(WsdModel, ContextChangesPrediction) {
  const Fixture fx;
  const WsdModel m = WsdModel::create(small_model(fx.bundle.vocab, Variant::BertDef), fx.bundle.inventory, fx.seen, 4);
  const Instance& a = fx.bundle.train.instances.front();
  const auto words = fx.bundle.train.sentences[a.sentence].words();
  auto other = words;
  for (std::size_t i = 0; i < other.size(); ++i)
    if (i != a.word) other[i] = "the";
  const auto p = m.predict(words, a.word, a.key(), fx.bundle.inventory, fx.bundle.vocab);
  const auto q = m.predict(other, a.word, a.key(), fx.bundle.inventory, fx.bundle.vocab);
  EXPECT_NE(p.probabilities, q.probabilities);
}

TEST(WsdModel, FullModelGradient) {
  const Fixture fx;
  for (bool concat : {false, true}) {
    ModelConfig mc = small_model(fx.bundle.vocab, Variant::BertDef);
    mc.pooling = {Merge::Mean, concat};
    const WsdModel m = WsdModel::create(mc, fx.bundle.inventory, fx.seen, 6);
    const Instance& inst = fx.bundle.train.instances[3];
    const auto words = fx.bundle.train.sentences[inst.sentence].words();
    const auto tokens = tokenize_sentence(words, fx.bundle.vocab, mc.max_len, inst.word);
    const auto r = wsd::testing::grad_check(
        [&] {
          Rng rng(5);
          const WsdModel::Pass pass{true, &rng, nullptr};
          const Tensor h = m.encode_context(tokens, pass);
          const Tensor lg = m.logits(h, *tokens.span_of(inst.word), inst.key(), fx.bundle.inventory, fx.bundle.vocab, pass);
          return scale(log(index(softmax(lg), 1)), -1.0);
        },
        m.parameters(), 1e-4, 3);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
  }
}
