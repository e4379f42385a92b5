#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support/grad_check.hpp"
#include "wsd/encoder.hpp"
#include "wsd/error.hpp"

using namespace wsd;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden_size = 16;
  c.num_heads = 4;
  c.ffn_size = 24;
  c.vocab_size = 20;
  c.max_positions = 12;
  c.dropout_rate = 0.1;
  return c;
}

}  // namespace

TEST(Encoder, ValidateRejectsBadShapes) {
  EncoderConfig c = small_config();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config();
  c.vocab_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config();
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(small_config().validate());
}

TEST(Encoder, InitialisationStatistics) {
  EncoderConfig c = small_config();
  c.hidden_size = 64;
  c.num_heads = 4;
  c.ffn_size = 128;
  c.vocab_size = 200;
  const EncoderParams p = init_params(c, 21);
  std::size_t n = 0;
  double s = 0.0, ss = 0.0;
  for (const auto& [name, t] : p.named()) {
    const bool is_bias = name.ends_with(".bias");
    const bool is_gain = name.ends_with(".gain");
    for (double v : t.data()) {
      if (is_bias) {
        EXPECT_EQ(v, 0.0) << name;
      } else if (is_gain) {
        EXPECT_EQ(v, 1.0) << name;
      } else {
        s += v;
        ss += v * v;
        ++n;
      }
    }
  }
  const double mean = s / static_cast<double>(n);
  const double sd = std::sqrt(ss / static_cast<double>(n) - mean * mean);
  // N(0, 0.02^2) over n draws: sd of the sample mean is 0.02 / sqrt(n).
  EXPECT_LT(std::abs(mean), 5.0 * 0.02 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(sd, 0.02, 0.0005);
}

TEST(Encoder, SeedsAreReproducible) {
  const EncoderConfig c = small_config();
  const auto a = init_params(c, 4).named(), b = init_params(c, 4).named(), d = init_params(c, 5).named();
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
    differs |= !std::equal(a[i].second.data().begin(), a[i].second.data().end(), d[i].second.data().begin());
  }
  EXPECT_TRUE(differs);
}

TEST(Encoder, NamedRoundTrip) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 2);
  const auto named = p.named("context.");
  std::map<std::string, Tensor> by_name(named.begin(), named.end());
  EXPECT_TRUE(by_name.count("context.embedding.token"));
  EXPECT_TRUE(by_name.count("context.layer1.ffn.norm.gain"));
  const EncoderParams q =
      EncoderParams::from_named(c, "context.", [&](const std::string& n) { return by_name.at(n); });
  const auto again = q.named("context.");
  ASSERT_EQ(again.size(), named.size());
  for (std::size_t i = 0; i < named.size(); ++i) EXPECT_TRUE(again[i].second.same_node(named[i].second));
}

TEST(Encoder, OutputShapeAndDeterminism) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 3);
  const std::vector<int> ids{2, 5, 7, 9, 3};
  const Tensor h1 = encode(ids, p, c, false), h2 = encode(ids, p, c, false);
  EXPECT_EQ(h1.shape(), (Shape{5, 16}));
  for (std::size_t i = 0; i < h1.numel(); ++i) EXPECT_EQ(h1[i], h2[i]);
  Rng r1(8), r2(8);
  const Tensor t1 = encode(ids, p, c, true, &r1), t2 = encode(ids, p, c, true, &r2);
  for (std::size_t i = 0; i < t1.numel(); ++i) EXPECT_EQ(t1[i], t2[i]);
  bool dropped = false;
  for (std::size_t i = 0; i < t1.numel(); ++i) dropped |= t1[i] != h1[i];
  EXPECT_TRUE(dropped);
}

TEST(Encoder, RejectsOutOfRangeInputs) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 3);
  EXPECT_THROW(encode(std::vector<int>{1, 99}, p, c, false), ContractError);
  EXPECT_THROW(encode(std::vector<int>(13, 1), p, c, false), ContractError);
  EXPECT_THROW(encode(std::vector<int>{}, p, c, false), ContractError);
}

TEST(Encoder, AttentionRowsAreDistributions) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 3);
  EncoderTrace trace;
  encode(std::vector<int>{2, 4, 6, 8, 3}, p, c, false, nullptr, &trace);
  ASSERT_EQ(trace.attention.size(), 2u);
  for (const auto& layer : trace.attention) {
    ASSERT_EQ(layer.size(), 4u);
    for (const auto& a : layer) {
      ASSERT_EQ(a.shape(), (Shape{5, 5}));
      for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
          EXPECT_GE(a.at(r, k), 0.0);
          s += a.at(r, k);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(Encoder, PadKeysAreMaskedOut) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 3);
  const int pad = 0;
  const Tensor plain = encode(std::vector<int>{2, 4, 6, 3}, p, c, false, nullptr, nullptr, pad);
  EncoderTrace trace;
  const Tensor padded = encode(std::vector<int>{2, 4, 6, 3, pad, pad}, p, c, false, nullptr, &trace, pad);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(plain.at(r, k), padded.at(r, k), 1e-12);
  for (const auto& layer : trace.attention)
    for (const auto& a : layer)
      for (std::size_t r = 0; r < 6; ++r) EXPECT_LT(a.at(r, 4) + a.at(r, 5), 1e-12);
}

TEST(Encoder, PositionMakesOrderMatter) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 3);
  const Tensor a = encode(std::vector<int>{2, 4, 6, 3}, p, c, false);
  const Tensor b = encode(std::vector<int>{2, 6, 4, 3}, p, c, false);
  // The same token at a different slot gets a different state.
  double diff = 0.0;
  for (std::size_t k = 0; k < 16; ++k) diff += std::abs(a.at(1, k) - b.at(2, k));
  EXPECT_GT(diff, 1e-6);
}

TEST(Encoder, GradientReachesEveryParameter) {
  const EncoderConfig c = small_config();
  const EncoderParams p = init_params(c, 3);
  const auto named = p.named();
  for (auto [n, t] : named) t.zero_grad();
  const Tensor h = encode(std::vector<int>{2, 4, 6, 3}, p, c, false);
  std::vector<double> w(h.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(static_cast<double>(i));
  backward(sum(mul(reshape(h, {h.numel()}), Tensor::vector(w))));
  for (const auto& [n, t] : named) {
    ASSERT_TRUE(t.has_grad()) << n;
    double g = 0.0;
    for (double v : t.grad()) g += std::abs(v);
    EXPECT_GT(g, 0.0) << n;
  }
}

TEST(Encoder, FiniteDifferenceGradient) {
  EncoderConfig c = small_config();
  c.hidden_size = 8;
  c.num_heads = 2;
  c.ffn_size = 12;
  c.num_layers = 1;
  c.vocab_size = 10;
  c.max_positions = 6;
  const EncoderParams p = init_params(c, 9);
  // Larger weights so the attention is far from uniform.
  for (auto [n, t] : p.named())
    if (!n.ends_with("gain") && !n.ends_with("bias"))
      for (auto& v : t.mutable_data()) v *= 20.0;
  const std::vector<int> ids{1, 4, 4, 7, 2};
  std::vector<double> w(5 * 8);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::cos(0.7 * static_cast<double>(i));
  const auto r = wsd::testing::grad_check(
      [&] {
        Rng rng(77);
        const Tensor h = encode(ids, p, c, true, &rng);
        return sum(mul(reshape(h, {h.numel()}), Tensor::vector(w)));
      },
      p.named());
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
}
