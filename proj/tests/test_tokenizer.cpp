#include <gtest/gtest.h>

#include <random>

#include "wsd/error.hpp"
#include "wsd/synth.hpp"
#include "wsd/tokenizer.hpp"

using namespace wsd;

namespace {

Vocabulary toy_vocab() {
  return Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "un", "una", "##aff", "##able", "bank", "river", "the",
                     "##s", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
}

std::string join_pieces(const std::vector<std::string>& pieces) {
  std::string out;
  for (const auto& p : pieces) out += p.rfind("##", 0) == 0 ? p.substr(2) : p;
  return out;
}

}  // namespace

TEST(Vocabulary, RequiresSpecialsAndUniquePieces) {
  EXPECT_THROW(Vocabulary({"[CLS]", "[SEP]", "[UNK]"}), ValidationError);
  EXPECT_THROW(Vocabulary({"[CLS]", "[SEP]", "[UNK]", "[PAD]", "x", "x"}), ValidationError);
  const Vocabulary v = toy_vocab();
  EXPECT_EQ(v.pad(), 0);
  EXPECT_EQ(v.cls(), 2);
  EXPECT_EQ(v.id("bank"), 8);
  EXPECT_EQ(v.id_or_unk("nope"), v.unk());
  EXPECT_THROW(v.id("nope"), ContractError);
}

TEST(Vocabulary, SerializeParseRoundTrip) {
  const Vocabulary v = toy_vocab();
  const Vocabulary w = Vocabulary::parse(v.serialize());
  EXPECT_EQ(v.pieces(), w.pieces());
  EXPECT_EQ(v.fingerprint(), w.fingerprint());
  auto pieces = v.pieces();
  std::swap(pieces[4], pieces[5]);
  EXPECT_NE(Vocabulary(pieces).fingerprint(), v.fingerprint());
}

TEST(Tokenizer, GreedyLongestMatchFirst) {
  const Vocabulary v = toy_vocab();
  EXPECT_EQ(tokenize_word("bank", v), (std::vector<std::string>{"bank"}));
  EXPECT_EQ(tokenize_word("banks", v), (std::vector<std::string>{"bank", "##s"}));
  // Greedy takes "una" first and then cannot continue with "##ffable":
  // the whole word becomes [UNK] even though un ##aff ##able would fit.
  EXPECT_EQ(tokenize_word("unaffable", v), (std::vector<std::string>{"[UNK]"}));
  EXPECT_EQ(tokenize_word("bankx", v), (std::vector<std::string>{"[UNK]"}));
}

TEST(Tokenizer, LowercasesAscii) {
  EXPECT_EQ(lowercase("RiVeR"), "river");
  const Vocabulary v = toy_vocab();
  const auto t = tokenize_sentence({"The", "BANK"}, v, 16);
  EXPECT_EQ(t.words, (std::vector<std::string>{"the", "bank"}));
  EXPECT_EQ(t.piece_ids, (std::vector<int>{v.cls(), v.id("the"), v.id("bank"), v.sep()}));
}

TEST(Tokenizer, SpansAreContiguousAndCoverPieces) {
  const Vocabulary v = toy_vocab();
  const auto t = tokenize_sentence({"the", "banks", "river", "zzz"}, v, 32);
  ASSERT_EQ(t.spans.size(), 4u);
  EXPECT_EQ(t.spans[0], (PieceSpan{1, 1}));
  EXPECT_EQ(t.spans[1], (PieceSpan{2, 2}));
  EXPECT_EQ(t.spans[2], (PieceSpan{4, 1}));
  EXPECT_EQ(t.spans[3], (PieceSpan{5, 1}));
  EXPECT_EQ(t.piece_ids[5], v.unk());
  EXPECT_EQ(t.piece_ids.front(), v.cls());
  EXPECT_EQ(t.piece_ids.back(), v.sep());
  EXPECT_EQ(t.piece_ids.size(), 7u);
  ASSERT_NE(t.span_of(1), nullptr);
  EXPECT_EQ(t.span_of(4), nullptr);
}

TEST(Tokenizer, LongSentenceKeepsCenteredWindow) {
  const Vocabulary v = toy_vocab();
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const auto t = tokenize_sentence(words, v, 7, 5);
  EXPECT_EQ(t.first_word, 3u);
  EXPECT_EQ(t.words, (std::vector<std::string>{"d", "e", "f", "g", "h"}));
  EXPECT_EQ(t.piece_ids.size(), 7u);
  ASSERT_NE(t.span_of(5), nullptr);
  EXPECT_EQ(*t.span_of(5), (PieceSpan{3, 1}));
  EXPECT_EQ(t.span_of(2), nullptr);
  EXPECT_EQ(t.span_of(8), nullptr);

  // At the start of the sentence the window extends right only.
  const auto s = tokenize_sentence(words, v, 7, 0);
  EXPECT_EQ(s.first_word, 0u);
  EXPECT_EQ(s.words.size(), 5u);
}

TEST(Tokenizer, OversizedAnchorIsClipped) {
  const Vocabulary v = toy_vocab();
  const auto t = tokenize_sentence({"the", "banks", "the"}, v, 3, 1);
  EXPECT_EQ(t.words, (std::vector<std::string>{"banks"}));
  EXPECT_EQ(t.piece_ids, (std::vector<int>{v.cls(), v.id("bank"), v.sep()}));
  EXPECT_EQ(t.spans[0], (PieceSpan{1, 1}));
}

TEST(Tokenizer, RejectsBadArguments) {
  const Vocabulary v = toy_vocab();
  EXPECT_THROW(tokenize_sentence({}, v, 8), ContractError);
  EXPECT_THROW(tokenize_sentence({"a"}, v, 2), ContractError);
  EXPECT_THROW(tokenize_sentence({"a"}, v, 8, 1), ContractError);
}

TEST(Tokenizer, WordLevelRoundTripOnUnkFreeInputs) {
  SynthSpec spec;
  spec.seed = 5;
  const SynthBundle b = synth_corpus(spec);
  std::size_t multi = 0, words = 0;
  for (const auto& s : b.train.sentences) {
    const auto t = tokenize_sentence(s.words(), b.vocab, 512);
    ASSERT_EQ(t.words.size(), s.tokens.size());
    for (std::size_t w = 0; w < t.words.size(); ++w) {
      std::vector<std::string> pieces;
      for (std::size_t i = 0; i < t.spans[w].length; ++i)
        pieces.push_back(b.vocab.piece(t.piece_ids[t.spans[w].start + i]));
      ASSERT_NE(pieces.front(), "[UNK]");
      EXPECT_EQ(join_pieces(pieces), lowercase(s.tokens[w].surface));
      multi += pieces.size() > 1;
      ++words;
    }
  }
  EXPECT_GT(multi, 0u);
  EXPECT_LT(multi, words);
}
