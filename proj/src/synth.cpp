#include "wsd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "wsd/error.hpp"
#include "wsd/tensor.hpp"

namespace wsd {

namespace {

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "ta", "si", "po",
                                      "de", "vu", "ba", "fe", "gi", "ho", "ju", "zo"};
constexpr const char* kFillers[] = {"the", "a", "of", "and", "to", "in", "with", "on"};

std::string sense_key(const std::string& lemma, Pos pos, int rank) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%%%d:00:%02d::", static_cast<int>(pos) + 1, rank);
  return lemma + buf;
}

std::string numbered(const std::string& prefix, std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%03zu", n);
  return prefix + buf;
}

int zipf_count(int base, int rank, double exponent) {
  const double n = static_cast<double>(base) * std::pow(static_cast<double>(rank + 1), -exponent);
  return std::max(1, static_cast<int>(std::lround(n)));
}

struct Generator {
  const SynthSpec& spec;
  Rng rng;
  std::vector<std::string> lemmas;
  std::vector<Pos> pos;
  std::vector<std::vector<std::vector<std::string>>> cues;  // [lemma][sense] -> cue words

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

  Sentence make_sentence(std::size_t lemma, int sense, const std::string& id, const std::string& text_id) {
    const auto& own = cues[lemma][static_cast<std::size_t>(sense)];
    std::vector<std::string> chosen = own;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(std::min<std::size_t>(chosen.size(), static_cast<std::size_t>(spec.cues_per_sentence)));
    std::vector<Token> tokens;
    for (const auto& c : chosen) tokens.push_back({c, c, "X", ""});
    for (int f = 0; f < spec.fillers_per_sentence; ++f) {
      std::string w = kFillers[pick(std::size(kFillers))];
      tokens.push_back({w, w, "X", ""});
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    const std::size_t at = pick(tokens.size() + 1);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                  Token{lemmas[lemma], lemmas[lemma], std::string(to_string(pos[lemma])), id + ".t000"});
    return {id, text_id, std::move(tokens)};
  }

  void emit(AnnotatedCorpus& corpus, GoldKeys& gold, std::size_t lemma, int sense, const std::string& text_id) {
    const std::size_t n = corpus.sentences.size();
    Sentence s = make_sentence(lemma, sense, numbered(text_id + ".s", n), text_id);
    for (std::size_t w = 0; w < s.tokens.size(); ++w)
      if (s.tokens[w].is_instance()) {
        corpus.instances.push_back({s.tokens[w].instance_id, lemmas[lemma], pos[lemma], n, w,
                                    dataset_of(text_id)});
        gold[s.tokens[w].instance_id] = {sense_key(lemmas[lemma], pos[lemma], sense)};
      }
    corpus.sentences.push_back(std::move(s));
  }
};

}  // namespace

SynthBundle synth_corpus(const SynthSpec& spec) {
  if (spec.num_lemmas <= 0 || spec.senses_per_lemma <= 0 || spec.sentences_per_sense <= 0 ||
      spec.vocab_size <= 0 || spec.cues_per_sense <= 0 || spec.cues_per_sentence <= 0 ||
      spec.test_datasets <= 0 || spec.fillers_per_sentence < 0 || spec.dev_sentences_per_sense < 0 ||
      spec.test_sentences_per_sense < 0)
    throw ContractError("synth_corpus: counts must be positive");
  if (spec.held_out_lemmas < 0 || spec.held_out_lemmas >= spec.num_lemmas)
    throw ContractError("synth_corpus: held_out_lemmas must leave at least one training lemma");
  if (spec.vocab_size < spec.senses_per_lemma * spec.cues_per_sense)
    throw ContractError("synth_corpus: vocab_size too small for distinct cue sets per lemma");

  Generator g{spec, Rng(spec.seed), {}, {}, {}};

  // Unique made-up words from CV syllables, disjoint from the fillers.
  std::set<std::string> used(std::begin(kFillers), std::end(kFillers));
  for (auto s : kSyllables) used.insert(s);
  auto fresh_word = [&] {
    for (;;) {
      const std::size_t len = 2 + g.pick(2);
      std::string w;
      for (std::size_t i = 0; i < len; ++i) w += kSyllables[g.pick(std::size(kSyllables))];
      if (used.insert(w).second) return w;
    }
  };
  for (int i = 0; i < spec.num_lemmas; ++i) {
    g.lemmas.push_back(fresh_word());
    g.pos.push_back(kAllPos[static_cast<std::size_t>(i) % 4]);
  }
  std::vector<std::string> lexicon;
  for (int i = 0; i < spec.vocab_size; ++i) lexicon.push_back(fresh_word());

  // Piece vocabulary: specials, characters, syllables, fillers, and roughly
  // half of the generated words as whole pieces; the rest segment.
  std::vector<std::string> pieces = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (char c = 'a'; c <= 'z'; ++c) pieces.push_back(std::string(1, c));
  for (char c = 'a'; c <= 'z'; ++c) pieces.push_back("##" + std::string(1, c));
  for (auto s : kSyllables) pieces.push_back(s);
  for (auto s : kSyllables) pieces.push_back(std::string("##") + s);
  for (auto f : kFillers)
    if (std::find(pieces.begin(), pieces.end(), f) == pieces.end()) pieces.push_back(f);
  std::bernoulli_distribution whole(0.5);
  for (const auto& w : g.lemmas)
    if (whole(g.rng)) pieces.push_back(w);
  for (const auto& w : lexicon)
    if (whole(g.rng)) pieces.push_back(w);

  const int trained = spec.num_lemmas - spec.held_out_lemmas;
  std::vector<std::string> trained_cues;
  SenseInventory::Entries entries;
  g.cues.resize(g.lemmas.size());
  for (std::size_t l = 0; l < g.lemmas.size(); ++l) {
    const bool held_out = static_cast<int>(l) >= trained;
    // Held-out lemmas reuse cue words seen with training lemmas so their
    // contexts and glosses are made of trained vocabulary.
    std::vector<std::string> pool = held_out && trained_cues.size() >= static_cast<std::size_t>(
                                                    spec.senses_per_lemma * spec.cues_per_sense)
                                        ? trained_cues
                                        : lexicon;
    std::shuffle(pool.begin(), pool.end(), g.rng);
    std::size_t next = 0;
    for (int s = 0; s < spec.senses_per_lemma; ++s) {
      std::vector<std::string> own(pool.begin() + static_cast<std::ptrdiff_t>(next),
                                   pool.begin() + static_cast<std::ptrdiff_t>(next + spec.cues_per_sense));
      next += static_cast<std::size_t>(spec.cues_per_sense);
      std::string gloss;
      for (const auto& c : own) gloss += (gloss.empty() ? "" : " ") + c;
      entries[{g.lemmas[l], g.pos[l]}].push_back({sense_key(g.lemmas[l], g.pos[l], s), gloss});
      if (!held_out)
        for (const auto& c : own)
          if (std::find(trained_cues.begin(), trained_cues.end(), c) == trained_cues.end())
            trained_cues.push_back(c);
      g.cues[l].push_back(std::move(own));
    }
  }

  SynthBundle b{{}, {}, {}, {}, SenseInventory(std::move(entries)), Vocabulary(std::move(pieces)), {}};
  for (int l = trained; l < spec.num_lemmas; ++l) b.held_out.insert({g.lemmas[l], g.pos[l]});

  for (std::size_t l = 0; l < static_cast<std::size_t>(trained); ++l)
    for (int s = 0; s < spec.senses_per_lemma; ++s)
      for (int n = zipf_count(spec.sentences_per_sense, s, spec.zipf_exponent); n > 0; --n)
        g.emit(b.train, b.gold, l, s, numbered("train.d", l));
  if (spec.dev_sentences_per_sense > 0)
    for (std::size_t l = 0; l < static_cast<std::size_t>(trained); ++l)
      for (int s = 0; s < spec.senses_per_lemma; ++s)
        for (int n = zipf_count(spec.dev_sentences_per_sense, s, spec.zipf_exponent); n > 0; --n)
          g.emit(b.dev, b.gold, l, s, numbered("dev.d", l));
  if (spec.test_sentences_per_sense > 0) {
    // Round-robin over datasets keeps every lemma represented in each one
    // when there are at least as many sentences as datasets.
    std::vector<AnnotatedCorpus> parts(static_cast<std::size_t>(spec.test_datasets));
    std::size_t turn = 0;
    for (std::size_t l = 0; l < g.lemmas.size(); ++l)
      for (int s = 0; s < spec.senses_per_lemma; ++s)
        for (int n = zipf_count(spec.test_sentences_per_sense, s, spec.zipf_exponent); n > 0; --n) {
          const std::size_t d = turn++ % parts.size();
          g.emit(parts[d], b.gold, l, s, numbered("test" + std::to_string(d + 1) + ".d", l));
        }
    for (auto& part : parts) {
      const std::size_t offset = b.test.sentences.size();
      for (auto& inst : part.instances) inst.sentence += offset;
      b.test.sentences.insert(b.test.sentences.end(), part.sentences.begin(), part.sentences.end());
      b.test.instances.insert(b.test.instances.end(), part.instances.begin(), part.instances.end());
    }
  }
  return b;
}

}  // namespace wsd
