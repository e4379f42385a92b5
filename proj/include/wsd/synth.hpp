#pragma once

#include <cstdint>
#include <set>

#include "wsd/data.hpp"
#include "wsd/tokenizer.hpp"

namespace wsd {

// Knobs of the synthetic all-words generator. Each sense owns a set of cue
// words; its sentences mention the target lemma next to some of those cues
// and its gloss lists all of them.
struct SynthSpec {
  int num_lemmas = 8;
  int senses_per_lemma = 3;
  int sentences_per_sense = 10;  // training sentences for the rank-0 sense
  int vocab_size = 48;           // size of the cue-word lexicon
  std::uint64_t seed = 1;

  int cues_per_sense = 3;
  int cues_per_sentence = 2;
  int fillers_per_sentence = 2;
  double zipf_exponent = 0.0;  // 0 keeps every sense at sentences_per_sense
  int held_out_lemmas = 0;     // trailing lemmas that never appear in training
  int dev_sentences_per_sense = 2;
  int test_sentences_per_sense = 3;
  int test_datasets = 2;
};

struct SynthBundle {
  AnnotatedCorpus train;
  AnnotatedCorpus dev;
  AnnotatedCorpus test;
  GoldKeys gold;  // covers train, dev and test ids
  SenseInventory inventory;
  Vocabulary vocab;
  std::set<LemmaKey> held_out;
};

SynthBundle synth_corpus(const SynthSpec& spec);

}  // namespace wsd
