#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace wsd {

enum class Pos { Noun, Verb, Adj, Adv };

inline constexpr Pos kAllPos[] = {Pos::Noun, Pos::Verb, Pos::Adj, Pos::Adv};

std::string_view to_string(Pos pos);
Pos parse_pos(std::string_view text);  // throws ParseError

struct LemmaKey {
  std::string lemma;
  Pos pos = Pos::Noun;
  auto operator<=>(const LemmaKey&) const = default;
  bool operator==(const LemmaKey&) const = default;
};

std::string to_string(const LemmaKey& key);  // "bank/NOUN"

struct Token {
  std::string surface;
  std::string lemma;        // optional on <wf>
  std::string pos;          // raw tag; coarse tag on instances
  std::string instance_id;  // empty for <wf>
  bool is_instance() const { return !instance_id.empty(); }
  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::string id;
  std::string text_id;
  std::vector<Token> tokens;
  std::vector<std::string> words() const;
  bool operator==(const Sentence&) const = default;
};

struct Instance {
  std::string id;
  std::string lemma;
  Pos pos = Pos::Noun;
  std::size_t sentence = 0;
  std::size_t word = 0;
  std::string dataset;  // text id up to its first '.'
  LemmaKey key() const { return {lemma, pos}; }
  bool operator==(const Instance&) const = default;
};

struct AnnotatedCorpus {
  std::vector<Sentence> sentences;
  std::vector<Instance> instances;
  // Instance indices per sentence, in word order.
  std::vector<std::vector<std::size_t>> instances_by_sentence() const;
  std::vector<std::string> datasets() const;  // in first-seen order
  bool operator==(const AnnotatedCorpus&) const = default;
};

std::string dataset_of(std::string_view text_id);

// Parses the all-words XML: <corpus><text id><sentence id>(<wf>|<instance>)*.
AnnotatedCorpus parse_corpus(std::string_view xml);
std::string serialize_corpus(const AnnotatedCorpus& corpus);

using GoldKeys = std::map<std::string, std::set<std::string>>;

GoldKeys parse_gold(std::string_view text);
std::string serialize_gold(const GoldKeys& gold);

struct Sense {
  std::string key;
  std::string gloss;
  bool operator==(const Sense&) const = default;
};

class SenseInventory {
 public:
  using Entries = std::map<LemmaKey, std::vector<Sense>>;

  SenseInventory() = default;
  explicit SenseInventory(Entries entries);  // validates

  const Entries& entries() const { return entries_; }
  const std::vector<Sense>* find(const LemmaKey& key) const;
  const std::vector<Sense>& at(const LemmaKey& key) const;  // throws UnknownLemma
  // Rank of `sense_key` within the entry, or -1.
  int rank_of(const LemmaKey& key, std::string_view sense_key) const;
  // Entries for a lemma across parts of speech.
  std::vector<LemmaKey> keys_for_lemma(std::string_view lemma) const;

  bool operator==(const SenseInventory&) const = default;

 private:
  Entries entries_;
};

SenseInventory load_inventory(std::string_view tsv);
std::string serialize_inventory(const SenseInventory& inventory);

// Throws ValidationError naming the first broken reference.
void validate_references(const AnnotatedCorpus& corpus, const GoldKeys& gold,
                         const SenseInventory& inventory);

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t annotations = 0;
  double ambiguity = 0.0;  // mean inventory sense count over instances
};

CorpusStats corpus_stats(const AnnotatedCorpus& corpus, const SenseInventory& inventory);

// Instances per (lemma, pos) in a corpus.
std::map<LemmaKey, std::size_t> lemma_counts(const AnnotatedCorpus& corpus);

}  // namespace wsd
