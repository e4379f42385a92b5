#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wsd/data.hpp"
#include "wsd/encoder.hpp"
#include "wsd/tokenizer.hpp"

namespace wsd {

enum class Merge { Mean, Max };

struct PoolingSpec {
  Merge merge = Merge::Mean;
  bool concat_sentence_vector = false;

  // "Mean", "Max", "Mean_Concat", "Max_Concat"
  std::string label() const;
  bool operator==(const PoolingSpec&) const = default;
};

enum class Variant { Bert, BertDef };

std::string_view to_string(Variant v);   // "bert" / "bert_def"
Variant parse_variant(std::string_view text);
std::string_view to_string(Merge m);     // "mean" / "max"
Merge parse_merge(std::string_view text);

struct ModelConfig {
  EncoderConfig encoder;
  Variant variant = Variant::BertDef;
  PoolingSpec pooling;
  bool share_encoders = false;
  double classifier_dropout = 0.5;
  std::size_t max_len = 64;

  // Input width of the shared first classifier layer: H, or 2H with [f; h0].
  std::size_t feature_width() const;
};

// Shared first layer L1 of the classifier: W1 [H x feature_width], b1 [H].
struct ClassifierShared {
  Tensor weight;
  Tensor bias;
};

// Per-lemma output layer L2 of the plain variant: W2 [|S| x H], b2 [|S|].
struct LemmaHead {
  Tensor weight;
  Tensor bias;
};

// Classifier dropout; inactive unless `rng` is set and rate > 0.
struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;
};

// Mean or max over hidden rows [start, start+k), optionally followed by the
// [CLS] row h0.
Tensor pool_span(const Tensor& hidden, PieceSpan span, const PoolingSpec& spec);

// W2 ReLU(W1 f + b1) + b2.
Tensor mlp_head_logits(const Tensor& feature, const LemmaHead& head, const ClassifierShared& shared,
                       DropoutSpec dropout = {});
// Softmax over mlp_head_logits; a null head raises UnseenLemma.
Tensor mlp_head_forward(const Tensor& feature, const LemmaHead* head, const ClassifierShared& shared,
                        DropoutSpec dropout = {});

// W2' ReLU(W1 f + b1) / sqrt(hidden_size); no bias.
Tensor def_head_logits(const Tensor& feature, const Tensor& sense_vectors, const ClassifierShared& shared,
                       std::size_t hidden_size, DropoutSpec dropout = {});
Tensor def_head_forward(const Tensor& feature, const Tensor& sense_vectors, const ClassifierShared& shared,
                        std::size_t hidden_size, DropoutSpec dropout = {});

// Encodes every gloss as [CLS] gloss [SEP]; row i is the mean of sense i's
// gloss piece states. Shape [|senses| x H], rows in inventory order.
Tensor sense_vectors(const std::vector<Sense>& senses, const EncoderParams& params,
                     const EncoderConfig& config, const Vocabulary& vocab, std::size_t max_len,
                     bool train_mode = false, Rng* rng = nullptr);

// One encoder input covering some of a sentence's targets.
struct SentenceWindow {
  TokenizedSentence tokens;
  std::vector<std::size_t> targets;  // positions into the caller's target list
};

// Windows anchored at the leftmost target not yet covered, repeated until
// every target is inside some window.
std::vector<SentenceWindow> plan_windows(const std::vector<std::string>& words,
                                         const std::vector<std::size_t>& target_words,
                                         const Vocabulary& vocab, std::size_t max_len);

struct Prediction {
  std::string sense_key;
  std::size_t sense_index = 0;
  std::vector<double> probabilities;  // inventory order
  bool backoff = false;               // first-sense fallback, no head available
};

// First index of the maximum; ties resolve to the lowest inventory rank.
std::size_t argmax_first(std::span<const double> values);

class WsdModel {
 public:
  using BankCache = std::map<LemmaKey, Tensor>;

  struct Pass {
    bool train_mode = false;
    Rng* rng = nullptr;
    BankCache* banks = nullptr;
  };

  // Fresh parameters. Per-lemma heads are created for `head_lemmas` when the
  // variant is Bert.
  static WsdModel create(const ModelConfig& config, const SenseInventory& inventory,
                         const std::set<LemmaKey>& head_lemmas, std::uint64_t seed);
  // Rebinds a model to previously saved parameters, checking names and shapes.
  static WsdModel from_parameters(const ModelConfig& config, const std::vector<NamedTensor>& params);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::vector<Tensor> encoder_parameters() const;
  const EncoderParams& context_encoder() const { return context_; }
  // The plain variant has no definition encoder; this then aliases the context encoder.
  const EncoderParams& definition_encoder() const {
    return separate_definition_encoder() ? definition_ : context_;
  }
  const ClassifierShared& classifier() const { return classifier_; }
  const LemmaHead* head(const LemmaKey& key) const;

  Tensor encode_context(const TokenizedSentence& tokens, const Pass& pass) const;
  // Sense-vector bank for `key`, computed once per pass when a cache is given.
  Tensor bank(const LemmaKey& key, const SenseInventory& inventory, const Vocabulary& vocab,
              const Pass& pass) const;
  // Unnormalised scores over the inventory senses of `key`.
  Tensor logits(const Tensor& hidden, PieceSpan span, const LemmaKey& key,
                const SenseInventory& inventory, const Vocabulary& vocab, const Pass& pass) const;

  Prediction predict(const std::vector<std::string>& words, std::size_t target, const LemmaKey& key,
                     const SenseInventory& inventory, const Vocabulary& vocab) const;
  // Inference over every instance of a corpus, keyed by instance id.
  std::map<std::string, Prediction> predict_corpus(const AnnotatedCorpus& corpus,
                                                   const SenseInventory& inventory,
                                                   const Vocabulary& vocab) const;

 private:
  bool separate_definition_encoder() const {
    return config_.variant == Variant::BertDef && !config_.share_encoders;
  }
  Prediction finish(const Tensor& logits, const LemmaKey& key, const SenseInventory& inventory) const;
  void bind();

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  EncoderParams context_;
  EncoderParams definition_;
  ClassifierShared classifier_;
  std::map<LemmaKey, LemmaHead> heads_;
};

// Name helpers for the per-lemma head tensors ("head.weight.NOUN.<lemma>").
std::string head_param_name(const LemmaKey& key, bool weight);

}  // namespace wsd
