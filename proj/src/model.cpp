#include "wsd/model.hpp"

#include <cmath>
#include <algorithm>

#include "wsd/error.hpp"

namespace wsd {

namespace {

const std::string kContextPrefix = "context.";
const std::string kDefinitionPrefix = "definition.";
const std::string kClassifierWeight = "classifier.l1.weight";
const std::string kClassifierBias = "classifier.l1.bias";
const std::string kHeadWeight = "head.weight.";
const std::string kHeadBias = "head.bias.";

Tensor maybe_drop(const Tensor& x, DropoutSpec d) {
  if (!d.rng || d.rate == 0.0) return x;
  return dropout(x, d.rate, *d.rng);
}

Tensor hidden_layer(const Tensor& feature, const ClassifierShared& shared, DropoutSpec d) {
  if (feature.dim() != 1 || feature.numel() != shared.weight.cols())
    throw DimensionError("classifier input " + shape_str(feature.shape()) + " does not match W1 " +
                         shape_str(shared.weight.shape()));
  Tensor h = relu(add(matvec(shared.weight, maybe_drop(feature, d)), shared.bias));
  return maybe_drop(h, d);
}

}  // namespace

std::string PoolingSpec::label() const {
  std::string s = merge == Merge::Mean ? "Mean" : "Max";
  return concat_sentence_vector ? s + "_Concat" : s;
}

std::string_view to_string(Variant v) { return v == Variant::Bert ? "bert" : "bert_def"; }

Variant parse_variant(std::string_view text) {
  if (text == "bert") return Variant::Bert;
  if (text == "bert_def") return Variant::BertDef;
  throw ParseError("unknown variant '" + std::string(text) + "' (expected bert or bert_def)");
}

std::string_view to_string(Merge m) { return m == Merge::Mean ? "mean" : "max"; }

Merge parse_merge(std::string_view text) {
  if (text == "mean") return Merge::Mean;
  if (text == "max") return Merge::Max;
  throw ParseError("unknown merge '" + std::string(text) + "' (expected mean or max)");
}

std::size_t ModelConfig::feature_width() const {
  const auto h = static_cast<std::size_t>(encoder.hidden_size);
  return pooling.concat_sentence_vector ? 2 * h : h;
}

Tensor pool_span(const Tensor& hidden, PieceSpan span, const PoolingSpec& spec) {
  if (span.length == 0) throw ContractError("pool_span: empty span");
  if (hidden.dim() != 2 || span.start + span.length > hidden.rows())
    throw ContractError("pool_span: span [" + std::to_string(span.start) + ", " +
                        std::to_string(span.start + span.length) + ") outside hidden states " +
                        shape_str(hidden.shape()));
  Tensor states = slice_rows(hidden, span.start, span.length);
  Tensor f = spec.merge == Merge::Mean ? mean_rows(states) : max_rows(states);
  if (!spec.concat_sentence_vector) return f;
  const Tensor parts[] = {f, row(hidden, 0)};
  return concat(parts);
}

Tensor mlp_head_logits(const Tensor& feature, const LemmaHead& head, const ClassifierShared& shared,
                       DropoutSpec dropout) {
  return add(matvec(head.weight, hidden_layer(feature, shared, dropout)), head.bias);
}

Tensor mlp_head_forward(const Tensor& feature, const LemmaHead* head, const ClassifierShared& shared,
                        DropoutSpec dropout) {
  if (!head) throw UnseenLemma("no trained classifier head for this lemma");
  return softmax(mlp_head_logits(feature, *head, shared, dropout));
}

Tensor def_head_logits(const Tensor& feature, const Tensor& sense_vecs, const ClassifierShared& shared,
                       std::size_t hidden_size, DropoutSpec dropout) {
  return scale(matvec(sense_vecs, hidden_layer(feature, shared, dropout)),
               1.0 / std::sqrt(static_cast<double>(hidden_size)));
}

Tensor def_head_forward(const Tensor& feature, const Tensor& sense_vecs, const ClassifierShared& shared,
                        std::size_t hidden_size, DropoutSpec dropout) {
  return softmax(def_head_logits(feature, sense_vecs, shared, hidden_size, dropout));
}

Tensor sense_vectors(const std::vector<Sense>& senses, const EncoderParams& params,
                     const EncoderConfig& config, const Vocabulary& vocab, std::size_t max_len,
                     bool train_mode, Rng* rng) {
  if (senses.empty()) throw ContractError("sense_vectors: no senses");
  std::vector<Tensor> rows;
  rows.reserve(senses.size());
  for (const auto& s : senses) {
    std::vector<std::string> words;
    std::string w;
    for (char c : s.gloss) {
      if (c == ' ' || c == '\t') {
        if (!w.empty()) words.push_back(std::move(w));
        w.clear();
      } else {
        w += c;
      }
    }
    if (!w.empty()) words.push_back(std::move(w));
    if (words.empty()) throw ValidationError("sense '" + s.key + "' has an empty definition");
    const auto tokens = tokenize_sentence(words, vocab, max_len, 0);
    Tensor hidden = encode(tokens.piece_ids, params, config, train_mode, rng);
    // Drop [CLS] and [SEP].
    rows.push_back(mean_rows(slice_rows(hidden, 1, tokens.piece_ids.size() - 2)));
  }
  for (auto& r : rows) r = reshape(r, {1, r.numel()});
  return concat(rows, 0);
}

std::vector<SentenceWindow> plan_windows(const std::vector<std::string>& words,
                                         const std::vector<std::size_t>& target_words,
                                         const Vocabulary& vocab, std::size_t max_len) {
  std::vector<std::size_t> order(target_words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return target_words[a] < target_words[b]; });
  std::vector<bool> covered(target_words.size(), false);
  std::vector<SentenceWindow> out;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t t = order[oi];
    if (covered[t]) continue;
    SentenceWindow win{tokenize_sentence(words, vocab, max_len, target_words[t]), {}};
    for (std::size_t oj = oi; oj < order.size(); ++oj) {
      const std::size_t u = order[oj];
      if (covered[u]) continue;
      if (win.tokens.span_of(target_words[u])) {
        covered[u] = true;
        win.targets.push_back(u);
      }
    }
    out.push_back(std::move(win));
  }
  return out;
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::string head_param_name(const LemmaKey& key, bool weight) {
  return (weight ? kHeadWeight : kHeadBias) + std::string(to_string(key.pos)) + "." + key.lemma;
}

// --- WsdModel -------------------------------------------------------------------

WsdModel WsdModel::create(const ModelConfig& config, const SenseInventory& inventory,
                          const std::set<LemmaKey>& head_lemmas, std::uint64_t seed) {
  config.encoder.validate();
  WsdModel m;
  m.config_ = config;
  for (auto& nt : init_params(config.encoder, seed).named(kContextPrefix)) m.params_.push_back(nt);
  if (m.separate_definition_encoder())
    for (auto& nt : init_params(config.encoder, seed + 1).named(kDefinitionPrefix)) m.params_.push_back(nt);

  Rng rng(seed + 2);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto weight = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = normal(rng);
    return Tensor::matrix(r, c, std::move(v), true);
  };
  const auto H = static_cast<std::size_t>(config.encoder.hidden_size);
  m.params_.emplace_back(kClassifierWeight, weight(H, config.feature_width()));
  m.params_.emplace_back(kClassifierBias, Tensor::zeros({H}, true));
  if (config.variant == Variant::Bert)
    for (const auto& key : head_lemmas) {
      const std::size_t senses = inventory.at(key).size();
      m.params_.emplace_back(head_param_name(key, true), weight(senses, H));
      m.params_.emplace_back(head_param_name(key, false), Tensor::zeros({senses}, true));
    }
  m.bind();
  return m;
}

WsdModel WsdModel::from_parameters(const ModelConfig& config, const std::vector<NamedTensor>& params) {
  config.encoder.validate();
  // Shapes are checked against a freshly initialised skeleton.
  std::set<LemmaKey> heads;
  SenseInventory::Entries sizes;
  std::map<std::string, Tensor> by_name;
  for (const auto& [name, t] : params) {
    if (!by_name.emplace(name, t).second) throw IntegrityError("duplicate parameter '" + name + "'");
    if (name.rfind(kHeadWeight, 0) == 0) {
      const std::string rest = name.substr(kHeadWeight.size());
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw IntegrityError("malformed head parameter '" + name + "'");
      LemmaKey key{rest.substr(dot + 1), parse_pos(rest.substr(0, dot))};
      heads.insert(key);
      if (t.dim() != 2) throw IntegrityError("head parameter '" + name + "' is not a matrix");
      auto& senses = sizes[key];
      for (std::size_t i = 0; i < t.rows(); ++i) senses.push_back({std::to_string(i), "x"});
    }
  }
  if (config.variant != Variant::Bert && !heads.empty())
    throw IntegrityError("per-lemma heads present in a bert_def model");
  WsdModel skeleton = create(config, SenseInventory(std::move(sizes)), heads, 0);
  WsdModel m;
  m.config_ = config;
  for (const auto& [name, t] : skeleton.params_) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IntegrityError("missing parameter '" + name + "'");
    if (it->second.shape() != t.shape())
      throw IntegrityError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                           ", expected " + shape_str(t.shape()));
    it->second.set_requires_grad(true);
    m.params_.emplace_back(name, it->second);
    by_name.erase(it);
  }
  if (!by_name.empty()) throw IntegrityError("unexpected parameter '" + by_name.begin()->first + "'");
  m.bind();
  return m;
}

void WsdModel::bind() {
  std::map<std::string, Tensor> by_name(params_.begin(), params_.end());
  auto lookup = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IntegrityError("missing parameter '" + name + "'");
    return it->second;
  };
  context_ = EncoderParams::from_named(config_.encoder, kContextPrefix, lookup);
  if (separate_definition_encoder())
    definition_ = EncoderParams::from_named(config_.encoder, kDefinitionPrefix, lookup);
  classifier_ = {lookup(kClassifierWeight), lookup(kClassifierBias)};
  heads_.clear();
  for (const auto& [name, t] : params_) {
    if (name.rfind(kHeadWeight, 0) != 0) continue;
    const std::string rest = name.substr(kHeadWeight.size());
    const auto dot = rest.find('.');
    LemmaKey key{rest.substr(dot + 1), parse_pos(rest.substr(0, dot))};
    heads_[key] = {t, lookup(head_param_name(key, false))};
  }
}

std::vector<Tensor> WsdModel::encoder_parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_)
    if (name.rfind(kContextPrefix, 0) == 0 || name.rfind(kDefinitionPrefix, 0) == 0) out.push_back(t);
  return out;
}

const LemmaHead* WsdModel::head(const LemmaKey& key) const {
  auto it = heads_.find(key);
  return it == heads_.end() ? nullptr : &it->second;
}

Tensor WsdModel::encode_context(const TokenizedSentence& tokens, const Pass& pass) const {
  return encode(tokens.piece_ids, context_, config_.encoder, pass.train_mode, pass.rng);
}

Tensor WsdModel::bank(const LemmaKey& key, const SenseInventory& inventory, const Vocabulary& vocab,
                      const Pass& pass) const {
  if (pass.banks) {
    auto it = pass.banks->find(key);
    if (it != pass.banks->end()) return it->second;
  }
  Tensor b = sense_vectors(inventory.at(key), definition_encoder(), config_.encoder, vocab, config_.max_len,
                           pass.train_mode, pass.rng);
  if (pass.banks) pass.banks->emplace(key, b);
  return b;
}

Tensor WsdModel::logits(const Tensor& hidden, PieceSpan span, const LemmaKey& key,
                        const SenseInventory& inventory, const Vocabulary& vocab, const Pass& pass) const {
  const auto& senses = inventory.at(key);
  const DropoutSpec drop{config_.classifier_dropout, pass.train_mode ? pass.rng : nullptr};
  Tensor f = pool_span(hidden, span, config_.pooling);
  if (config_.variant == Variant::BertDef)
    return def_head_logits(f, bank(key, inventory, vocab, pass), classifier_,
                           static_cast<std::size_t>(config_.encoder.hidden_size), drop);
  const LemmaHead* h = head(key);
  if (!h) throw UnseenLemma("no trained classifier head for " + to_string(key));
  if (h->weight.rows() != senses.size())
    throw ValidationError("head for " + to_string(key) + " has " + std::to_string(h->weight.rows()) +
                          " senses but the inventory lists " + std::to_string(senses.size()));
  return mlp_head_logits(f, *h, classifier_, drop);
}

Prediction WsdModel::finish(const Tensor& lg, const LemmaKey& key, const SenseInventory& inventory) const {
  const auto& senses = inventory.at(key);
  Prediction p;
  Tensor probs = softmax(lg);
  p.probabilities.assign(probs.data().begin(), probs.data().end());
  p.sense_index = argmax_first(lg.data());
  p.sense_key = senses[p.sense_index].key;
  return p;
}

Prediction WsdModel::predict(const std::vector<std::string>& words, std::size_t target, const LemmaKey& key,
                             const SenseInventory& inventory, const Vocabulary& vocab) const {
  const auto& senses = inventory.at(key);
  if (target >= words.size()) throw ContractError("predict: target index out of range");
  if (config_.variant == Variant::Bert && !head(key)) {
    Prediction p{senses[0].key, 0, std::vector<double>(senses.size(), 0.0), true};
    p.probabilities[0] = 1.0;
    return p;
  }
  NoGradGuard no_grad;
  const auto windows = plan_windows(words, {target}, vocab, config_.max_len);
  const auto& tokens = windows.front().tokens;
  const Pass pass{};
  Tensor hidden = encode_context(tokens, pass);
  return finish(logits(hidden, *tokens.span_of(target), key, inventory, vocab, pass), key, inventory);
}

std::map<std::string, Prediction> WsdModel::predict_corpus(const AnnotatedCorpus& corpus,
                                                           const SenseInventory& inventory,
                                                           const Vocabulary& vocab) const {
  NoGradGuard no_grad;
  BankCache banks;
  const Pass pass{false, nullptr, &banks};
  std::map<std::string, Prediction> out;
  const auto groups = corpus.instances_by_sentence();
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    if (groups[s].empty()) continue;
    const auto words = corpus.sentences[s].words();
    std::vector<std::size_t> targets;
    for (auto i : groups[s]) targets.push_back(corpus.instances[i].word);
    for (const auto& win : plan_windows(words, targets, vocab, config_.max_len)) {
      Tensor hidden;
      for (auto t : win.targets) {
        const auto& inst = corpus.instances[groups[s][t]];
        const auto& senses = inventory.at(inst.key());
        if (config_.variant == Variant::Bert && !head(inst.key())) {
          Prediction p{senses[0].key, 0, std::vector<double>(senses.size(), 0.0), true};
          p.probabilities[0] = 1.0;
          out[inst.id] = std::move(p);
          continue;
        }
        if (!hidden.defined()) hidden = encode_context(win.tokens, pass);
        out[inst.id] = finish(logits(hidden, *win.tokens.span_of(inst.word), inst.key(), inventory, vocab, pass),
                              inst.key(), inventory);
      }
    }
  }
  return out;
}

}  // namespace wsd
