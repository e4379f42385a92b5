#include "wsd/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "wsd/error.hpp"
#include "wsd/evaluation.hpp"

namespace wsd {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (freeze_epochs < 0 || freeze_epochs >= epochs)
    throw ValidationError("freeze_epochs must satisfy 0 <= freeze_epochs < epochs");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must lie in [0, 1)");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(base_lr > 0.0)) throw ValidationError("base_lr must be positive");
  if (max_len < 3) throw ValidationError("max_len must be at least 3");
}

ModelConfig model_config(const EncoderConfig& encoder, const TrainConfig& train) {
  ModelConfig m;
  m.encoder = encoder;
  m.variant = train.variant;
  m.pooling = train.pooling;
  m.share_encoders = train.share_encoders;
  m.classifier_dropout = train.dropout;
  m.max_len = std::min(train.max_len, static_cast<std::size_t>(encoder.max_positions));
  return m;
}

double lr_schedule(int epoch, double base_lr) {
  if (epoch < 1) throw ContractError("lr_schedule: epoch index starts at 1, got " + std::to_string(epoch));
  return base_lr / static_cast<double>(epoch);
}

Tensor cross_entropy(const Tensor& probs, std::size_t gold_index) {
  constexpr double kFloor = 1e-12;
  Tensor p = index(probs, gold_index);
  if (p.item() < kFloor) {
    std::cerr << "warning: gold probability " << p.item() << " clamped to " << kFloor
              << " before log\n";
    p = clamp_min(p, kFloor);
  }
  return scale(log(p), -1.0);
}

Tensor cross_entropy(const Tensor& probs, std::span<const double> one_hot) {
  if (one_hot.size() != probs.numel())
    throw DimensionError("cross_entropy: label width " + std::to_string(one_hot.size()) +
                         " vs distribution " + shape_str(probs.shape()));
  std::size_t hot = one_hot.size();
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] == 1.0 && hot == one_hot.size()) {
      hot = i;
    } else if (one_hot[i] != 0.0) {
      throw ContractError("cross_entropy: label is not one-hot");
    }
  }
  if (hot == one_hot.size()) throw ContractError("cross_entropy: label is not one-hot");
  return cross_entropy(probs, hot);
}

void Adam::step(std::span<const NamedTensor> params, double lr) {
  for (const auto& [name, t] : params) {
    if (!t.requires_grad() || !t.has_grad()) continue;
    auto& slot = state_[name];
    const auto g = t.grad();
    if (slot.m.empty()) {
      slot.m.assign(g.size(), 0.0);
      slot.v.assign(g.size(), 0.0);
    }
    ++slot.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(slot.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(slot.t));
    auto w = const_cast<Tensor&>(t).mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g[i];
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (slot.m[i] / c1) / (std::sqrt(slot.v[i] / c2) + eps_);
    }
  }
}

WsdModel Checkpoint::model() const { return WsdModel::from_parameters(model_config(encoder, train), params); }

namespace {

struct TrainItem {
  std::size_t sentence;
  std::vector<std::size_t> instances;  // corpus instance indices, word order
  std::vector<std::size_t> gold_rank;  // parallel to instances
};

std::vector<NamedTensor> snapshot(const WsdModel& model) {
  std::vector<NamedTensor> out;
  out.reserve(model.parameters().size());
  for (const auto& [name, t] : model.parameters()) out.emplace_back(name, t.clone(false));
  return out;
}

double dev_f1(const WsdModel& model, const AnnotatedCorpus& dev, const GoldKeys& gold,
              const SenseInventory& inventory, const Vocabulary& vocab) {
  const Predictions preds = to_sense_keys(model.predict_corpus(dev, inventory, vocab));
  GoldKeys subset;
  for (const auto& inst : dev.instances) subset[inst.id] = gold.at(inst.id);
  return score(preds, subset).f1;
}

}  // namespace

TrainResult train(const TrainingData& data, const EncoderConfig& encoder, const TrainConfig& config,
                  const EpochHook& hook) {
  config.validate();
  EncoderConfig enc = encoder;
  if (enc.vocab_size == 0) enc.vocab_size = static_cast<int>(data.vocab.size());
  if (static_cast<std::size_t>(enc.vocab_size) != data.vocab.size())
    throw ValidationError("encoder vocab_size " + std::to_string(enc.vocab_size) +
                          " does not match vocabulary of " + std::to_string(data.vocab.size()));
  enc.validate();
  if (data.train.instances.empty()) throw ContractError("train: empty training corpus");
  validate_references(data.train, data.gold, data.inventory);
  const AnnotatedCorpus& dev = data.dev.instances.empty() ? data.train : data.dev;
  validate_references(dev, data.gold, data.inventory);

  std::set<LemmaKey> seen;
  for (const auto& inst : data.train.instances) seen.insert(inst.key());
  const ModelConfig mc = model_config(enc, config);
  WsdModel model = WsdModel::create(mc, data.inventory, seen, config.seed);

  std::vector<TrainItem> items;
  const auto groups = data.train.instances_by_sentence();
  for (std::size_t s = 0; s < groups.size(); ++s) {
    if (groups[s].empty()) continue;
    TrainItem item{s, groups[s], {}};
    for (auto i : groups[s]) {
      const auto& inst = data.train.instances[i];
      int best = -1;
      for (const auto& key : data.gold.at(inst.id)) {
        const int r = data.inventory.rank_of(inst.key(), key);
        if (best < 0 || r < best) best = r;
      }
      item.gold_rank.push_back(static_cast<std::size_t>(best));
    }
    items.push_back(std::move(item));
  }

  Rng rng(config.seed * 0x9E3779B97F4A7C15ULL + 7);
  Adam adam;
  const auto& params = model.parameters();
  const auto encoder_params = model.encoder_parameters();

  TrainResult result;
  double best_f1 = -1.0;
  if (hook) hook(0, model);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const bool frozen = epoch <= config.freeze_epochs;
    for (auto t : encoder_params) t.set_requires_grad(!frozen);
    const double lr = lr_schedule(epoch, config.base_lr);
    std::shuffle(items.begin(), items.end(), rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < items.size(); b += static_cast<std::size_t>(config.batch_size)) {
      for (const auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
      WsdModel::BankCache banks;
      const WsdModel::Pass pass{true, &rng, &banks};
      std::vector<Tensor> losses;
      const std::size_t end = std::min(items.size(), b + static_cast<std::size_t>(config.batch_size));
      for (std::size_t it = b; it < end; ++it) {
        const auto& item = items[it];
        const auto words = data.train.sentences[item.sentence].words();
        std::vector<std::size_t> targets;
        for (auto i : item.instances) targets.push_back(data.train.instances[i].word);
        for (const auto& win : plan_windows(words, targets, data.vocab, mc.max_len)) {
          Tensor hidden = model.encode_context(win.tokens, pass);
          for (auto t : win.targets) {
            const auto& inst = data.train.instances[item.instances[t]];
            Tensor lg = model.logits(hidden, *win.tokens.span_of(inst.word), inst.key(), data.inventory,
                                     data.vocab, pass);
            losses.push_back(cross_entropy(softmax(lg), item.gold_rank[t]));
          }
        }
      }
      Tensor loss = mean_of(losses);
      backward(loss);
      adam.step(params, lr);
      loss_sum += loss.item() * static_cast<double>(losses.size());
      loss_count += losses.size();
    }
    for (const auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();

    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(loss_count), 0.0, frozen};
    rec.dev_f1 = dev_f1(model, dev, data.gold, data.inventory, data.vocab);
    result.trace.push_back(rec);
    if (rec.dev_f1 > best_f1) {
      best_f1 = rec.dev_f1;
      result.best.params = snapshot(model);
      result.best.epoch = epoch;
      result.best.dev_f1 = rec.dev_f1;
    }
    if (hook) hook(epoch, model);
  }
  for (auto t : encoder_params) t.set_requires_grad(true);

  result.best.encoder = enc;
  result.best.train = config;
  result.best.vocab_fingerprint = data.vocab.fingerprint();
  for (auto& [name, t] : result.best.params) t.set_requires_grad(true);
  return result;
}

std::string format_trace_tsv(const std::vector<EpochRecord>& trace) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch\tlr\ttrain_loss\tdev_f1\tencoders_frozen\n";
  for (const auto& r : trace)
    os << r.epoch << '\t' << r.lr << '\t' << r.train_loss << '\t' << r.dev_f1 << '\t'
       << (r.encoders_frozen ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace wsd
