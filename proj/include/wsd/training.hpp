#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wsd/data.hpp"
#include "wsd/encoder.hpp"
#include "wsd/model.hpp"
#include "wsd/tokenizer.hpp"

namespace wsd {

struct TrainConfig {
  int epochs = 50;
  double base_lr = 0.001;
  int freeze_epochs = 10;
  double dropout = 0.5;  // classifier dropout
  int batch_size = 8;    // sentences per batch
  std::uint64_t seed = 13;
  Variant variant = Variant::BertDef;
  PoolingSpec pooling;
  bool share_encoders = false;
  std::size_t max_len = 64;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

ModelConfig model_config(const EncoderConfig& encoder, const TrainConfig& train);

// base_lr / epoch, epoch counted from 1.
double lr_schedule(int epoch, double base_lr = 0.001);

// -log p[gold], with p[gold] clamped at 1e-12.
Tensor cross_entropy(const Tensor& probs, std::size_t gold_index);
Tensor cross_entropy(const Tensor& probs, std::span<const double> one_hot);

// Adam with one state slot per named parameter. Parameters without a
// gradient are skipped and get no state.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<const NamedTensor> params, double lr);
  bool has_state(const std::string& name) const { return state_.count(name) > 0; }
  std::size_t state_count() const { return state_.size(); }

 private:
  struct Slot {
    std::vector<double> m, v;
    long t = 0;
  };
  double beta1_, beta2_, eps_;
  std::map<std::string, Slot> state_;
};

struct Checkpoint {
  EncoderConfig encoder;
  TrainConfig train;
  std::uint32_t vocab_fingerprint = 0;
  int epoch = 0;
  double dev_f1 = 0.0;
  std::vector<NamedTensor> params;

  WsdModel model() const;
};

// Binary container: magic, version, canonical key=value config text, then
// (name, shape, little-endian float64 values) records and a trailing crc32.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);  // throws IntegrityError
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainingData {
  const AnnotatedCorpus& train;
  const AnnotatedCorpus& dev;  // empty -> validate on train
  const GoldKeys& gold;
  const SenseInventory& inventory;
  const Vocabulary& vocab;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  bool encoders_frozen = false;
};

struct TrainResult {
  Checkpoint best;                  // argmax dev F1, earliest on ties
  std::vector<EpochRecord> trace;   // one row per epoch
};

// Invoked with epoch 0 before the first update and after every epoch.
using EpochHook = std::function<void(int epoch, const WsdModel& model)>;

TrainResult train(const TrainingData& data, const EncoderConfig& encoder, const TrainConfig& config,
                  const EpochHook& hook = {});

std::string format_trace_tsv(const std::vector<EpochRecord>& trace);

}  // namespace wsd
