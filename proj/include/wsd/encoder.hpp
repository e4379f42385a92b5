#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsd/tensor.hpp"

namespace wsd {

struct EncoderConfig {
  int num_layers = 2;
  int hidden_size = 32;
  int num_heads = 4;
  int ffn_size = 64;
  int vocab_size = 0;
  int max_positions = 64;
  double dropout_rate = 0.1;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

using NamedTensor = std::pair<std::string, Tensor>;

struct EncoderLayerParams {
  Tensor query_weight, query_bias;
  Tensor key_weight, key_bias;
  Tensor value_weight, value_bias;
  Tensor output_weight, output_bias;
  Tensor attention_norm_gain, attention_norm_bias;
  Tensor ffn_in_weight, ffn_in_bias;
  Tensor ffn_out_weight, ffn_out_bias;
  Tensor ffn_norm_gain, ffn_norm_bias;
};

struct EncoderParams {
  Tensor token_embedding;     // [vocab_size x H]
  Tensor position_embedding;  // [max_positions x H]
  Tensor embedding_norm_gain, embedding_norm_bias;
  std::vector<EncoderLayerParams> layers;

  // Stable enumeration of every parameter under `prefix`; the order matches
  // the initializer's draw order.
  std::vector<NamedTensor> named(const std::string& prefix = "") const;

  // Rebuilds the struct from names produced by named(prefix).
  static EncoderParams from_named(const EncoderConfig& config, const std::string& prefix,
                                  const std::function<Tensor(const std::string&)>& lookup);
};

// Weights ~ N(0, 0.02^2), biases 0, norm gains 1.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Optional capture of per-layer, per-head attention matrices [len x len].
struct EncoderTrace {
  std::vector<std::vector<Tensor>> attention;
};

// Post-norm transformer encoder: one H-wide hidden state per piece, row 0 is
// the [CLS] state. Keys at [PAD] positions are masked out when pad_id >= 0.
Tensor encode(std::span<const int> piece_ids, const EncoderParams& params,
              const EncoderConfig& config, bool train_mode, Rng* rng = nullptr,
              EncoderTrace* trace = nullptr, int pad_id = -1);

}  // namespace wsd
