#include "wsd/encoder.hpp"

#include <cmath>

#include "wsd/error.hpp"

namespace wsd {

void EncoderConfig::validate() const {
  if (num_layers <= 0 || hidden_size <= 0 || num_heads <= 0 || ffn_size <= 0 || vocab_size <= 0 ||
      max_positions <= 0)
    throw ValidationError("encoder config sizes must all be positive");
  if (hidden_size % num_heads != 0)
    throw ValidationError("hidden_size " + std::to_string(hidden_size) +
                          " is not divisible by num_heads " + std::to_string(num_heads));
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ValidationError("encoder dropout_rate must lie in [0, 1)");
}

namespace {

template <class Fn>
void for_each_layer_param(EncoderLayerParams& l, Fn&& fn) {
  fn("attention.query.weight", l.query_weight);
  fn("attention.query.bias", l.query_bias);
  fn("attention.key.weight", l.key_weight);
  fn("attention.key.bias", l.key_bias);
  fn("attention.value.weight", l.value_weight);
  fn("attention.value.bias", l.value_bias);
  fn("attention.output.weight", l.output_weight);
  fn("attention.output.bias", l.output_bias);
  fn("attention.norm.gain", l.attention_norm_gain);
  fn("attention.norm.bias", l.attention_norm_bias);
  fn("ffn.in.weight", l.ffn_in_weight);
  fn("ffn.in.bias", l.ffn_in_bias);
  fn("ffn.out.weight", l.ffn_out_weight);
  fn("ffn.out.bias", l.ffn_out_bias);
  fn("ffn.norm.gain", l.ffn_norm_gain);
  fn("ffn.norm.bias", l.ffn_norm_bias);
}

template <class Fn>
void for_each_param(EncoderParams& p, const std::string& prefix, Fn&& fn) {
  fn(prefix + "embedding.token", p.token_embedding);
  fn(prefix + "embedding.position", p.position_embedding);
  fn(prefix + "embedding.norm.gain", p.embedding_norm_gain);
  fn(prefix + "embedding.norm.bias", p.embedding_norm_bias);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string lp = prefix + "layer" + std::to_string(i) + ".";
    for_each_layer_param(p.layers[i], [&](const char* name, Tensor& t) { fn(lp + name, t); });
  }
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul_nt(x, weight), bias);
}

Tensor maybe_dropout(const Tensor& x, double rate, bool train_mode, Rng* rng) {
  if (!train_mode || rate == 0.0) return x;
  if (!rng) throw ContractError("train-mode dropout requires an rng");
  return dropout(x, rate, *rng);
}

}  // namespace

std::vector<NamedTensor> EncoderParams::named(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  auto& self = const_cast<EncoderParams&>(*this);
  for_each_param(self, prefix, [&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

EncoderParams EncoderParams::from_named(const EncoderConfig& config, const std::string& prefix,
                                        const std::function<Tensor(const std::string&)>& lookup) {
  EncoderParams p;
  p.layers.resize(static_cast<std::size_t>(config.num_layers));
  for_each_param(p, prefix, [&](const std::string& name, Tensor& t) { t = lookup(name); });
  return p;
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  const auto H = static_cast<std::size_t>(config.hidden_size);
  const auto F = static_cast<std::size_t>(config.ffn_size);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto weight = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = normal(rng);
    return Tensor::matrix(r, c, std::move(v), true);
  };
  auto zeros = [](std::size_t n) { return Tensor::zeros({n}, true); };
  auto ones = [](std::size_t n) { return Tensor::full({n}, 1.0, true); };

  EncoderParams p;
  p.token_embedding = weight(static_cast<std::size_t>(config.vocab_size), H);
  p.position_embedding = weight(static_cast<std::size_t>(config.max_positions), H);
  p.embedding_norm_gain = ones(H);
  p.embedding_norm_bias = zeros(H);
  for (int i = 0; i < config.num_layers; ++i) {
    EncoderLayerParams l;
    l.query_weight = weight(H, H);
    l.query_bias = zeros(H);
    l.key_weight = weight(H, H);
    l.key_bias = zeros(H);
    l.value_weight = weight(H, H);
    l.value_bias = zeros(H);
    l.output_weight = weight(H, H);
    l.output_bias = zeros(H);
    l.attention_norm_gain = ones(H);
    l.attention_norm_bias = zeros(H);
    l.ffn_in_weight = weight(F, H);
    l.ffn_in_bias = zeros(F);
    l.ffn_out_weight = weight(H, F);
    l.ffn_out_bias = zeros(H);
    l.ffn_norm_gain = ones(H);
    l.ffn_norm_bias = zeros(H);
    p.layers.push_back(std::move(l));
  }
  return p;
}

Tensor encode(std::span<const int> piece_ids, const EncoderParams& params,
              const EncoderConfig& config, bool train_mode, Rng* rng, EncoderTrace* trace,
              int pad_id) {
  const std::size_t len = piece_ids.size();
  if (len == 0) throw ContractError("encode: empty piece sequence");
  if (len > static_cast<std::size_t>(config.max_positions))
    throw ContractError("encode: sequence length " + std::to_string(len) + " exceeds max_positions " +
                        std::to_string(config.max_positions));
  for (int id : piece_ids)
    if (id < 0 || id >= config.vocab_size)
      throw ContractError("encode: piece id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(config.vocab_size) + ")");

  const auto H = static_cast<std::size_t>(config.hidden_size);
  const auto heads = static_cast<std::size_t>(config.num_heads);
  const std::size_t head_dim = H / heads;
  const double rate = config.dropout_rate;

  std::vector<int> positions(len);
  for (std::size_t t = 0; t < len; ++t) positions[t] = static_cast<int>(t);
  Tensor x = add(embedding(params.token_embedding, piece_ids),
                 embedding(params.position_embedding, positions));
  x = layer_norm(x, params.embedding_norm_gain, params.embedding_norm_bias);
  x = maybe_dropout(x, rate, train_mode, rng);

  Tensor key_mask;
  if (pad_id >= 0) {
    std::vector<double> mask(len * len, 0.0);
    bool any = false;
    for (std::size_t k = 0; k < len; ++k)
      if (piece_ids[k] == pad_id) {
        any = true;
        for (std::size_t q = 0; q < len; ++q) mask[q * len + k] = -1e9;
      }
    if (any) key_mask = Tensor::matrix(len, len, std::move(mask));
  }

  if (trace) trace->attention.clear();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (const auto& layer : params.layers) {
    Tensor q = linear(x, layer.query_weight, layer.query_bias);
    Tensor k = linear(x, layer.key_weight, layer.key_bias);
    Tensor v = linear(x, layer.value_weight, layer.value_bias);
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    if (trace) trace->attention.emplace_back();
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor qh = slice_cols(q, h * head_dim, head_dim);
      Tensor kh = slice_cols(k, h * head_dim, head_dim);
      Tensor vh = slice_cols(v, h * head_dim, head_dim);
      Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt_d);
      if (key_mask.defined()) scores = add(scores, key_mask);
      Tensor weights = softmax_rows(scores);
      if (trace) trace->attention.back().push_back(weights);
      weights = maybe_dropout(weights, rate, train_mode, rng);
      head_out.push_back(matmul(weights, vh));
    }
    Tensor attended = linear(concat(head_out, 1), layer.output_weight, layer.output_bias);
    attended = maybe_dropout(attended, rate, train_mode, rng);
    x = layer_norm(add(x, attended), layer.attention_norm_gain, layer.attention_norm_bias);

    Tensor ffn = gelu(linear(x, layer.ffn_in_weight, layer.ffn_in_bias));
    ffn = maybe_dropout(linear(ffn, layer.ffn_out_weight, layer.ffn_out_bias), rate, train_mode, rng);
    x = layer_norm(add(x, ffn), layer.ffn_norm_gain, layer.ffn_norm_bias);
  }
  return x;
}

}  // namespace wsd
