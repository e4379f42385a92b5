#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <map>

#include "wsd/error.hpp"
#include "wsd/io.hpp"
#include "wsd/training.hpp"

namespace wsd {

namespace {

constexpr char kMagic[8] = {'W', 'S', 'D', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::map<std::string, std::string> config_map(const Checkpoint& c) {
  std::map<std::string, std::string> kv;
  kv["encoder.num_layers"] = std::to_string(c.encoder.num_layers);
  kv["encoder.hidden_size"] = std::to_string(c.encoder.hidden_size);
  kv["encoder.num_heads"] = std::to_string(c.encoder.num_heads);
  kv["encoder.ffn_size"] = std::to_string(c.encoder.ffn_size);
  kv["encoder.vocab_size"] = std::to_string(c.encoder.vocab_size);
  kv["encoder.max_positions"] = std::to_string(c.encoder.max_positions);
  kv["encoder.dropout_rate"] = fmt_double(c.encoder.dropout_rate);
  kv["train.epochs"] = std::to_string(c.train.epochs);
  kv["train.base_lr"] = fmt_double(c.train.base_lr);
  kv["train.freeze_epochs"] = std::to_string(c.train.freeze_epochs);
  kv["train.dropout"] = fmt_double(c.train.dropout);
  kv["train.batch_size"] = std::to_string(c.train.batch_size);
  kv["train.seed"] = std::to_string(c.train.seed);
  kv["train.variant"] = std::string(to_string(c.train.variant));
  kv["train.merge"] = std::string(to_string(c.train.pooling.merge));
  kv["train.concat_sentence_vector"] = c.train.pooling.concat_sentence_vector ? "true" : "false";
  kv["train.share_encoders"] = c.train.share_encoders ? "true" : "false";
  kv["train.max_len"] = std::to_string(c.train.max_len);
  kv["vocab.fingerprint"] = std::to_string(c.vocab_fingerprint);
  kv["checkpoint.epoch"] = std::to_string(c.epoch);
  kv["checkpoint.dev_f1"] = fmt_double(c.dev_f1);
  return kv;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IntegrityError("checkpoint is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t u(int width) {
    auto s = take(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <class Int>
Int to_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IntegrityError("checkpoint config lacks '" + key + "'");
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<Int>(v);
  } catch (const std::exception&) {
    throw IntegrityError("checkpoint config '" + key + "' is not an integer");
  }
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IntegrityError("checkpoint config lacks '" + key + "'");
  return std::strtod(it->second.c_str(), nullptr);
}

bool to_bool(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end() || (it->second != "true" && it->second != "false"))
    throw IntegrityError("checkpoint config '" + key + "' is not a boolean");
  return it->second == "true";
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  std::string config;
  for (const auto& [k, v] : config_map(ckpt)) config += k + "=" + v + "\n";
  put_u64(out, config.size());
  out += config;
  put_u64(out, ckpt.params.size());
  for (const auto& [name, t] : ckpt.params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.shape()) put_u64(out, d);
    for (double v : t.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u64(out, bits);
    }
  }
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()))));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IntegrityError("not a checkpoint file (bad magic or truncated)");
  const auto body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  const auto stored = static_cast<std::uint32_t>(tail.u(4));
  const auto actual = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));

  Reader r(body);
  r.take(sizeof kMagic);
  const auto version = r.u(4);
  if (version != kVersion)
    throw IntegrityError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kVersion) + ")");
  if (stored != actual) throw IntegrityError("checkpoint checksum mismatch (file corrupted or truncated)");

  std::map<std::string, std::string> kv;
  const std::string config(r.take(r.u(8)));
  std::size_t pos = 0;
  while (pos < config.size()) {
    auto nl = config.find('\n', pos);
    if (nl == std::string::npos) throw IntegrityError("checkpoint config is not newline terminated");
    const auto line = config.substr(pos, nl - pos);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("checkpoint config line without '='");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
    pos = nl + 1;
  }

  Checkpoint c;
  c.encoder.num_layers = to_int<int>(kv, "encoder.num_layers");
  c.encoder.hidden_size = to_int<int>(kv, "encoder.hidden_size");
  c.encoder.num_heads = to_int<int>(kv, "encoder.num_heads");
  c.encoder.ffn_size = to_int<int>(kv, "encoder.ffn_size");
  c.encoder.vocab_size = to_int<int>(kv, "encoder.vocab_size");
  c.encoder.max_positions = to_int<int>(kv, "encoder.max_positions");
  c.encoder.dropout_rate = to_double(kv, "encoder.dropout_rate");
  c.train.epochs = to_int<int>(kv, "train.epochs");
  c.train.base_lr = to_double(kv, "train.base_lr");
  c.train.freeze_epochs = to_int<int>(kv, "train.freeze_epochs");
  c.train.dropout = to_double(kv, "train.dropout");
  c.train.batch_size = to_int<int>(kv, "train.batch_size");
  c.train.seed = to_int<std::uint64_t>(kv, "train.seed");
  try {
    c.train.variant = parse_variant(kv["train.variant"]);
    c.train.pooling.merge = parse_merge(kv["train.merge"]);
  } catch (const ParseError& e) {
    throw IntegrityError(std::string("checkpoint config: ") + e.what());
  }
  c.train.pooling.concat_sentence_vector = to_bool(kv, "train.concat_sentence_vector");
  c.train.share_encoders = to_bool(kv, "train.share_encoders");
  c.train.max_len = to_int<std::size_t>(kv, "train.max_len");
  c.vocab_fingerprint = to_int<std::uint32_t>(kv, "vocab.fingerprint");
  c.epoch = to_int<int>(kv, "checkpoint.epoch");
  c.dev_f1 = to_double(kv, "checkpoint.dev_f1");

  const auto count = r.u(8);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(r.take(r.u(4)));
    const auto dims = r.u(4);
    if (dims == 0 || dims > 8) throw IntegrityError("parameter '" + name + "' has invalid rank");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint64_t d = 0; d < dims; ++d) {
      shape.push_back(r.u(8));
      if (shape.back() == 0) throw IntegrityError("parameter '" + name + "' has a zero dimension");
      n *= shape.back();
    }
    if (n > r.remaining() / 8) throw IntegrityError("checkpoint is truncated");
    std::vector<double> values(n);
    for (auto& v : values) {
      const std::uint64_t bits = r.u(8);
      std::memcpy(&v, &bits, sizeof v);
    }
    c.params.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }
  if (r.remaining() != 0) throw IntegrityError("trailing bytes after checkpoint records");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace wsd
