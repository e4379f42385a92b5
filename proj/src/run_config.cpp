#include "wsd/run_config.hpp"

#include <charconv>

#include "wsd/error.hpp"

namespace wsd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ParseError("config key '" + key + "' expects a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ParseError("config key '" + key + "' expects true or false, got '" + value + "'");
}

}  // namespace

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> k = {
      {"num_layers", "2", "transformer layers"},
      {"hidden_size", "32", "hidden width H"},
      {"num_heads", "4", "attention heads (must divide H)"},
      {"ffn_size", "64", "feed-forward width"},
      {"max_positions", "64", "position embeddings"},
      {"encoder_dropout", "0.1", "dropout inside the encoders"},
      {"epochs", "50", "training epochs"},
      {"base_lr", "0.001", "learning rate of epoch 1; epoch i uses base_lr / i"},
      {"freeze_epochs", "10", "epochs with encoder parameters held fixed"},
      {"dropout", "0.5", "classifier dropout"},
      {"batch_size", "8", "sentences per batch"},
      {"seed", "13", "run seed"},
      {"variant", "bert_def", "bert (per-lemma heads) or bert_def (definition head)"},
      {"merge", "mean", "span pooling: mean or max"},
      {"concat_sentence_vector", "false", "append the [CLS] state to the span feature"},
      {"share_encoders", "false", "reuse the context encoder for definitions"},
      {"max_len", "64", "maximum pieces per encoder input"},
      {"train_corpus", "", "training corpus XML"},
      {"train_gold", "", "training gold keys"},
      {"dev_corpus", "", "validation corpus XML"},
      {"dev_gold", "", "validation gold keys"},
      {"test_corpus", "", "evaluation corpus XML"},
      {"test_gold", "", "evaluation gold keys"},
      {"inventory", "", "sense inventory TSV"},
      {"vocab", "", "word-piece vocabulary"},
  };
  return k;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParseError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::merge_text(std::string_view text) {
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("config line without '='", line_no);
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (!values_.count(key)) throw ParseError("unknown config key '" + key + "'", line_no);
      values_[key] = value;
    }
    if (nl == text.size()) break;
  }
}

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig c;
  c.num_layers = parse_number<int>("num_layers", get("num_layers"));
  c.hidden_size = parse_number<int>("hidden_size", get("hidden_size"));
  c.num_heads = parse_number<int>("num_heads", get("num_heads"));
  c.ffn_size = parse_number<int>("ffn_size", get("ffn_size"));
  c.max_positions = parse_number<int>("max_positions", get("max_positions"));
  c.dropout_rate = parse_number<double>("encoder_dropout", get("encoder_dropout"));
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.epochs = parse_number<int>("epochs", get("epochs"));
  c.base_lr = parse_number<double>("base_lr", get("base_lr"));
  c.freeze_epochs = parse_number<int>("freeze_epochs", get("freeze_epochs"));
  c.dropout = parse_number<double>("dropout", get("dropout"));
  c.batch_size = parse_number<int>("batch_size", get("batch_size"));
  c.seed = parse_number<std::uint64_t>("seed", get("seed"));
  c.variant = parse_variant(get("variant"));
  c.pooling.merge = parse_merge(get("merge"));
  c.pooling.concat_sentence_vector = parse_bool("concat_sentence_vector", get("concat_sentence_vector"));
  c.share_encoders = parse_bool("share_encoders", get("share_encoders"));
  c.max_len = parse_number<std::size_t>("max_len", get("max_len"));
  return c;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

}  // namespace wsd
