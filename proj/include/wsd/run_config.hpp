#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wsd/encoder.hpp"
#include "wsd/training.hpp"

namespace wsd {

// Flat `key = value` run configuration shared by every CLI command.
// Precedence: built-in defaults < config file < command-line flags.
class RunConfig {
 public:
  struct Key {
    std::string name;
    std::string default_value;
    std::string help;
  };

  static const std::vector<Key>& keys();

  RunConfig();  // defaults

  // Merges a config file; unknown keys and malformed lines raise ParseError.
  void merge_text(std::string_view text);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has_path(const std::string& key) const { return !get(key).empty(); }

  EncoderConfig encoder_config() const;  // vocab_size left at 0
  TrainConfig train_config() const;

  // Canonical dump, one `key = value` per line in key-table order.
  std::string resolved() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace wsd
