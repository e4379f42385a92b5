#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wsd {

// Fixed word-piece vocabulary. Line number in the vocabulary file is the id.
class Vocabulary {
 public:
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kPad = "[PAD]";

  explicit Vocabulary(std::vector<std::string> pieces);

  // Parses the one-piece-per-line text format.
  static Vocabulary parse(std::string_view text);
  std::string serialize() const;

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view piece) const;
  int id(std::string_view piece) const;  // throws ContractError when absent
  int id_or_unk(std::string_view piece) const;

  int cls() const { return cls_; }
  int sep() const { return sep_; }
  int unk() const { return unk_; }
  int pad() const { return pad_; }

  // crc32 over the serialized form; ties checkpoints to the vocabulary.
  std::uint32_t fingerprint() const;

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  int cls_ = -1, sep_ = -1, unk_ = -1, pad_ = -1;
};

struct PieceSpan {
  std::size_t start = 0;   // position in piece_ids
  std::size_t length = 0;  // k >= 1
  bool operator==(const PieceSpan&) const = default;
};

struct TokenizedSentence {
  std::vector<std::string> words;  // lowercased, possibly a window of the input
  std::vector<int> piece_ids;      // [CLS] ... [SEP]
  std::vector<PieceSpan> spans;    // one per entry of `words`
  std::size_t first_word = 0;      // index of words[0] in the untruncated input

  // Span of an original word index, or nullptr when it fell outside the window.
  const PieceSpan* span_of(std::size_t original_word) const;
};

std::string lowercase(std::string_view word);

// Greedy longest-match-first segmentation. Any unmatched fragment turns the
// whole word into [UNK].
std::vector<std::string> tokenize_word(std::string_view word, const Vocabulary& vocab);

// Packs [CLS] + pieces + [SEP]. Inputs longer than max_len keep a window of
// whole words centered on `anchor_word`.
TokenizedSentence tokenize_sentence(const std::vector<std::string>& words, const Vocabulary& vocab,
                                    std::size_t max_len, std::size_t anchor_word = 0);

}  // namespace wsd
