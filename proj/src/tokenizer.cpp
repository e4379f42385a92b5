#include "wsd/tokenizer.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <set>

#include "wsd/error.hpp"

namespace wsd {

Vocabulary::Vocabulary(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) throw ValidationError("vocabulary piece " + std::to_string(i) + " is empty");
    if (!index_.emplace(pieces_[i], static_cast<int>(i)).second)
      throw ValidationError("duplicate vocabulary piece '" + pieces_[i] + "'");
  }
  auto special = [&](std::string_view s) {
    auto it = index_.find(std::string(s));
    if (it == index_.end()) throw ValidationError("vocabulary lacks special piece " + std::string(s));
    return it->second;
  };
  cls_ = special(kCls);
  sep_ = special(kSep);
  unk_ = special(kUnk);
  pad_ = special(kPad);
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> pieces;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError("empty vocabulary line", pieces.size() + 1);
    pieces.push_back(std::move(line));
    pos = end + 1;
  }
  return Vocabulary(std::move(pieces));
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& p : pieces_) out += p + '\n';
  return out;
}

bool Vocabulary::contains(std::string_view piece) const { return index_.count(std::string(piece)) > 0; }

int Vocabulary::id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) throw ContractError("piece '" + std::string(piece) + "' not in vocabulary");
  return it->second;
}

int Vocabulary::id_or_unk(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? unk_ : it->second;
}

std::uint32_t Vocabulary::fingerprint() const {
  const std::string s = serialize();
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

const PieceSpan* TokenizedSentence::span_of(std::size_t original_word) const {
  if (original_word < first_word || original_word - first_word >= spans.size()) return nullptr;
  return &spans[original_word - first_word];
}

std::string lowercase(std::string_view word) {
  std::string out(word);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> tokenize_word(std::string_view word, const Vocabulary& vocab) {
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::string match;
    while (end > start) {
      std::string candidate(word.substr(start, end - start));
      if (start > 0) candidate = "##" + candidate;
      if (vocab.contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) return {std::string(Vocabulary::kUnk)};
    pieces.push_back(std::move(match));
    start = end;
  }
  if (pieces.empty()) return {std::string(Vocabulary::kUnk)};
  return pieces;
}

TokenizedSentence tokenize_sentence(const std::vector<std::string>& words, const Vocabulary& vocab,
                                    std::size_t max_len, std::size_t anchor_word) {
  if (words.empty()) throw ContractError("tokenize_sentence: empty word list");
  if (max_len < 3) throw ContractError("tokenize_sentence: max_len must be at least 3");
  if (anchor_word >= words.size()) throw ContractError("tokenize_sentence: anchor word out of range");

  std::vector<std::string> lowered;
  std::vector<std::vector<int>> ids;
  lowered.reserve(words.size());
  for (const auto& w : words) {
    lowered.push_back(lowercase(w));
    std::vector<int> word_ids;
    for (const auto& p : tokenize_word(lowered.back(), vocab)) word_ids.push_back(vocab.id(p));
    ids.push_back(std::move(word_ids));
  }

  const std::size_t budget = max_len - 2;
  std::size_t lo = 0, hi = words.size();  // window [lo, hi)
  std::size_t total = 0;
  for (const auto& w : ids) total += w.size();
  if (total > budget) {
    // A single oversized anchor keeps only its leading pieces.
    if (ids[anchor_word].size() > budget) ids[anchor_word].resize(budget);
    lo = anchor_word;
    hi = anchor_word + 1;
    std::size_t left = 0, right = 0, used = ids[anchor_word].size();
    bool left_open = true, right_open = true;
    while (left_open || right_open) {
      const bool prefer_left = left_open && (!right_open || left <= right);
      bool grew = false;
      for (int attempt = 0; attempt < 2 && !grew; ++attempt) {
        const bool go_left = (attempt == 0) == prefer_left;
        if (go_left && left_open) {
          if (lo > 0 && used + ids[lo - 1].size() <= budget) {
            --lo;
            used += ids[lo].size();
            left += ids[lo].size();
            grew = true;
          } else {
            left_open = false;
          }
        } else if (!go_left && right_open) {
          if (hi < words.size() && used + ids[hi].size() <= budget) {
            used += ids[hi].size();
            right += ids[hi].size();
            ++hi;
            grew = true;
          } else {
            right_open = false;
          }
        }
      }
    }
  }

  TokenizedSentence out;
  out.first_word = lo;
  out.piece_ids.push_back(vocab.cls());
  for (std::size_t w = lo; w < hi; ++w) {
    out.words.push_back(lowered[w]);
    out.spans.push_back({out.piece_ids.size(), ids[w].size()});
    out.piece_ids.insert(out.piece_ids.end(), ids[w].begin(), ids[w].end());
  }
  out.piece_ids.push_back(vocab.sep());
  return out;
}

}  // namespace wsd
