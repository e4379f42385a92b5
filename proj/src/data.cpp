#include "wsd/data.hpp"

#include <expat.h>

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "wsd/error.hpp"

namespace wsd {

std::string_view to_string(Pos pos) {
  switch (pos) {
    case Pos::Noun: return "NOUN";
    case Pos::Verb: return "VERB";
    case Pos::Adj: return "ADJ";
    case Pos::Adv: return "ADV";
  }
  return "?";
}

Pos parse_pos(std::string_view text) {
  if (text == "NOUN") return Pos::Noun;
  if (text == "VERB") return Pos::Verb;
  if (text == "ADJ") return Pos::Adj;
  if (text == "ADV") return Pos::Adv;
  throw ParseError("unknown part of speech '" + std::string(text) + "'");
}

std::string to_string(const LemmaKey& key) { return key.lemma + "/" + std::string(to_string(key.pos)); }

std::vector<std::string> Sentence::words() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::vector<std::vector<std::size_t>> AnnotatedCorpus::instances_by_sentence() const {
  std::vector<std::vector<std::size_t>> out(sentences.size());
  for (std::size_t i = 0; i < instances.size(); ++i) out[instances[i].sentence].push_back(i);
  for (auto& v : out)
    std::sort(v.begin(), v.end(), [&](auto a, auto b) { return instances[a].word < instances[b].word; });
  return out;
}

std::vector<std::string> AnnotatedCorpus::datasets() const {
  std::vector<std::string> out;
  for (const auto& inst : instances)
    if (std::find(out.begin(), out.end(), inst.dataset) == out.end()) out.push_back(inst.dataset);
  return out;
}

std::string dataset_of(std::string_view text_id) {
  return std::string(text_id.substr(0, text_id.find('.')));
}

// --- corpus XML ---------------------------------------------------------------

namespace {

enum class Level { Document, Corpus, Text, Sentence, Token };

struct CorpusParser {
  XML_Parser parser = nullptr;
  AnnotatedCorpus corpus;
  Level level = Level::Document;
  std::string text_id;
  Token token;
  std::unordered_set<std::string> ids;
  std::string error;
  std::size_t error_line = 0;

  std::size_t line() const { return static_cast<std::size_t>(XML_GetCurrentLineNumber(parser)); }

  void fail(std::string message) {
    if (error.empty()) {
      error = std::move(message);
      error_line = line();
    }
    XML_StopParser(parser, XML_FALSE);
  }

  static const char* attr(const XML_Char** atts, const char* name) {
    for (std::size_t i = 0; atts[i]; i += 2)
      if (std::string_view(atts[i]) == name) return atts[i + 1];
    return nullptr;
  }

  void start(std::string_view name, const XML_Char** atts) {
    auto required = [&](const char* key) -> std::string {
      const char* v = attr(atts, key);
      if (!v || !*v) {
        fail("<" + std::string(name) + "> lacks required attribute '" + key + "'");
        return {};
      }
      return v;
    };
    switch (level) {
      case Level::Document:
        if (name != "corpus") return fail("root element must be <corpus>, got <" + std::string(name) + ">");
        level = Level::Corpus;
        return;
      case Level::Corpus:
        if (name != "text") return fail("expected <text>, got <" + std::string(name) + ">");
        text_id = required("id");
        level = Level::Text;
        return;
      case Level::Text:
        if (name != "sentence") return fail("expected <sentence>, got <" + std::string(name) + ">");
        corpus.sentences.push_back({required("id"), text_id, {}});
        level = Level::Sentence;
        return;
      case Level::Sentence: {
        token = Token{};
        if (name == "wf") {
          if (const char* v = attr(atts, "lemma")) token.lemma = v;
          if (const char* v = attr(atts, "pos")) token.pos = v;
        } else if (name == "instance") {
          token.instance_id = required("id");
          token.lemma = required("lemma");
          token.pos = required("pos");
          if (!error.empty()) return;
          if (!ids.insert(token.instance_id).second)
            return fail("duplicate instance id '" + token.instance_id + "'");
          Pos pos;
          try {
            pos = parse_pos(token.pos);
          } catch (const ParseError& e) {
            return fail(e.what());
          }
          corpus.instances.push_back({token.instance_id, token.lemma, pos, corpus.sentences.size() - 1,
                                      corpus.sentences.back().tokens.size(), dataset_of(text_id)});
        } else {
          return fail("expected <wf> or <instance>, got <" + std::string(name) + ">");
        }
        level = Level::Token;
        return;
      }
      case Level::Token:
        return fail("<" + std::string(name) + "> may not appear inside a word element");
    }
  }

  void end(std::string_view) {
    switch (level) {
      case Level::Token: {
        auto& s = token.surface;
        const auto b = s.find_first_not_of(" \t\r\n");
        const auto e = s.find_last_not_of(" \t\r\n");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        if (s.empty()) return fail("word element with empty surface form");
        corpus.sentences.back().tokens.push_back(std::move(token));
        level = Level::Sentence;
        return;
      }
      case Level::Sentence:
        if (corpus.sentences.back().tokens.empty())
          return fail("sentence '" + corpus.sentences.back().id + "' has no words");
        level = Level::Text;
        return;
      case Level::Text: level = Level::Corpus; return;
      case Level::Corpus: level = Level::Document; return;
      case Level::Document: return;
    }
  }

  void chars(std::string_view data) {
    if (level == Level::Token) {
      token.surface.append(data);
      return;
    }
    if (data.find_first_not_of(" \t\r\n") != std::string_view::npos)
      fail("unexpected text outside a word element");
  }
};

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

}  // namespace

AnnotatedCorpus parse_corpus(std::string_view xml) {
  CorpusParser state;
  state.parser = XML_ParserCreate("UTF-8");
  XML_SetUserData(state.parser, &state);
  XML_SetElementHandler(
      state.parser,
      [](void* ud, const XML_Char* name, const XML_Char** atts) {
        static_cast<CorpusParser*>(ud)->start(name, atts);
      },
      [](void* ud, const XML_Char* name) { static_cast<CorpusParser*>(ud)->end(name); });
  XML_SetCharacterDataHandler(state.parser, [](void* ud, const XML_Char* s, int len) {
    static_cast<CorpusParser*>(ud)->chars(std::string_view(s, static_cast<std::size_t>(len)));
  });
  const auto status = XML_Parse(state.parser, xml.data(), static_cast<int>(xml.size()), XML_TRUE);
  std::string message;
  std::size_t line = 0;
  if (!state.error.empty()) {
    message = state.error;
    line = state.error_line;
  } else if (status != XML_STATUS_OK) {
    message = std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(state.parser));
    line = state.line();
  } else if (state.level != Level::Document) {
    message = "unterminated document";
    line = state.line();
  }
  XML_ParserFree(state.parser);
  if (!message.empty()) throw ParseError(message, line);
  return std::move(state.corpus);
}

std::string serialize_corpus(const AnnotatedCorpus& corpus) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<corpus>\n";
  std::string open_text;
  bool in_text = false;
  for (const auto& s : corpus.sentences) {
    if (!in_text || s.text_id != open_text) {
      if (in_text) os << "</text>\n";
      os << "<text id=\"" << xml_escape(s.text_id) << "\">\n";
      open_text = s.text_id;
      in_text = true;
    }
    os << "<sentence id=\"" << xml_escape(s.id) << "\">\n";
    for (const auto& t : s.tokens) {
      if (t.is_instance()) {
        os << "<instance id=\"" << xml_escape(t.instance_id) << "\" lemma=\"" << xml_escape(t.lemma)
           << "\" pos=\"" << xml_escape(t.pos) << "\">" << xml_escape(t.surface) << "</instance>\n";
      } else {
        os << "<wf";
        if (!t.lemma.empty()) os << " lemma=\"" << xml_escape(t.lemma) << "\"";
        if (!t.pos.empty()) os << " pos=\"" << xml_escape(t.pos) << "\"";
        os << ">" << xml_escape(t.surface) << "</wf>\n";
      }
    }
    os << "</sentence>\n";
  }
  if (in_text) os << "</text>\n";
  os << "</corpus>\n";
  return os.str();
}

// --- gold keys -------------------------------------------------------------------

GoldKeys parse_gold(std::string_view text) {
  GoldKeys gold;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::istringstream is{std::string(lines[n])};
    std::string id;
    if (!(is >> id) || id.front() == '#') continue;
    std::set<std::string> keys;
    for (std::string key; is >> key;) keys.insert(key);
    if (keys.empty()) throw ParseError("gold line for '" + id + "' has no sense keys", n + 1);
    if (!gold.emplace(id, std::move(keys)).second)
      throw ParseError("duplicate gold line for '" + id + "'", n + 1);
  }
  return gold;
}

std::string serialize_gold(const GoldKeys& gold) {
  std::string out;
  for (const auto& [id, keys] : gold) {
    out += id;
    for (const auto& k : keys) out += ' ' + k;
    out += '\n';
  }
  return out;
}

// --- inventory -------------------------------------------------------------------

SenseInventory::SenseInventory(Entries entries) : entries_(std::move(entries)) {
  for (const auto& [key, senses] : entries_) {
    if (senses.empty()) throw ValidationError("inventory entry " + to_string(key) + " has no senses");
    std::set<std::string> seen;
    for (const auto& s : senses) {
      if (s.gloss.find_first_not_of(" \t") == std::string::npos)
        throw ValidationError("empty gloss for sense '" + s.key + "' of " + to_string(key));
      if (!seen.insert(s.key).second)
        throw ValidationError("duplicate sense key '" + s.key + "' in " + to_string(key));
    }
  }
}

const std::vector<Sense>* SenseInventory::find(const LemmaKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const std::vector<Sense>& SenseInventory::at(const LemmaKey& key) const {
  if (const auto* s = find(key)) return *s;
  throw UnknownLemma("lemma " + to_string(key) + " is not in the sense inventory");
}

int SenseInventory::rank_of(const LemmaKey& key, std::string_view sense_key) const {
  const auto* senses = find(key);
  if (!senses) return -1;
  for (std::size_t i = 0; i < senses->size(); ++i)
    if ((*senses)[i].key == sense_key) return static_cast<int>(i);
  return -1;
}

std::vector<LemmaKey> SenseInventory::keys_for_lemma(std::string_view lemma) const {
  std::vector<LemmaKey> out;
  for (Pos p : kAllPos)
    if (entries_.count({std::string(lemma), p})) out.push_back({std::string(lemma), p});
  return out;
}

SenseInventory load_inventory(std::string_view tsv) {
  SenseInventory::Entries entries;
  const auto lines = split_lines(tsv);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = lines[n];
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      auto tab = line.find('\t', pos);
      cols.emplace_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
      if (tab == std::string_view::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 4)
      throw ParseError("inventory row needs 4 tab-separated columns, got " + std::to_string(cols.size()),
                       n + 1);
    if (cols[0].empty() || cols[2].empty()) throw ParseError("inventory row with empty lemma or key", n + 1);
    Pos p;
    try {
      p = parse_pos(cols[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), n + 1);
    }
    entries[{cols[0], p}].push_back({cols[2], cols[3]});
  }
  return SenseInventory(std::move(entries));
}

std::string serialize_inventory(const SenseInventory& inventory) {
  std::string out;
  for (const auto& [key, senses] : inventory.entries())
    for (const auto& s : senses)
      out += key.lemma + '\t' + std::string(to_string(key.pos)) + '\t' + s.key + '\t' + s.gloss + '\n';
  return out;
}

void validate_references(const AnnotatedCorpus& corpus, const GoldKeys& gold,
                         const SenseInventory& inventory) {
  for (const auto& inst : corpus.instances) {
    const auto* senses = inventory.find(inst.key());
    if (!senses)
      throw ValidationError("instance '" + inst.id + "' lemma " + to_string(inst.key()) +
                            " has no inventory entry");
    auto g = gold.find(inst.id);
    if (g == gold.end()) throw ValidationError("instance '" + inst.id + "' has no gold keys");
    for (const auto& k : g->second)
      if (inventory.rank_of(inst.key(), k) < 0)
        throw ValidationError("gold key '" + k + "' of instance '" + inst.id + "' is not a sense of " +
                              to_string(inst.key()));
  }
}

CorpusStats corpus_stats(const AnnotatedCorpus& corpus, const SenseInventory& inventory) {
  CorpusStats st;
  st.sentences = corpus.sentences.size();
  for (const auto& s : corpus.sentences) st.tokens += s.tokens.size();
  st.annotations = corpus.instances.size();
  double senses = 0.0;
  for (const auto& inst : corpus.instances) senses += static_cast<double>(inventory.at(inst.key()).size());
  st.ambiguity = st.annotations ? senses / static_cast<double>(st.annotations) : 0.0;
  return st;
}

std::map<LemmaKey, std::size_t> lemma_counts(const AnnotatedCorpus& corpus) {
  std::map<LemmaKey, std::size_t> counts;
  for (const auto& inst : corpus.instances) ++counts[inst.key()];
  return counts;
}

}  // namespace wsd
