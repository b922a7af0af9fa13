#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/error.hpp"
#include "coqan/utf8.hpp"

namespace coqan {

inline constexpr std::size_t kMaxBlocks = 256;
inline constexpr std::size_t kMaxSentences = 32;
inline constexpr std::size_t kMaxTokens = 128;

enum class BlockKind { paragraph = 0, subtitle = 1, image = 2, video = 3 };

inline std::string_view to_string(BlockKind k) {
  switch (k) {
    case BlockKind::paragraph: return "paragraph";
    case BlockKind::subtitle: return "subtitle";
    case BlockKind::image: return "image";
    case BlockKind::video: return "video";
  }
  return "paragraph";
}

inline std::optional<BlockKind> block_kind_from_string(std::string_view s) {
  if (s == "paragraph") return BlockKind::paragraph;
  if (s == "subtitle") return BlockKind::subtitle;
  if (s == "image") return BlockKind::image;
  if (s == "video") return BlockKind::video;
  return std::nullopt;
}

struct ContentBlock {
  BlockKind kind = BlockKind::paragraph;
  std::size_t ordinal = 0;
  double height_px = 0.0;
  double width_frac = 0.0;
  double top_offset_px = 0.0;
  std::string text;
  std::int64_t ocr_char_count = 0;
  double text_area_frac = 0.0;
  bool is_template_image = false;
  double aspect_ratio = 0.0;
  // Optional extension field; animated images count toward the GIF feature.
  bool is_gif = false;

  bool is_media() const {
    return kind == BlockKind::image || kind == BlockKind::video;
  }
  bool is_text() const { return !is_media(); }

  bool operator==(const ContentBlock&) const = default;
};

// One tokenized sentence: HEAD + token ids, padded with PAD to max_tokens.
// `length` is the number of unmasked (non-PAD) leading positions.
struct TokenizedSentence {
  std::vector<std::int32_t> ids;
  std::size_t length = 0;

  bool operator==(const TokenizedSentence&) const = default;
};

struct ArticleDocument {
  std::string id;
  std::string title;
  std::int64_t category = 0;
  std::vector<ContentBlock> blocks;
  std::optional<int> label;  // 1 = high quality, 0 = low quality

  // Filled by split_sentences; sentences[0] is the title.
  std::vector<std::string> sentences;
  // Filled by tokenize, parallel to sentences.
  std::vector<TokenizedSentence> tokens;

  bool operator==(const ArticleDocument&) const = default;
};

struct IngestOptions {
  std::size_t max_blocks = kMaxBlocks;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj,
                                     const std::string& key,
                                     const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + key + ": missing field");
  return *it;
}

inline double number_field(const nlohmann::json& obj, const std::string& key,
                           const std::string& where, double fallback,
                           bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ParseError(where + key + ": missing field");
    return fallback;
  }
  if (!it->is_number()) throw ParseError(where + key + ": expected number");
  return it->get<double>();
}

inline std::int64_t int_field(const nlohmann::json& obj, const std::string& key,
                              const std::string& where, std::int64_t fallback,
                              bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ParseError(where + key + ": missing field");
    return fallback;
  }
  if (it->is_number_integer()) return it->get<std::int64_t>();
  if (it->is_number_float()) {
    const double d = it->get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d)))
      return static_cast<std::int64_t>(d);
  }
  throw ParseError(where + key + ": expected integer");
}

inline std::string string_field(const nlohmann::json& obj,
                                const std::string& key,
                                const std::string& where, bool required) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ParseError(where + key + ": missing field");
    return {};
  }
  if (!it->is_string()) throw ParseError(where + key + ": expected string");
  return it->get<std::string>();
}

inline bool bool_field(const nlohmann::json& obj, const std::string& key,
                       const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_boolean()) throw ParseError(where + key + ": expected boolean");
  return it->get<bool>();
}

}  // namespace detail

// Checks every ContentBlock invariant on a block list already sorted by
// ordinal.
inline void validate_blocks(const std::vector<ContentBlock>& blocks) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string where = "blocks[" + std::to_string(i) + "].";
    if (b.ordinal != i) {
      if (i > 0 && b.ordinal == blocks[i - 1].ordinal)
        throw ValidationError("duplicate ordinal " + std::to_string(b.ordinal));
      throw ValidationError("ordinal gap: expected " + std::to_string(i) +
                            ", found " + std::to_string(b.ordinal));
    }
    if (!(b.height_px >= 0.0)) throw ValidationError(where + "height_px < 0");
    if (!(b.width_frac >= 0.0 && b.width_frac <= 1.0))
      throw ValidationError(where + "width_frac outside [0,1]");
    if (!(b.top_offset_px >= 0.0))
      throw ValidationError(where + "top_offset_px < 0");
    if (b.ocr_char_count < 0) throw ValidationError(where + "ocr_char_count < 0");
    if (!(b.text_area_frac >= 0.0 && b.text_area_frac <= 1.0))
      throw ValidationError(where + "text_area_frac outside [0,1]");
    if (!(b.aspect_ratio >= 0.0)) throw ValidationError(where + "aspect_ratio < 0");
    if (i > 0 && b.top_offset_px < blocks[i - 1].top_offset_px)
      throw ValidationError(where + "top_offset_px decreases with ordinal");
    if (b.is_text()) {
      if (b.ocr_char_count != 0 || b.text_area_frac != 0.0 ||
          b.aspect_ratio != 0.0 || b.is_template_image || b.is_gif)
        throw ValidationError(where + "media field set on a text block");
    } else if (!b.text.empty()) {
      throw ValidationError(where + "text set on a media block");
    }
  }
}

inline ArticleDocument article_from_json(const nlohmann::json& j,
                                         const IngestOptions& opts = {}) {
  if (!j.is_object()) throw ParseError("record: expected JSON object");
  ArticleDocument doc;
  doc.id = detail::string_field(j, "id", "", true);
  doc.title = detail::string_field(j, "title", "", true);
  doc.category = detail::int_field(j, "category", "", 0, true);
  if (doc.category < 0) throw ValidationError("category: negative id");
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer())
      throw ParseError("label: expected 0, 1 or null");
    const auto v = it->get<std::int64_t>();
    if (v != 0 && v != 1) throw ParseError("label: expected 0, 1 or null");
    doc.label = static_cast<int>(v);
  }
  const auto& blocks = detail::require(j, "blocks", "");
  if (!blocks.is_array()) throw ParseError("blocks: expected array");
  doc.blocks.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& bj = blocks[i];
    const std::string where = "blocks[" + std::to_string(i) + "].";
    if (!bj.is_object()) throw ParseError(where + ": expected object");
    ContentBlock b;
    const auto kind = detail::string_field(bj, "kind", where, true);
    auto k = block_kind_from_string(kind);
    if (!k) throw ParseError(where + "kind: unknown block kind '" + kind + "'");
    b.kind = *k;
    const auto ord = detail::int_field(bj, "ordinal", where, 0, true);
    if (ord < 0) throw ValidationError(where + "ordinal: negative");
    b.ordinal = static_cast<std::size_t>(ord);
    b.height_px = detail::number_field(bj, "height_px", where, 0.0, false);
    b.width_frac = detail::number_field(bj, "width_frac", where, 0.0, false);
    b.top_offset_px = detail::number_field(bj, "top_offset_px", where, 0.0, false);
    b.text = detail::string_field(bj, "text", where, false);
    b.ocr_char_count = detail::int_field(bj, "ocr_char_count", where, 0, false);
    b.text_area_frac = detail::number_field(bj, "text_area_frac", where, 0.0, false);
    b.is_template_image = detail::bool_field(bj, "is_template_image", where);
    b.aspect_ratio = detail::number_field(bj, "aspect_ratio", where, 0.0, false);
    b.is_gif = detail::bool_field(bj, "is_gif", where);
    doc.blocks.push_back(std::move(b));
  }
  std::stable_sort(doc.blocks.begin(), doc.blocks.end(),
                   [](const ContentBlock& a, const ContentBlock& b) {
                     return a.ordinal < b.ordinal;
                   });
  validate_blocks(doc.blocks);
  if (doc.blocks.size() > opts.max_blocks) doc.blocks.resize(opts.max_blocks);
  return doc;
}

// Parses one record of the line-delimited article format.
inline ArticleDocument parse_article(std::string_view raw,
                                     const IngestOptions& opts = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("record: malformed JSON: ") + e.what());
  }
  return article_from_json(j, opts);
}

inline nlohmann::json article_to_json(const ArticleDocument& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["title"] = doc.title;
  j["category"] = doc.category;
  j["label"] = doc.label ? nlohmann::json(*doc.label) : nlohmann::json(nullptr);
  auto blocks = nlohmann::json::array();
  for (const auto& b : doc.blocks) {
    nlohmann::json bj;
    bj["kind"] = std::string(to_string(b.kind));
    bj["ordinal"] = b.ordinal;
    bj["height_px"] = b.height_px;
    bj["width_frac"] = b.width_frac;
    bj["top_offset_px"] = b.top_offset_px;
    bj["text"] = b.text;
    bj["ocr_char_count"] = b.ocr_char_count;
    bj["text_area_frac"] = b.text_area_frac;
    bj["is_template_image"] = b.is_template_image;
    bj["aspect_ratio"] = b.aspect_ratio;
    if (b.is_gif) bj["is_gif"] = true;
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  return j;
}

inline std::string serialize_article(const ArticleDocument& doc) {
  return article_to_json(doc).dump();
}

inline std::vector<ArticleDocument> read_corpus(const std::string& path,
                                                const IngestOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus '" + path + "'");
  std::vector<ArticleDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(parse_article(line, opts));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " +
                            e.what());
    }
  }
  return docs;
}

inline void write_corpus(const std::string& path,
                         const std::vector<ArticleDocument>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write corpus '" + path + "'");
  for (const auto& d : docs) out << serialize_article(d) << '\n';
}

// ---------------------------------------------------------------------------
// Sentence splitting

inline bool is_sentence_terminal(char32_t cp) {
  return cp == U'。' || cp == U'！' || cp == U'？' || cp == '!' || cp == '?' ||
         cp == '.';
}

inline std::string trim(std::string_view s) {
  auto cps = utf8::decode(s);
  std::size_t b = 0, e = cps.size();
  while (b < e && utf8::is_space(cps[b])) ++b;
  while (e > b && utf8::is_space(cps[e - 1])) --e;
  return utf8::encode(std::vector<char32_t>(cps.begin() + b, cps.begin() + e));
}

// Splits one text into sentences. Terminal punctuation stays with its
// sentence; newlines separate without being kept.
inline std::vector<std::string> split_text(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    auto t = trim(cur);
    if (!t.empty()) out.push_back(std::move(t));
    cur.clear();
  };
  for (char32_t cp : utf8::decode(text)) {
    if (cp == '\n' || cp == '\r') {
      flush();
      continue;
    }
    utf8::append(cur, cp);
    if (is_sentence_terminal(cp)) flush();
  }
  flush();
  return out;
}

// Populates doc.sentences: the title first, then the body sentences of the
// paragraph and subtitle blocks in block order.
inline ArticleDocument split_sentences(ArticleDocument doc,
                                       std::size_t max_sentences = kMaxSentences) {
  doc.sentences.clear();
  doc.tokens.clear();
  doc.sentences.push_back(doc.title);
  for (const auto& b : doc.blocks) {
    if (!b.is_text()) continue;
    for (auto& s : split_text(b.text)) {
      if (doc.sentences.size() >= max_sentences) break;
      doc.sentences.push_back(std::move(s));
    }
    if (doc.sentences.size() >= max_sentences) break;
  }
  if (doc.sentences.size() > max_sentences) doc.sentences.resize(max_sentences);
  return doc;
}

// ---------------------------------------------------------------------------
// Tokenization

enum class TokenizerMode {
  // CJK code points are single tokens, Latin letter/digit runs are words.
  mixed,
  // Every non-whitespace code point is a token.
  character,
};

inline std::vector<std::string> tokenize_text(std::string_view text,
                                              TokenizerMode mode = TokenizerMode::mixed) {
  std::vector<std::string> out;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) out.push_back(std::move(run));
    run.clear();
  };
  for (char32_t cp : utf8::decode(text)) {
    if (utf8::is_space(cp)) {
      flush();
      continue;
    }
    if (mode == TokenizerMode::mixed && utf8::is_latin_word_char(cp)) {
      utf8::append(run, utf8::ascii_lower(cp));
      continue;
    }
    flush();
    std::string tok;
    utf8::append(tok, mode == TokenizerMode::mixed ? utf8::ascii_lower(cp) : cp);
    out.push_back(std::move(tok));
  }
  flush();
  return out;
}

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kHead = 2;
  static constexpr std::int32_t kReserved = 3;

  Vocabulary() { reset(); }

  explicit Vocabulary(const std::vector<std::string>& tokens,
                      TokenizerMode mode = TokenizerMode::mixed)
      : mode_(mode) {
    reset();
    for (const auto& t : tokens) add(t);
  }

  // Builds a vocabulary from the sentences (or title + block texts when
  // sentences are not split yet) of a corpus. Tokens are ordered by
  // descending frequency, then lexicographically.
  static Vocabulary build(const std::vector<ArticleDocument>& docs,
                          std::size_t min_freq = 1,
                          TokenizerMode mode = TokenizerMode::mixed) {
    std::map<std::string, std::size_t> freq;
    auto count = [&](std::string_view text) {
      for (auto& t : tokenize_text(text, mode)) ++freq[t];
    };
    for (const auto& d : docs) {
      if (!d.sentences.empty()) {
        for (const auto& s : d.sentences) count(s);
      } else {
        count(d.title);
        for (const auto& b : d.blocks) count(b.text);
      }
    }
    std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    v.mode_ = mode;
    for (const auto& [tok, n] : items) {
      if (n >= min_freq) v.add(tok);
    }
    return v;
  }

  std::int32_t add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::int32_t>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  std::int32_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(std::int32_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.size() <= kReserved; }
  TokenizerMode mode() const { return mode_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary from_tokens(const std::vector<std::string>& all,
                                TokenizerMode mode) {
    if (all.size() < kReserved || all[0] != "[PAD]" || all[1] != "[UNK]" ||
        all[2] != "[HEAD]")
      throw ConfigError("vocabulary: reserved tokens missing");
    Vocabulary v;
    v.mode_ = mode;
    for (std::size_t i = kReserved; i < all.size(); ++i) v.add(all[i]);
    if (v.size() != all.size()) throw ConfigError("vocabulary: duplicate token");
    return v;
  }

 private:
  void reset() {
    tokens_ = {"[PAD]", "[UNK]", "[HEAD]"};
    index_.clear();
    for (std::int32_t i = 0; i < kReserved; ++i) index_.emplace(tokens_[i], i);
  }

  TokenizerMode mode_ = TokenizerMode::mixed;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

inline TokenizedSentence tokenize_sentence(std::string_view sentence,
                                           const Vocabulary& vocab,
                                           std::size_t max_tokens = kMaxTokens) {
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
  TokenizedSentence ts;
  ts.ids.assign(max_tokens, Vocabulary::kPad);
  ts.ids[0] = Vocabulary::kHead;
  std::size_t n = 1;
  for (const auto& tok : tokenize_text(sentence, vocab.mode())) {
    if (n >= max_tokens) break;
    ts.ids[n++] = vocab.id(tok);
  }
  ts.length = n;
  return ts;
}

// Populates doc.tokens; splits sentences first when that has not happened.
inline ArticleDocument tokenize(ArticleDocument doc, const Vocabulary& vocab,
                                std::size_t max_tokens = kMaxTokens) {
  if (vocab.empty()) throw ConfigError("tokenize: empty vocabulary");
  if (doc.sentences.empty()) doc = split_sentences(std::move(doc));
  doc.tokens.clear();
  doc.tokens.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences)
    doc.tokens.push_back(tokenize_sentence(s, vocab, max_tokens));
  return doc;
}

}  // namespace coqan
