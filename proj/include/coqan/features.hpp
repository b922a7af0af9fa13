#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/article.hpp"
#include "coqan/error.hpp"
#include "coqan/lexicon.hpp"

namespace coqan {

inline constexpr std::size_t kNumFeatures = 48;
inline constexpr std::size_t kCategoryFeature = 48;
inline constexpr std::size_t kLayoutDim = 13;

// The 48 writing-characteristic fields, addressed by their 1-based index.
struct FeatureRecord {
  std::array<double, kNumFeatures> values{};

  double& operator[](std::size_t index1) { return values.at(index1 - 1); }
  double operator[](std::size_t index1) const { return values.at(index1 - 1); }

  std::int64_t category() const {
    return static_cast<std::int64_t>(values[kCategoryFeature - 1]);
  }

  bool operator==(const FeatureRecord&) const = default;
};

inline std::string feature_name(std::size_t index1) {
  static const char* names[kNumFeatures] = {
      "max_chars_in_pictures", "max_text_area_in_pictures", "valid_pictures",
      "ratio_pictures_with_text", "template_pictures", "total_chars_with_pictures",
      "pictures_with_text", "total_words", "chars_without_stopwords", "text_chars",
      "unique_chars", "words_without_stopwords", "unique_words", "ratio_unique_chars",
      "ratio_unique_words", "punctuation", "nouns", "verbs", "adjectives",
      "ratio_punctuation", "ratio_nouns", "ratio_verbs", "ratio_adjectives",
      "title_length", "title_length_without_stopwords",
      "ratio_title_without_stopwords", "title_words", "title_keywords",
      "ratio_title_keywords", "ratio_pictures_to_words", "gifs",
      "images_without_gif", "pictures", "videos", "paragraphs", "conjunctions",
      "pronouns", "adverbs", "numerals", "auxiliary_words", "idioms",
      "ratio_paragraphs_to_valid_pictures", "ratio_conjunctions", "ratio_adverbs",
      "ratio_numerals", "ratio_auxiliary_words", "ratio_idioms", "category"};
  return names[index1 - 1];
}

// Corpus document frequencies used to pick per-article TF-IDF keywords.
class KeywordModel {
 public:
  static KeywordModel fit(const std::vector<ArticleDocument>& docs,
                          const Lexicon& lex = Lexicon::bundled()) {
    KeywordModel m;
    for (const auto& d : docs) {
      std::set<std::string> seen;
      for (const auto& b : d.blocks) {
        if (!b.is_text()) continue;
        for (const auto& w : lex.segment(b.text).words) seen.insert(w.text);
      }
      for (const auto& w : seen) ++m.df_[w];
      ++m.n_docs_;
    }
    return m;
  }

  double idf(const std::string& word) const {
    auto it = df_.find(word);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + df)) + 1.0;
  }

  // Top-k body words by tf * idf; stop words excluded, ties broken
  // lexicographically.
  std::set<std::string> keywords(const std::vector<Word>& body, const Lexicon& lex,
                                 std::size_t k) const {
    std::map<std::string, double> tf;
    for (const auto& w : body) {
      if (!lex.is_stop(w.text)) tf[w.text] += 1.0;
    }
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& [w, n] : tf) scored.emplace_back(w, n * idf(w));
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::set<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.insert(scored[i].first);
    return out;
  }

  std::size_t num_docs() const { return n_docs_; }
  const std::map<std::string, std::size_t>& doc_freq() const { return df_; }

  nlohmann::json to_json() const {
    return {{"num_docs", n_docs_}, {"doc_freq", df_}};
  }
  static KeywordModel from_json(const nlohmann::json& j) {
    KeywordModel m;
    m.n_docs_ = j.at("num_docs").get<std::size_t>();
    m.df_ = j.at("doc_freq").get<std::map<std::string, std::size_t>>();
    return m;
  }

 private:
  std::map<std::string, std::size_t> df_;
  std::size_t n_docs_ = 0;
};

struct FeatureContext {
  const Lexicon* lexicon = &Lexicon::bundled();
  const KeywordModel* keywords = nullptr;  // null: every word has idf 1
  std::size_t keyword_count = 10;
};

namespace detail {
inline double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
}  // namespace detail

inline FeatureRecord extract_writing_features(const ArticleDocument& doc,
                                              const FeatureContext& ctx = {}) {
  const Lexicon& lex = *ctx.lexicon;
  FeatureRecord f;

  double max_ocr = 0, max_area = 0, valid = 0, with_text = 0, templates = 0;
  double gifs = 0, images = 0, videos = 0, paragraphs = 0, ocr_total = 0;
  std::string body_text;
  for (const auto& b : doc.blocks) {
    switch (b.kind) {
      case BlockKind::image:
        max_ocr = std::max(max_ocr, static_cast<double>(b.ocr_char_count));
        max_area = std::max(max_area, b.text_area_frac);
        if (!b.is_template_image && b.text_area_frac < 0.5) ++valid;
        if (b.ocr_char_count > 0) ++with_text;
        if (b.is_template_image) ++templates;
        ocr_total += static_cast<double>(b.ocr_char_count);
        (b.is_gif ? gifs : images) += 1;
        break;
      case BlockKind::video: ++videos; break;
      case BlockKind::paragraph:
        ++paragraphs;
        [[fallthrough]];
      case BlockKind::subtitle:
        body_text += b.text;
        body_text += '\n';
        break;
    }
  }
  const double pictures = gifs + images;

  std::set<char32_t> unique_chars;
  double text_chars = 0;
  for (char32_t cp : utf8::decode(body_text)) {
    if (utf8::is_space(cp)) continue;
    ++text_chars;
    unique_chars.insert(cp);
  }

  const Segmentation body = lex.segment(body_text);
  double words = static_cast<double>(body.words.size());
  double chars_no_stop = 0, words_no_stop = 0;
  std::set<std::string> unique_words;
  std::array<double, 10> pos_count{};
  for (const auto& w : body.words) {
    unique_words.insert(w.text);
    if (!lex.is_stop(w.text)) {
      chars_no_stop += static_cast<double>(w.chars);
      ++words_no_stop;
    }
    ++pos_count[static_cast<std::size_t>(w.pos)];
  }
  auto pc = [&](Pos p) { return pos_count[static_cast<std::size_t>(p)]; };
  const double punct = static_cast<double>(body.punctuation);

  const Segmentation title = lex.segment(doc.title);
  const double title_len = static_cast<double>(utf8::visible_length(doc.title));
  double title_no_stop = 0;
  for (const auto& w : title.words) {
    if (!lex.is_stop(w.text)) title_no_stop += static_cast<double>(w.chars);
  }
  const double title_words = static_cast<double>(title.words.size());
  const KeywordModel fallback;
  const KeywordModel& km = ctx.keywords ? *ctx.keywords : fallback;
  const auto keywords = km.keywords(body.words, lex, ctx.keyword_count);
  double title_keywords = 0;
  for (const auto& w : title.words) title_keywords += keywords.count(w.text) ? 1 : 0;

  f[1] = max_ocr;
  f[2] = max_area;
  f[3] = valid;
  f[4] = detail::ratio(with_text, pictures);
  f[5] = templates;
  f[6] = text_chars + ocr_total;
  f[7] = with_text;
  f[8] = words;
  f[9] = chars_no_stop;
  f[10] = text_chars;
  f[11] = static_cast<double>(unique_chars.size());
  f[12] = words_no_stop;
  f[13] = static_cast<double>(unique_words.size());
  f[14] = detail::ratio(f[11], text_chars);
  f[15] = detail::ratio(f[13], words);
  f[16] = punct;
  f[17] = pc(Pos::noun);
  f[18] = pc(Pos::verb);
  f[19] = pc(Pos::adjective);
  f[20] = detail::ratio(punct, text_chars);
  f[21] = detail::ratio(pc(Pos::noun), words);
  f[22] = detail::ratio(pc(Pos::verb), words);
  f[23] = detail::ratio(pc(Pos::adjective), words);
  f[24] = title_len;
  f[25] = title_no_stop;
  f[26] = detail::ratio(title_no_stop, title_len);
  f[27] = title_words;
  f[28] = title_keywords;
  f[29] = detail::ratio(title_keywords, title_words);
  f[30] = detail::ratio(pictures, words);
  f[31] = gifs;
  f[32] = images;
  f[33] = pictures;
  f[34] = videos;
  f[35] = paragraphs;
  f[36] = pc(Pos::conjunction);
  f[37] = pc(Pos::pronoun);
  f[38] = pc(Pos::adverb);
  f[39] = pc(Pos::numeral);
  f[40] = pc(Pos::auxiliary);
  f[41] = pc(Pos::idiom);
  f[42] = detail::ratio(paragraphs, valid);
  f[43] = detail::ratio(pc(Pos::conjunction), words);
  f[44] = detail::ratio(pc(Pos::adverb), words);
  f[45] = detail::ratio(pc(Pos::numeral), words);
  f[46] = detail::ratio(pc(Pos::auxiliary), words);
  f[47] = detail::ratio(pc(Pos::idiom), words);
  f[48] = static_cast<double>(doc.category);
  return f;
}

// ---------------------------------------------------------------------------
// Layout vectors

using LayoutVector = std::array<double, kLayoutDim>;

struct LayoutOptions {
  double viewport_px = 800.0;
  std::size_t max_blocks = kMaxBlocks;
};

// Slots: one-hot kind (paragraph, subtitle, image, video), ordinal / M,
// height / viewport, top offset / page height, log1p(text chars),
// aspect ratio, template flag, log1p(ocr chars), text area fraction,
// width fraction.
inline std::vector<LayoutVector> extract_layout_vectors(const ArticleDocument& doc,
                                                        const LayoutOptions& opts = {}) {
  const std::size_t m = std::min(doc.blocks.size(), opts.max_blocks);
  double page_height = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& b = doc.blocks[i];
    page_height = std::max(page_height, b.top_offset_px + b.height_px);
  }
  std::vector<LayoutVector> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& b = doc.blocks[i];
    LayoutVector& v = out[i];
    v.fill(0.0);
    v[static_cast<std::size_t>(b.kind)] = 1.0;
    v[4] = static_cast<double>(b.ordinal) / static_cast<double>(m);
    v[5] = b.height_px / opts.viewport_px;
    v[6] = page_height > 0.0 ? b.top_offset_px / page_height : 0.0;
    v[7] = std::log1p(static_cast<double>(utf8::visible_length(b.text)));
    v[8] = b.aspect_ratio;
    v[9] = b.is_template_image ? 1.0 : 0.0;
    v[10] = std::log1p(static_cast<double>(b.ocr_char_count));
    v[11] = b.text_area_frac;
    v[12] = b.width_frac;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization of the numerical fields (1..47)

struct NormStats {
  std::array<double, kNumFeatures - 1> mean{};
  std::array<double, kNumFeatures - 1> stddev{};

  nlohmann::json to_json() const { return {{"mean", mean}, {"std", stddev}}; }
  static NormStats from_json(const nlohmann::json& j) {
    NormStats s;
    s.mean = j.at("mean").get<std::array<double, kNumFeatures - 1>>();
    s.stddev = j.at("std").get<std::array<double, kNumFeatures - 1>>();
    return s;
  }
  bool operator==(const NormStats&) const = default;
};

// Population mean and standard deviation per numerical field.
inline NormStats fit_norm_stats(const std::vector<FeatureRecord>& records) {
  if (records.empty()) throw ConfigError("fit_norm_stats: empty record list");
  NormStats s;
  const double n = static_cast<double>(records.size());
  for (std::size_t k = 0; k < kNumFeatures - 1; ++k) {
    double sum = 0;
    for (const auto& r : records) sum += r.values[k];
    const double mean = sum / n;
    double sq = 0;
    for (const auto& r : records) sq += (r.values[k] - mean) * (r.values[k] - mean);
    s.mean[k] = mean;
    s.stddev[k] = std::sqrt(sq / n);
  }
  return s;
}

// Z-scores every numerical field; zero-variance fields and the category
// field pass through unchanged.
inline FeatureRecord apply_norm(FeatureRecord r, const NormStats& s) {
  for (std::size_t k = 0; k < kNumFeatures - 1; ++k) {
    if (s.stddev[k] > 0.0) r.values[k] = (r.values[k] - s.mean[k]) / s.stddev[k];
  }
  return r;
}

}  // namespace coqan
