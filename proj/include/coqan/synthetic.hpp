#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "coqan/article.hpp"
#include "coqan/random.hpp"

namespace coqan {

// Synthetic corpora whose label is a known function of one controllable signal.
//   layout:  positives arrange sections as [template image, P, I, P, I, ...];
//            the paired negative holds the same blocks in a non-alternating order.
//   text:    positives number their body sentences in order ("s01 ...",
//            "s02 ..."); the paired negative permutes the same sentences.
//   feature: positives have long text, many paragraphs and little in-picture text.
//   mixed:   three independent signals (block order, category group, sentence
//            order); the label is their conjunction.
// Layout and text corpora come in pairs with identical order-free content, so
// writing features cannot separate a pair.
enum class SyntheticKind { layout, text, feature, mixed };

inline std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::layout: return "layout-signal";
    case SyntheticKind::text: return "text-signal";
    case SyntheticKind::feature: return "feature-signal";
    case SyntheticKind::mixed: return "mixed-signal";
  }
  return "?";
}

inline SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "layout-signal" || s == "layout") return SyntheticKind::layout;
  if (s == "text-signal" || s == "text") return SyntheticKind::text;
  if (s == "feature-signal" || s == "feature") return SyntheticKind::feature;
  if (s == "mixed-signal" || s == "mixed") return SyntheticKind::mixed;
  throw ConfigError("unknown synthetic spec '" + s + "'");
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::layout;
  std::size_t n = 1000;
  std::uint64_t seed = 7;
  std::string id_prefix = "syn";
};

namespace synth {

inline constexpr std::size_t kWordPool = 40;
inline constexpr double kParagraphLine = 24.0;

// Fixed-width lower-case words so texts with equal word counts have equal
// character counts.
inline std::string word(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "w%02zu", i % 100);
  return buf;
}

inline std::string marker(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "s%02zu", i % 100);
  return buf;
}

inline std::string random_sentence(Rng& rng, std::size_t words) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += word(uniform_index(rng, kWordPool));
  }
  return s + ".";
}

inline ContentBlock paragraph(std::string text) {
  ContentBlock b;
  b.kind = BlockKind::paragraph;
  b.width_frac = 1.0;
  b.height_px = kParagraphLine * std::ceil(static_cast<double>(text.size()) / 40.0);
  b.text = std::move(text);
  return b;
}

inline ContentBlock image(Rng& rng, bool template_image) {
  ContentBlock b;
  b.kind = BlockKind::image;
  b.width_frac = template_image ? 1.0 : 0.6 + 0.4 * uniform_unit(rng);
  b.height_px = template_image ? 60.0 : 200.0 + 200.0 * uniform_unit(rng);
  b.aspect_ratio = template_image ? 6.0 : 0.8 + uniform_unit(rng);
  b.is_template_image = template_image;
  b.ocr_char_count = template_image ? 4 : static_cast<std::int64_t>(uniform_index(rng, 20));
  b.text_area_frac = template_image ? 0.3 : 0.2 * uniform_unit(rng);
  return b;
}

// Ordinals follow list order; tops are cumulative heights.
inline void place(std::vector<ContentBlock>& blocks) {
  double top = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].ordinal = i;
    blocks[i].top_offset_px = top;
    top += blocks[i].height_px;
  }
}

// Fills paragraph blocks in reading order from texts.
inline void assign_texts(std::vector<ContentBlock>& blocks, const std::vector<std::string>& texts) {
  std::size_t k = 0;
  for (auto& b : blocks) {
    if (b.kind != BlockKind::paragraph) continue;
    b.text = k < texts.size() ? texts[k] : std::string("w00.");
    b.height_px = kParagraphLine * std::ceil(static_cast<double>(b.text.size()) / 40.0);
    ++k;
  }
}

inline std::size_t count_paragraphs(const std::vector<ContentBlock>& blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.kind == BlockKind::paragraph ? 1 : 0;
  return n;
}

// Structured arrangement: starts at a section marker, every marker is
// followed by a paragraph and content blocks alternate P/I.
inline bool is_structured(const std::vector<ContentBlock>& blocks) {
  if (blocks.empty() || !blocks[0].is_template_image) return false;
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    const auto& a = blocks[i];
    const auto& b = blocks[i + 1];
    if (a.is_template_image) {
      if (b.kind != BlockKind::paragraph) return false;
    } else if (a.kind == BlockKind::paragraph) {
      if (b.kind == BlockKind::paragraph) return false;
    } else if (!b.is_template_image && b.kind != BlockKind::paragraph) {
      return false;
    }
  }
  return true;
}

// Sections of [marker, (P, I) x k]; paragraph texts left empty.
inline std::vector<ContentBlock> structured_blocks(Rng& rng) {
  std::vector<ContentBlock> blocks;
  const std::size_t sections = 2 + uniform_index(rng, 3);
  for (std::size_t s = 0; s < sections; ++s) {
    blocks.push_back(image(rng, true));
    const std::size_t pairs = 1 + uniform_index(rng, 3);
    for (std::size_t k = 0; k < pairs; ++k) {
      blocks.push_back(paragraph(""));
      blocks.push_back(image(rng, false));
    }
  }
  return blocks;
}

inline std::vector<ContentBlock> scrambled(std::vector<ContentBlock> blocks, Rng& rng) {
  do fisher_yates(blocks, rng);
  while (is_structured(blocks));
  return blocks;
}

template <class V>
V non_identity_permutation(V items, Rng& rng) {
  const V original = items;
  if (items.size() < 2) return items;
  do fisher_yates(items, rng);
  while (items == original);
  return items;
}

inline std::vector<std::string> ordered_sentences(Rng& rng, std::size_t n, std::size_t words) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(marker(i + 1) + " " + random_sentence(rng, words - 1));
  return out;
}

inline ArticleDocument make_doc(std::string id, std::string title, std::int64_t category,
                                std::vector<ContentBlock> blocks, int label) {
  ArticleDocument d;
  d.id = std::move(id);
  d.title = std::move(title);
  d.category = category;
  place(blocks);
  d.blocks = std::move(blocks);
  d.label = label;
  return d;
}

inline std::string doc_id(const SyntheticSpec& spec, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return spec.id_prefix + "-" + buf;
}

inline ArticleDocument feature_doc(Rng& rng, std::string id, int label) {
  std::vector<ContentBlock> blocks;
  const std::size_t paragraphs = label ? 8 + uniform_index(rng, 6) : 2 + uniform_index(rng, 3);
  const std::size_t images = 1 + uniform_index(rng, 4);
  for (std::size_t i = 0; i < paragraphs; ++i) {
    std::string text;
    const std::size_t sentences = label ? 3 + uniform_index(rng, 3) : 1 + uniform_index(rng, 2);
    for (std::size_t s = 0; s < sentences; ++s) {
      if (s) text += ' ';
      text += random_sentence(rng, 4 + uniform_index(rng, 6));
    }
    blocks.push_back(paragraph(std::move(text)));
  }
  for (std::size_t i = 0; i < images; ++i) {
    ContentBlock img = image(rng, false);
    img.ocr_char_count = label ? static_cast<std::int64_t>(uniform_index(rng, 10))
                               : 40 + static_cast<std::int64_t>(uniform_index(rng, 80));
    img.text_area_frac = label ? 0.1 * uniform_unit(rng) : 0.2 + 0.25 * uniform_unit(rng);
    blocks.insert(blocks.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, blocks.size() + 1)), img);
  }
  return make_doc(std::move(id), random_sentence(rng, 4), static_cast<std::int64_t>(uniform_index(rng, 16)),
                  std::move(blocks), label);
}

}  // namespace synth

// Mixed-corpus signal probability: P(all three) = p^3 = 1/2.
inline double mixed_signal_probability() { return std::cbrt(0.5); }

inline std::vector<ArticleDocument> generate_synthetic(const SyntheticSpec& spec) {
  using namespace synth;
  Rng rng(spec.seed);
  std::vector<ArticleDocument> out;
  out.reserve(spec.n);
  const std::size_t sentence_words = 6;
  for (std::size_t i = 0; out.size() < spec.n; ++i) {
    const bool room_for_pair = out.size() + 2 <= spec.n;
    switch (spec.kind) {
      case SyntheticKind::layout: {
        auto pos = structured_blocks(rng);
        auto neg = scrambled(pos, rng);
        std::vector<std::string> texts;
        for (std::size_t k = count_paragraphs(pos); k > 0; --k)
          texts.push_back(random_sentence(rng, 4 + uniform_index(rng, 8)));
        assign_texts(pos, texts);
        assign_texts(neg, texts);
        const std::string title = random_sentence(rng, 4);
        const auto cat = static_cast<std::int64_t>(uniform_index(rng, 16));
        out.push_back(make_doc(doc_id(spec, out.size()), title, cat, std::move(pos), 1));
        if (room_for_pair) out.push_back(make_doc(doc_id(spec, out.size()), title, cat, std::move(neg), 0));
        break;
      }
      case SyntheticKind::text: {
        const std::size_t n = 4 + uniform_index(rng, 4);
        const auto ordered = ordered_sentences(rng, n, sentence_words);
        const auto permuted = non_identity_permutation(ordered, rng);
        const std::string title = random_sentence(rng, 4);
        const auto cat = static_cast<std::int64_t>(uniform_index(rng, 16));
        auto build = [&](const std::vector<std::string>& sentences) {
          std::vector<ContentBlock> blocks;
          for (const auto& s : sentences) blocks.push_back(paragraph(s));
          return blocks;
        };
        out.push_back(make_doc(doc_id(spec, out.size()), title, cat, build(ordered), 1));
        if (room_for_pair) out.push_back(make_doc(doc_id(spec, out.size()), title, cat, build(permuted), 0));
        break;
      }
      case SyntheticKind::feature: {
        out.push_back(feature_doc(rng, doc_id(spec, out.size()), 1));
        if (room_for_pair) out.push_back(feature_doc(rng, doc_id(spec, out.size()), 0));
        break;
      }
      case SyntheticKind::mixed: {
        // Alternate positive and negative; a negative draws its signal triple
        // from the independent-signal distribution conditioned on not all-1.
        const int label = static_cast<int>(i % 2 == 0);
        const double p = mixed_signal_probability();
        bool s_layout = true, s_writing = true, s_text = true;
        if (!label) {
          do {
            s_layout = uniform_unit(rng) < p;
            s_writing = uniform_unit(rng) < p;
            s_text = uniform_unit(rng) < p;
          } while (s_layout && s_writing && s_text);
        }
        auto blocks = structured_blocks(rng);
        if (!s_layout) blocks = scrambled(std::move(blocks), rng);
        auto sentences = ordered_sentences(rng, count_paragraphs(blocks), sentence_words);
        if (!s_text) sentences = non_identity_permutation(std::move(sentences), rng);
        assign_texts(blocks, sentences);
        const auto cat = static_cast<std::int64_t>(uniform_index(rng, 8) + (s_writing ? 0 : 8));
        out.push_back(make_doc(doc_id(spec, out.size()), random_sentence(rng, 4), cat, std::move(blocks), label));
        break;
      }
    }
  }
  return out;
}

}  // namespace coqan
