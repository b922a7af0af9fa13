#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/article.hpp"
#include "coqan/fusion.hpp"
#include "coqan/random.hpp"

namespace coqan {

enum class DisturbMode { sentences, blocks, both };

inline std::string to_string(DisturbMode m) {
  switch (m) {
    case DisturbMode::sentences: return "sentences";
    case DisturbMode::blocks: return "blocks";
    case DisturbMode::both: return "both";
  }
  return "?";
}

inline DisturbMode disturb_mode_from_string(const std::string& s) {
  if (s == "sentences") return DisturbMode::sentences;
  if (s == "blocks") return DisturbMode::blocks;
  if (s == "both") return DisturbMode::both;
  throw ConfigError("unknown disturbance mode '" + s + "'");
}

struct DisturbReport {
  DisturbMode mode = DisturbMode::blocks;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::size_t samples = 0;  // correctly predicted positives
  double successful_disturbance_rate = 0.0;
  std::vector<double> repeat_rates;

  nlohmann::json to_json() const {
    return {{"mode", to_string(mode)},
            {"repeats", repeats},
            {"seed", seed},
            {"samples", samples},
            {"successful_disturbance_rate", successful_disturbance_rate},
            {"repeat_rates", repeat_rates}};
  }
};

// Permutation source; the default draws uniformly with Fisher-Yates.
using PermutationFn = std::function<std::vector<std::size_t>(std::size_t, Rng&)>;

inline std::vector<std::size_t> uniform_permutation(std::size_t n, Rng& rng) { return random_permutation(n, rng); }

// Reorders blocks: new position i takes old block perm[i]. Ordinals and top
// offsets are rebuilt so the page stays physically consistent.
inline ArticleDocument permute_blocks(ArticleDocument doc, const std::vector<std::size_t>& perm) {
  if (perm.size() != doc.blocks.size()) throw ShapeError("permute_blocks: permutation size mismatch");
  std::vector<ContentBlock> blocks;
  blocks.reserve(perm.size());
  for (auto k : perm) blocks.push_back(doc.blocks.at(k));
  double top = doc.blocks.empty() ? 0.0 : doc.blocks.front().top_offset_px;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].ordinal = i;
    blocks[i].top_offset_px = top;
    top += blocks[i].height_px;
  }
  doc.blocks = std::move(blocks);
  doc.tokens.clear();
  return doc;
}

// Reorders body sentences (the title stays first): body position i takes
// old body sentence perm[i].
inline ArticleDocument permute_sentences(ArticleDocument doc, const std::vector<std::size_t>& perm) {
  if (doc.sentences.empty()) throw ValidationError("permute_sentences: document has no sentences");
  if (perm.size() + 1 != doc.sentences.size())
    throw ShapeError("permute_sentences: permutation size mismatch");
  std::vector<std::string> s{doc.sentences[0]};
  for (auto k : perm) s.push_back(doc.sentences.at(k + 1));
  doc.sentences = std::move(s);
  doc.tokens.clear();
  return doc;
}

// Fraction of correctly predicted positives whose prediction flips to
// negative after reordering, averaged over repeats. `predict` maps an
// ArticleDocument to the positive-class probability. Block and sentence
// permutations come from separate streams, so mode `both` applies the same
// block orders as mode `blocks`.
template <class Predict>
DisturbReport shuffle_disturb(Predict&& predict, const std::vector<ArticleDocument>& dataset, DisturbMode mode,
                              std::size_t repeats, std::uint64_t seed, std::size_t max_sentences = kMaxSentences,
                              const PermutationFn& permutation = uniform_permutation) {
  if (repeats == 0) throw ConfigError("disturb: repeats must be positive");
  std::vector<ArticleDocument> base;
  for (const auto& d : dataset) {
    if (!d.label) throw ValidationError("disturb: article '" + d.id + "' has no label");
    if (*d.label != 1) continue;
    ArticleDocument split = d.sentences.empty() ? split_sentences(d, max_sentences) : d;
    if (label_from_probability(predict(split)) == 1) base.push_back(std::move(split));
  }
  if (base.empty()) throw ValidationError("empty disturbance base");

  DisturbReport rep;
  rep.mode = mode;
  rep.repeats = repeats;
  rep.seed = seed;
  rep.samples = base.size();
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng block_rng(derive_seed(seed, 100 + r));
    Rng sentence_rng(derive_seed(seed, 200 + r));
    std::size_t flips = 0;
    for (const auto& d : base) {
      ArticleDocument x = d;
      if (mode != DisturbMode::sentences) x = permute_blocks(std::move(x), permutation(x.blocks.size(), block_rng));
      if (mode != DisturbMode::blocks)
        x = permute_sentences(std::move(x), permutation(x.sentences.size() - 1, sentence_rng));
      if (label_from_probability(predict(x)) == 0) ++flips;
    }
    const double rate = static_cast<double>(flips) / static_cast<double>(base.size());
    rep.repeat_rates.push_back(rate);
    total += rate;
  }
  rep.successful_disturbance_rate = total / static_cast<double>(repeats);
  return rep;
}

}  // namespace coqan
