#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "coqan/attention_export.hpp"
#include "coqan/disturb.hpp"
#include "coqan/synthetic.hpp"

using namespace coqan;
namespace fs = std::filesystem;

namespace {

std::map<std::string, int> unigrams(const ArticleDocument& d) {
  std::map<std::string, int> h;
  for (const auto& b : d.blocks) {
    std::istringstream in(b.text);
    for (std::string w; in >> w;) ++h[w];
  }
  return h;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Articles whose blocks have strictly increasing heights, all labelled
// positive.
std::vector<ArticleDocument> sorted_height_docs(std::size_t n, std::size_t blocks) {
  std::vector<ArticleDocument> out;
  for (std::size_t i = 0; i < n; ++i) {
    ArticleDocument d;
    d.id = "h" + std::to_string(i);
    d.title = "Title";
    double top = 0;
    for (std::size_t k = 0; k < blocks; ++k) {
      ContentBlock b;
      b.ordinal = k;
      b.height_px = 10.0 * static_cast<double>(k + 1);
      b.top_offset_px = top;
      b.text = "Sentence " + std::to_string(k) + ".";
      top += b.height_px;
      d.blocks.push_back(b);
    }
    d.label = 1;
    out.push_back(d);
  }
  return out;
}

// Test double: positive iff block heights are increasing.
double sorted_predictor(const ArticleDocument& d) {
  for (std::size_t i = 0; i + 1 < d.blocks.size(); ++i)
    if (d.blocks[i].height_px > d.blocks[i + 1].height_px) return 0.1;
  return 0.9;
}

ModelConfig writing_only() {
  ModelConfig c;
  c.active = Subnets::parse("LO,WC");
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic corpora

TEST(Synthetic, BalancedLabels) {
  for (auto kind : {SyntheticKind::layout, SyntheticKind::text, SyntheticKind::feature, SyntheticKind::mixed}) {
    const auto docs = generate_synthetic({kind, 1000, 3, "b"});
    ASSERT_EQ(docs.size(), 1000u);
    int pos = 0;
    for (const auto& d : docs) pos += *d.label;
    EXPECT_EQ(pos, 500) << to_string(kind);
  }
}

TEST(Synthetic, TextPairsShareUnigramHistograms) {
  const auto docs = generate_synthetic({SyntheticKind::text, 200, 5, "t"});
  for (std::size_t i = 0; i + 1 < docs.size(); i += 2) {
    EXPECT_EQ(*docs[i].label, 1);
    EXPECT_EQ(*docs[i + 1].label, 0);
    EXPECT_EQ(unigrams(docs[i]), unigrams(docs[i + 1]));
    EXPECT_EQ(docs[i].title, docs[i + 1].title);
    EXPECT_EQ(extract_writing_features(split_sentences(docs[i])),
              extract_writing_features(split_sentences(docs[i + 1])));
  }
}

TEST(Synthetic, LayoutPairsDifferOnlyInArrangement) {
  const auto docs = generate_synthetic({SyntheticKind::layout, 200, 6, "l"});
  for (std::size_t i = 0; i + 1 < docs.size(); i += 2) {
    EXPECT_TRUE(synth::is_structured(docs[i].blocks));
    EXPECT_FALSE(synth::is_structured(docs[i + 1].blocks));
    EXPECT_EQ(extract_writing_features(split_sentences(docs[i])),
              extract_writing_features(split_sentences(docs[i + 1])));
  }
}

TEST(Synthetic, SameSeedSameBytes) {
  for (auto kind : {SyntheticKind::layout, SyntheticKind::text, SyntheticKind::feature, SyntheticKind::mixed}) {
    const auto a = generate_synthetic({kind, 60, 7, "d"}), b = generate_synthetic({kind, 60, 7, "d"});
    const auto c = generate_synthetic({kind, 60, 8, "d"});
    std::string sa, sb, sc;
    for (const auto& d : a) sa += serialize_article(d) + "\n";
    for (const auto& d : b) sb += serialize_article(d) + "\n";
    for (const auto& d : c) sc += serialize_article(d) + "\n";
    EXPECT_EQ(sa, sb);
    EXPECT_NE(sa, sc);
  }
}

TEST(Synthetic, KindNames) {
  EXPECT_EQ(synthetic_kind_from_string("text-signal"), SyntheticKind::text);
  EXPECT_EQ(synthetic_kind_from_string("layout"), SyntheticKind::layout);
  EXPECT_THROW(synthetic_kind_from_string("nope"), ConfigError);
}

// ---------------------------------------------------------------------------
// Disturbance

TEST(Disturb, IdentityPermutationNeverFlips) {
  const auto docs = generate_synthetic({SyntheticKind::layout, 40, 1, "i"});
  auto identity = [](std::size_t n, Rng&) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
  };
  auto structured = [](const ArticleDocument& d) { return synth::is_structured(d.blocks) ? 0.9 : 0.1; };
  const auto rep = shuffle_disturb(structured, docs, DisturbMode::both, 5, 3, kMaxSentences, identity);
  EXPECT_EQ(rep.samples, 20u);
  EXPECT_EQ(rep.successful_disturbance_rate, 0.0);
}

TEST(Disturb, SortedHeightDoubleMatchesCombinatorialRate) {
  const auto docs = sorted_height_docs(400, 5);
  const auto blocks = shuffle_disturb(sorted_predictor, docs, DisturbMode::blocks, 5, 11);
  EXPECT_NEAR(blocks.successful_disturbance_rate, 1.0 - 1.0 / 120.0, 0.01);
  const auto sentences = shuffle_disturb(sorted_predictor, docs, DisturbMode::sentences, 5, 11);
  EXPECT_EQ(sentences.successful_disturbance_rate, 0.0);
  const auto both = shuffle_disturb(sorted_predictor, docs, DisturbMode::both, 5, 11);
  EXPECT_EQ(both.successful_disturbance_rate, blocks.successful_disturbance_rate);
}

TEST(Disturb, EmptyBaseIsError) {
  const auto docs = sorted_height_docs(5, 4);
  try {
    shuffle_disturb([](const ArticleDocument&) { return 0.2; }, docs, DisturbMode::blocks, 5, 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty disturbance base"), std::string::npos);
  }
}

TEST(Disturb, RateBoundedAndReproducible) {
  const auto docs = generate_synthetic({SyntheticKind::mixed, 80, 2, "r"});
  auto noisy = [](const ArticleDocument& d) {
    return d.blocks.front().is_template_image && d.sentences.size() > 1 && d.sentences[1].rfind("s01", 0) == 0
               ? 0.8
               : 0.3;
  };
  for (auto mode : {DisturbMode::sentences, DisturbMode::blocks, DisturbMode::both}) {
    const auto a = shuffle_disturb(noisy, docs, mode, 5, 9), b = shuffle_disturb(noisy, docs, mode, 5, 9);
    EXPECT_GE(a.successful_disturbance_rate, 0.0);
    EXPECT_LE(a.successful_disturbance_rate, 1.0);
    EXPECT_EQ(a.to_json(), b.to_json());
    EXPECT_EQ(a.repeat_rates.size(), 5u);
  }
}

TEST(Disturb, ShufflesLeaveWritingFeaturesUnchanged) {
  Rng rng(4);
  for (const auto& raw : generate_synthetic({SyntheticKind::mixed, 30, 4, "f"})) {
    const auto d = split_sentences(raw);
    const auto base = extract_writing_features(d);
    const auto moved = permute_blocks(d, random_permutation(d.blocks.size(), rng));
    EXPECT_EQ(extract_writing_features(moved), base);
    const auto reordered = permute_sentences(d, random_permutation(d.sentences.size() - 1, rng));
    EXPECT_EQ(reordered.sentences.front(), d.sentences.front());
    EXPECT_EQ(extract_writing_features(reordered), base);
  }
}

TEST(Disturb, PermutedBlocksFormConsistentPage) {
  const auto d = generate_synthetic({SyntheticKind::layout, 2, 5, "p"})[0];
  std::vector<std::size_t> perm(d.blocks.size());
  std::iota(perm.rbegin(), perm.rend(), 0);
  const auto moved = permute_blocks(d, perm);
  EXPECT_NO_THROW(parse_article(serialize_article(moved)));
  EXPECT_EQ(moved.blocks.front().height_px, d.blocks.back().height_px);
  EXPECT_THROW(permute_blocks(d, {0}), ShapeError);
}

// ---------------------------------------------------------------------------
// Attention export

TEST(Attention, ShapeRowsAndDeterminism) {
  const auto docs = generate_synthetic({SyntheticKind::mixed, 12, 3, "a"});
  Classifier<float> clf(writing_only(), Preprocessor::fit(docs));
  clf.model().initialize(5);
  const auto maps = capture_attention(clf, docs[0]);
  ASSERT_EQ(maps.size(), 3u);
  for (const auto& layer : maps) {
    ASSERT_EQ(layer.size(), 4u);
    for (const auto& a : layer) {
      ASSERT_EQ(a.rows(), 48);
      ASSERT_EQ(a.cols(), 48);
      for (Eigen::Index i = 0; i < 48; ++i) EXPECT_NEAR(a.row(i).sum(), 1.0f, 1e-6f);
    }
  }
  const auto mean = head_mean(maps[1]);
  for (Eigen::Index i = 0; i < 48; ++i) EXPECT_NEAR(mean.row(i).sum(), 1.0f, 1e-6f);

  const fs::path root = fs::temp_directory_path() / "coqan_attention_test";
  fs::remove_all(root);
  const auto index = write_attention(root / "one", docs[0].id, maps);
  write_attention(root / "two", docs[0].id, capture_attention(clf, docs[0]));
  EXPECT_EQ(index["files"].size(), 15u);
  for (const auto& f : index["files"]) {
    const std::string name = f["file"];
    EXPECT_EQ(slurp(root / "one" / name), slurp(root / "two" / name)) << name;
  }
  const auto json = nlohmann::json::parse(slurp(root / "one" / "attention.json"));
  EXPECT_EQ(json["maps"].size(), 15u);
  EXPECT_EQ(json["maps"][0]["matrix"].size(), 48u);
  EXPECT_EQ(json["maps"][0]["matrix"][0].size(), 48u);
  const std::string csv = slurp(root / "one" / "attn_L1_H1.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')).find("field,1,2,3"), 0u);
  fs::remove_all(root);
}

TEST(Attention, RequiresWritingSubnetwork) {
  const auto docs = generate_synthetic({SyntheticKind::layout, 4, 3, "a"});
  ModelConfig cfg;
  cfg.active = Subnets::parse("LO");
  Classifier<float> clf(cfg, Preprocessor::fit(docs));
  EXPECT_THROW(capture_attention(clf, docs[0]), ConfigError);
}
