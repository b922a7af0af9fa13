#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/article.hpp"
#include "coqan/config.hpp"
#include "coqan/features.hpp"
#include "coqan/fusion.hpp"
#include "coqan/layout_net.hpp"
#include "coqan/params.hpp"
#include "coqan/text_net.hpp"
#include "coqan/writing_net.hpp"

namespace coqan {

// Everything the network consumes for one article.
template <class T>
struct ModelInput {
  std::string id;
  nn::Matrix<T> layout;                       // M x 13
  FeatureRecord features;                     // normalized numerical fields
  std::vector<TokenizedSentence> sentences;   // title first
  std::optional<int> label;
};

template <class T>
struct ForwardTrace {
  nn::Var<T> probability;  // 1 x 1
  nn::Var<T> h_f;
  std::optional<nn::Var<T>> h_l, h_w, h_d;
};

// The joint network: active subnetworks feeding the fusion head. Parameters
// are declared in the order layout, writing, text, fusion.
template <class T>
class CoqanModel {
 public:
  explicit CoqanModel(const ModelConfig& cfg) : cfg_(cfg) {
    if (!cfg.active.any()) throw ConfigError("model: empty subnetwork subset");
    if (cfg.active.layout) layout_.emplace(store_, cfg.layout);
    if (cfg.active.writing) writing_.emplace(store_, cfg.writing);
    if (cfg.active.text) text_.emplace(store_, cfg.text);
    fusion_ = FusionHead<T>(store_, cfg.fusion, cfg.active, layout_ ? layout_->output_dim() : 0,
                            writing_ ? writing_->output_dim() : 0, text_ ? text_->output_dim() : 0);
  }

  CoqanModel(CoqanModel&&) noexcept = default;
  CoqanModel& operator=(CoqanModel&&) noexcept = default;

  void initialize(std::uint64_t seed) { store_.initialize(seed, cfg_.init_std); }

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore<T>& params() { return store_; }
  const nn::ParameterStore<T>& params() const { return store_; }
  const std::optional<LayoutNet<T>>& layout() const { return layout_; }
  const std::optional<WritingNet<T>>& writing() const { return writing_; }
  const std::optional<TextNet<T>>& text() const { return text_; }
  const FusionHead<T>& fusion() const { return fusion_; }

  ForwardTrace<T> forward(nn::Tape<T>& t, const ModelInput<T>& in, const ForwardOptions& opt = {},
                          WritingAttention<T>* capture = nullptr) const {
    ForwardTrace<T> tr;
    if (layout_) tr.h_l = layout_->forward(t, in.layout);
    if (writing_) tr.h_w = writing_->forward(t, in.features, capture);
    if (text_) tr.h_d = text_->forward(t, in.sentences, opt);
    tr.h_f = fusion_.fuse(tr.h_l, tr.h_w, tr.h_d, opt);
    tr.probability = fusion_.predict(tr.h_f);
    return tr;
  }

  // Inference-mode probability of the high-quality class.
  double probability(const ModelInput<T>& in, WritingAttention<T>* capture = nullptr) const {
    nn::Tape<T> t;
    return static_cast<double>(forward(t, in, {}, capture).probability.value()(0, 0));
  }

 private:
  ModelConfig cfg_;
  nn::ParameterStore<T> store_;
  std::optional<LayoutNet<T>> layout_;
  std::optional<WritingNet<T>> writing_;
  std::optional<TextNet<T>> text_;
  FusionHead<T> fusion_;
};

// Corpus-fitted preprocessing: vocabulary, keyword document frequencies and
// feature normalization, all fitted on the training split.
struct Preprocessor {
  Vocabulary vocab;
  KeywordModel keywords;
  NormStats norm;
  LayoutOptions layout;
  std::size_t max_tokens = kMaxTokens;
  std::size_t max_sentences = kMaxSentences;

  static Preprocessor fit(const std::vector<ArticleDocument>& train, std::size_t max_tokens = kMaxTokens,
                          std::size_t max_sentences = kMaxSentences,
                          TokenizerMode mode = TokenizerMode::mixed) {
    if (train.empty()) throw ConfigError("preprocessing: empty training split");
    Preprocessor p;
    p.max_tokens = max_tokens;
    p.max_sentences = max_sentences;
    std::vector<ArticleDocument> split;
    split.reserve(train.size());
    for (const auto& d : train)
      split.push_back(d.sentences.empty() ? split_sentences(d, max_sentences) : d);
    p.vocab = Vocabulary::build(split, 1, mode);
    p.keywords = KeywordModel::fit(train);
    std::vector<FeatureRecord> raw;
    raw.reserve(train.size());
    for (const auto& d : split) raw.push_back(p.raw_features(d));
    p.norm = fit_norm_stats(raw);
    return p;
  }

  FeatureContext feature_context() const {
    FeatureContext ctx;
    ctx.keywords = &keywords;
    return ctx;
  }

  FeatureRecord raw_features(const ArticleDocument& doc) const {
    return extract_writing_features(doc, feature_context());
  }

  template <class T>
  ModelInput<T> prepare(const ArticleDocument& doc) const {
    ArticleDocument d = doc.sentences.empty() ? split_sentences(doc, max_sentences) : doc;
    if (d.sentences.size() > max_sentences) d.sentences.resize(max_sentences);
    d = tokenize(std::move(d), vocab, max_tokens);
    ModelInput<T> in;
    in.id = d.id;
    in.layout = layout_matrix<T>(extract_layout_vectors(d, layout));
    in.features = apply_norm(raw_features(d), norm);
    in.sentences = std::move(d.tokens);
    in.label = d.label;
    return in;
  }

  template <class T>
  std::vector<ModelInput<T>> prepare_all(const std::vector<ArticleDocument>& docs) const {
    std::vector<ModelInput<T>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(prepare<T>(d));
    return out;
  }

  nlohmann::json to_json() const {
    return {{"vocab", vocab.tokens()},
            {"tokenizer", vocab.mode() == TokenizerMode::mixed ? "mixed" : "character"},
            {"keywords", keywords.to_json()},
            {"norm", norm.to_json()},
            {"viewport_px", layout.viewport_px},
            {"max_tokens", max_tokens},
            {"max_sentences", max_sentences}};
  }

  static Preprocessor from_json(const nlohmann::json& j) {
    Preprocessor p;
    const auto mode = j.at("tokenizer").get<std::string>() == "mixed" ? TokenizerMode::mixed
                                                                       : TokenizerMode::character;
    p.vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>(), mode);
    p.keywords = KeywordModel::from_json(j.at("keywords"));
    p.norm = NormStats::from_json(j.at("norm"));
    p.layout.viewport_px = j.at("viewport_px").get<double>();
    p.max_tokens = j.at("max_tokens").get<std::size_t>();
    p.max_sentences = j.at("max_sentences").get<std::size_t>();
    return p;
  }
};

struct PredictionOutput {
  std::string id;
  double probability = 0.0;
  int label = 0;
  std::optional<std::string> attention_path;

  nlohmann::json to_json() const {
    nlohmann::json j{{"id", id}, {"probability", probability}, {"label", label}};
    if (attention_path) j["attention_path"] = *attention_path;
    return j;
  }
};

// A trained model bundled with its preprocessing.
template <class T>
class Classifier {
 public:
  Classifier(ModelConfig cfg, Preprocessor pre)
      : pre_(std::move(pre)), model_(with_vocab(std::move(cfg), pre_)) {}

  const Preprocessor& preprocessor() const { return pre_; }
  CoqanModel<T>& model() { return model_; }
  const CoqanModel<T>& model() const { return model_; }

  ModelInput<T> prepare(const ArticleDocument& doc) const { return pre_.prepare<T>(doc); }

  double probability(const ArticleDocument& doc) const { return model_.probability(prepare(doc)); }

  PredictionOutput predict(const ArticleDocument& doc, WritingAttention<T>* capture = nullptr) const {
    PredictionOutput out;
    out.id = doc.id;
    out.probability = model_.probability(prepare(doc), capture);
    out.label = label_from_probability(out.probability);
    return out;
  }

  std::string encode(nlohmann::json extra = nlohmann::json::object()) const {
    nlohmann::json meta = std::move(extra);
    meta["model"] = model_.config();
    meta["preprocessing"] = pre_.to_json();
    return nn::encode_checkpoint(model_.params(), meta);
  }

  void save(const std::string& path, nlohmann::json extra = nlohmann::json::object()) const {
    nn::write_file(path, encode(std::move(extra)));
  }

  static Classifier decode(std::string_view bytes) {
    const nn::Checkpoint ck = nn::decode_checkpoint(bytes);
    Classifier c(ck.meta.at("model").get<ModelConfig>(), Preprocessor::from_json(ck.meta.at("preprocessing")));
    nn::load_into(c.model_.params(), ck);
    c.meta_ = ck.meta;
    return c;
  }

  static Classifier load(const std::string& path) { return decode(nn::read_file(path)); }

  const nlohmann::json& meta() const { return meta_; }

 private:
  static ModelConfig with_vocab(ModelConfig cfg, const Preprocessor& pre) {
    cfg.text.vocab_size = pre.vocab.size();
    cfg.text.max_tokens = pre.max_tokens;
    cfg.text.max_sentences = pre.max_sentences;
    return cfg;
  }

  Preprocessor pre_;
  CoqanModel<T> model_;
  nlohmann::json meta_;
};

}  // namespace coqan
