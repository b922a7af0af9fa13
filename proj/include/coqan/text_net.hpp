#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "coqan/article.hpp"
#include "coqan/config.hpp"
#include "coqan/layers.hpp"

namespace coqan {

// Dropout settings for a forward pass. Inference uses the defaults.
struct ForwardOptions {
  bool training = false;
  nn::Rng* rng = nullptr;
  double dropout_text = 0.1;
  double dropout_other = 0.2;

  nn::Rng& generator() const {
    static thread_local nn::Rng fallback(0);
    return rng ? *rng : fallback;
  }
};

// Two-level encoder. The sentence encoder reads [HEAD] + tokens with learned
// positions and returns the HEAD output. The document encoder runs one
// transformer stack over (s_1..s_N) and an independently parameterized one
// over (s_N..s_1); h_d is their position-1 outputs concatenated.
template <class T>
class TextNet {
 public:
  TextNet() = default;

  TextNet(nn::ParameterStore<T>& s, const TextEncoderConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    if (cfg.vocab_size <= 3) throw ConfigError("text: vocabulary is empty");
    const auto g = nn::Group::text_encoder;
    token_embedding_ = &s.declare("text.sent.token_embedding", {cfg.vocab_size, cfg.d_model_sent}, g,
                                  nn::InitKind::gaussian);
    position_embedding_ = &s.declare("text.sent.position_embedding", {cfg.max_tokens, cfg.d_model_sent},
                                     g, nn::InitKind::gaussian);
    embedding_norm_ = nn::LayerNorm<T>::declare(s, "text.sent.embedding_ln", cfg.d_model_sent, g);
    for (std::size_t l = 0; l < cfg.layers_sent; ++l)
      sentence_blocks_.push_back(nn::TransformerBlock<T>::declare(
          s, "text.sent.block" + std::to_string(l), cfg.d_model_sent, cfg.heads_sent, cfg.d_ff_sent, g));
    if (cfg.d_model_sent != cfg.d_model_doc)
      doc_projection_ = nn::Linear<T>::declare(s, "text.doc.projection", cfg.d_model_sent, cfg.d_model_doc, g);
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string prefix = std::string("text.doc.") + dir;
      auto& stack = dir[0] == 'f' ? forward_blocks_ : backward_blocks_;
      (dir[0] == 'f' ? forward_position_ : backward_position_) =
          &s.declare(prefix + ".position_embedding", {cfg.max_sentences, cfg.d_model_doc}, g,
                     nn::InitKind::gaussian);
      for (std::size_t l = 0; l < cfg.layers_doc; ++l)
        stack.push_back(nn::TransformerBlock<T>::declare(s, prefix + ".block" + std::to_string(l),
                                                         cfg.d_model_doc, cfg.heads_doc, cfg.d_ff_doc, g));
    }
  }

  const TextEncoderConfig& config() const { return cfg_; }
  std::size_t output_dim() const { return 2 * cfg_.d_model_doc; }

  // Sentence vector s^r (1 x d_model_sent). With trim = true only the
  // unmasked prefix is fed to the encoder; otherwise the padded sequence
  // runs with its mask. Both give the same HEAD output.
  nn::Var<T> encode_sentence(nn::Tape<T>& t, const TokenizedSentence& s, const ForwardOptions& opt = {},
                             bool trim = true, std::vector<nn::Matrix<T>>* attention = nullptr) const {
    if (s.length == 0 || s.ids.empty()) throw ValidationError("encode_sentence: all-PAD sentence");
    if (s.ids.size() > cfg_.max_tokens)
      throw ValidationError("encode_sentence: sentence longer than max_tokens");
    const std::size_t n = trim ? s.length : s.ids.size();
    std::vector<std::int32_t> ids(s.ids.begin(), s.ids.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<std::int32_t> positions(n);
    std::iota(positions.begin(), positions.end(), 0);
    std::vector<std::uint8_t> mask;
    if (!trim) {
      mask.assign(n, 0);
      for (std::size_t i = 0; i < s.length && i < n; ++i) mask[i] = 1;
    }
    nn::Var<T> x = nn::add(nn::embedding_lookup(t.param(*token_embedding_), std::span<const std::int32_t>(ids)),
                           nn::embedding_lookup(t.param(*position_embedding_),
                                                std::span<const std::int32_t>(positions)));
    x = nn::dropout(embedding_norm_(x), opt.dropout_text, opt.training, opt.generator());
    for (const auto& block : sentence_blocks_)
      x = block(x, mask, opt.training, opt.dropout_text, opt.generator(), attention);
    return nn::slice_rows(x, 0, 1);
  }

  // h_d (1 x 2 d_model_doc) from N sentence vectors.
  nn::Var<T> encode_document(const std::vector<nn::Var<T>>& sentences, const ForwardOptions& opt = {}) const {
    if (sentences.empty()) throw ValidationError("encode_document: no sentences");
    if (sentences.size() > cfg_.max_sentences)
      throw ValidationError("encode_document: more than max_sentences sentences");
    nn::Tape<T>& t = *sentences[0].tape;
    const auto n = static_cast<Eigen::Index>(sentences.size());
    nn::Var<T> seq = nn::concat_rows(sentences);
    if (doc_projection_) seq = (*doc_projection_)(seq);
    std::vector<Eigen::Index> reversed(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) reversed[static_cast<std::size_t>(i)] = n - 1 - i;
    auto run = [&](nn::Var<T> x, nn::Parameter<T>* pos, const std::vector<nn::TransformerBlock<T>>& stack) {
      x = nn::add(x, nn::slice_rows(t.param(*pos), 0, n));
      for (const auto& block : stack) x = block(x, {}, opt.training, opt.dropout_text, opt.generator());
      return nn::slice_rows(x, 0, 1);
    };
    nn::Var<T> fwd = run(seq, forward_position_, forward_blocks_);
    nn::Var<T> bwd = run(nn::gather_rows(seq, std::move(reversed)), backward_position_, backward_blocks_);
    return nn::concat_cols<T>({fwd, bwd});
  }

  // Sentences beyond max_sentences are dropped (earliest kept).
  nn::Var<T> forward(nn::Tape<T>& t, const std::vector<TokenizedSentence>& sentences,
                     const ForwardOptions& opt = {}) const {
    if (sentences.empty()) throw ValidationError("text_forward: document has no sentences");
    const std::size_t n = std::min(sentences.size(), cfg_.max_sentences);
    std::vector<nn::Var<T>> vecs;
    vecs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) vecs.push_back(encode_sentence(t, sentences[i], opt));
    return encode_document(vecs, opt);
  }

 private:
  TextEncoderConfig cfg_;
  nn::Parameter<T>* token_embedding_ = nullptr;
  nn::Parameter<T>* position_embedding_ = nullptr;
  nn::LayerNorm<T> embedding_norm_;
  std::vector<nn::TransformerBlock<T>> sentence_blocks_;
  std::optional<nn::Linear<T>> doc_projection_;
  nn::Parameter<T>* forward_position_ = nullptr;
  nn::Parameter<T>* backward_position_ = nullptr;
  std::vector<nn::TransformerBlock<T>> forward_blocks_;
  std::vector<nn::TransformerBlock<T>> backward_blocks_;
};

}  // namespace coqan
