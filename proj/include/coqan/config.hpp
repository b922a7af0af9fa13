#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/article.hpp"
#include "coqan/error.hpp"

namespace coqan {

struct LayoutConfig {
  std::size_t input_dim = 13;
  std::size_t gru_hidden = 128;
  std::vector<std::size_t> windows = {2, 5, 10, 20};
  std::size_t filters_per_window = 25;

  std::size_t output_dim() const { return gru_hidden + windows.size() * filters_per_window; }
};

struct WritingConfig {
  std::size_t embed_dim = 128;
  std::size_t heads = 4;
  std::size_t head_dim = 64;
  std::size_t layers = 3;
  std::size_t num_categories = 64;

  std::size_t layer_dim() const { return heads * head_dim; }
};

struct TextEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t layers_sent = 2;
  std::size_t heads_sent = 4;
  std::size_t d_model_sent = 64;
  std::size_t d_ff_sent = 256;
  std::size_t layers_doc = 2;
  std::size_t heads_doc = 4;
  std::size_t d_model_doc = 64;
  std::size_t d_ff_doc = 256;
  std::size_t max_tokens = kMaxTokens;
  std::size_t max_sentences = kMaxSentences;

  void validate() const {
    if (heads_sent == 0 || d_model_sent % heads_sent != 0)
      throw ConfigError("text: d_model_sent must be divisible by heads_sent");
    if (heads_doc == 0 || d_model_doc % heads_doc != 0)
      throw ConfigError("text: d_model_doc must be divisible by heads_doc");
    if (max_tokens == 0 || max_sentences == 0)
      throw ConfigError("text: max_tokens and max_sentences must be positive");
  }
};

struct FusionConfig {
  std::size_t gate_layout = 64;
  std::size_t gate_writing = 64;
  std::size_t gate_text = 128;
};

// Which subnetworks feed the fusion cascade.
struct Subnets {
  bool layout = true;
  bool writing = true;
  bool text = true;

  bool any() const { return layout || writing || text; }
  bool all() const { return layout && writing && text; }

  // "LO,WC,TS" in any order; "all" / "full" select every subnetwork.
  static Subnets parse(const std::string& s) {
    Subnets out{false, false, false};
    if (s == "all" || s == "full") return {};
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto end = s.find(',', start);
      const std::string tok = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
      if (tok == "LO") out.layout = true;
      else if (tok == "WC") out.writing = true;
      else if (tok == "TS") out.text = true;
      else if (!tok.empty()) throw ConfigError("unknown subnetwork '" + tok + "' (expected LO, WC, TS)");
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (!out.any()) throw ConfigError("empty subnetwork subset");
    return out;
  }

  std::string str() const {
    std::string s;
    auto add = [&](bool on, const char* n) {
      if (!on) return;
      if (!s.empty()) s += ',';
      s += n;
    };
    add(layout, "LO");
    add(writing, "WC");
    add(text, "TS");
    return s;
  }

  // The seven non-empty subsets, singles first.
  static std::vector<Subnets> all_subsets() {
    return {{true, false, false}, {false, true, false}, {false, false, true},
            {true, true, false},  {true, false, true},  {false, true, true},
            {true, true, true}};
  }

  bool operator==(const Subnets&) const = default;
};

struct ModelConfig {
  LayoutConfig layout;
  WritingConfig writing;
  TextEncoderConfig text;
  FusionConfig fusion;
  Subnets active;
  double init_std = 0.01;

  std::size_t fusion_dim() const {
    return (active.layout ? fusion.gate_layout : 0) + (active.writing ? fusion.gate_writing : 0) +
           (active.text ? fusion.gate_text : 0);
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"layout_gru_hidden", c.layout.gru_hidden},
      {"layout_windows", c.layout.windows},
      {"layout_filters_per_window", c.layout.filters_per_window},
      {"writing_embed_dim", c.writing.embed_dim},
      {"writing_heads", c.writing.heads},
      {"writing_head_dim", c.writing.head_dim},
      {"writing_layers", c.writing.layers},
      {"writing_num_categories", c.writing.num_categories},
      {"text_vocab_size", c.text.vocab_size},
      {"text_layers_sent", c.text.layers_sent},
      {"text_heads_sent", c.text.heads_sent},
      {"text_d_model_sent", c.text.d_model_sent},
      {"text_d_ff_sent", c.text.d_ff_sent},
      {"text_layers_doc", c.text.layers_doc},
      {"text_heads_doc", c.text.heads_doc},
      {"text_d_model_doc", c.text.d_model_doc},
      {"text_d_ff_doc", c.text.d_ff_doc},
      {"text_max_tokens", c.text.max_tokens},
      {"text_max_sentences", c.text.max_sentences},
      {"fusion_gate_layout", c.fusion.gate_layout},
      {"fusion_gate_writing", c.fusion.gate_writing},
      {"fusion_gate_text", c.fusion.gate_text},
      {"subnets", c.active.str()},
      {"init_std", c.init_std},
  };
}

// Reads the flat model keys present in j, leaving the others untouched.
inline void update_from_json(ModelConfig& c, const nlohmann::json& j) {
  auto get = [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) it->get_to(field);
  };
  get("layout_gru_hidden", c.layout.gru_hidden);
  get("layout_windows", c.layout.windows);
  get("layout_filters_per_window", c.layout.filters_per_window);
  get("writing_embed_dim", c.writing.embed_dim);
  get("writing_heads", c.writing.heads);
  get("writing_head_dim", c.writing.head_dim);
  get("writing_layers", c.writing.layers);
  get("writing_num_categories", c.writing.num_categories);
  get("text_vocab_size", c.text.vocab_size);
  get("text_layers_sent", c.text.layers_sent);
  get("text_heads_sent", c.text.heads_sent);
  get("text_d_model_sent", c.text.d_model_sent);
  get("text_d_ff_sent", c.text.d_ff_sent);
  get("text_layers_doc", c.text.layers_doc);
  get("text_heads_doc", c.text.heads_doc);
  get("text_d_model_doc", c.text.d_model_doc);
  get("text_d_ff_doc", c.text.d_ff_doc);
  get("text_max_tokens", c.text.max_tokens);
  get("text_max_sentences", c.text.max_sentences);
  get("fusion_gate_layout", c.fusion.gate_layout);
  get("fusion_gate_writing", c.fusion.gate_writing);
  get("fusion_gate_text", c.fusion.gate_text);
  get("init_std", c.init_std);
  if (auto it = j.find("subnets"); it != j.end()) c.active = Subnets::parse(it->get<std::string>());
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  update_from_json(c, j);
}

}  // namespace coqan
