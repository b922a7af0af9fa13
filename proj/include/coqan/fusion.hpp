#pragma once

#include <optional>
#include <vector>

#include "coqan/config.hpp"
#include "coqan/layers.hpp"
#include "coqan/text_net.hpp"

namespace coqan {

// Per-subnetwork affine gates (no activation), cascaded into h_f, followed by
// a single-logit sigmoid classifier.
template <class T>
class FusionHead {
 public:
  FusionHead() = default;

  FusionHead(nn::ParameterStore<T>& s, const FusionConfig& cfg, const Subnets& active,
             std::size_t layout_dim, std::size_t writing_dim, std::size_t text_dim)
      : active_(active) {
    if (!active.any()) throw ConfigError("fusion: empty subnetwork subset");
    const auto g = nn::Group::other;
    if (active.layout) gate_layout_ = nn::Linear<T>::declare(s, "fusion.gate_l", layout_dim, cfg.gate_layout, g);
    if (active.writing) gate_writing_ = nn::Linear<T>::declare(s, "fusion.gate_w", writing_dim, cfg.gate_writing, g);
    if (active.text) gate_text_ = nn::Linear<T>::declare(s, "fusion.gate_d", text_dim, cfg.gate_text, g);
    std::size_t dim = 0;
    for (const auto* gate : {&gate_layout_, &gate_writing_, &gate_text_})
      if (*gate) dim += (*gate)->out_dim();
    head_ = nn::Linear<T>::declare(s, "fusion.head", dim, 1, g);
  }

  std::size_t fused_dim() const { return head_.in_dim(); }
  const nn::Linear<T>& head() const { return head_; }

  // h_f = gate_l(h_l) | gate_w(h_w) | gate_d(h_d) over the active parts.
  nn::Var<T> fuse(std::optional<nn::Var<T>> h_l, std::optional<nn::Var<T>> h_w,
                  std::optional<nn::Var<T>> h_d, const ForwardOptions& opt = {}) const {
    std::vector<nn::Var<T>> parts;
    auto take = [&](const std::optional<nn::Linear<T>>& gate, const std::optional<nn::Var<T>>& h,
                    const char* name) {
      if (!gate) return;
      if (!h) throw ValidationError(std::string("fusion: missing ") + name + " output");
      parts.push_back((*gate)(nn::dropout(*h, opt.dropout_other, opt.training, opt.generator())));
    };
    take(gate_layout_, h_l, "layout subnetwork");
    take(gate_writing_, h_w, "writing subnetwork");
    take(gate_text_, h_d, "text subnetwork");
    return parts.size() == 1 ? parts[0] : nn::concat_cols(parts);
  }

  // Probability of the high-quality class, 1 x 1.
  nn::Var<T> predict(nn::Var<T> h_f) const { return nn::sigmoid(head_(h_f)); }

 private:
  Subnets active_;
  std::optional<nn::Linear<T>> gate_layout_, gate_writing_, gate_text_;
  nn::Linear<T> head_;
};

// Threshold rule for the predicted label; a tie at 0.5 is high quality.
inline int label_from_probability(double p) { return p >= 0.5 ? 1 : 0; }

}  // namespace coqan
