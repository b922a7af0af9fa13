#pragma once

#include <string>
#include <vector>

#include "coqan/config.hpp"
#include "coqan/features.hpp"
#include "coqan/layers.hpp"

namespace coqan {

// Attention coefficients captured during a forward pass, indexed
// [layer][head] -> fields x fields.
template <class T>
using WritingAttention = std::vector<std::vector<nn::Matrix<T>>>;

// One feature-interaction layer over n field rows:
//   psi^h = (E Wq^h)(E Wk^h)^T            (plain inner product, no scaling)
//   a^h   = softmax_rows(psi^h)
//   r^h   = a^h (E Wv^h)
//   out   = ReLU([r^1 | ... | r^H] + E Wres)
template <class T>
struct InteractingLayer {
  nn::Parameter<T>* wq = nullptr;  // d_in x (heads * head_dim)
  nn::Parameter<T>* wk = nullptr;
  nn::Parameter<T>* wv = nullptr;
  nn::Parameter<T>* wres = nullptr;
  std::size_t heads = 0;
  std::size_t head_dim = 0;

  static InteractingLayer declare(nn::ParameterStore<T>& s, const std::string& name,
                                  std::size_t d_in, std::size_t heads, std::size_t head_dim,
                                  nn::Group g = nn::Group::other) {
    InteractingLayer l;
    l.heads = heads;
    l.head_dim = head_dim;
    const std::size_t d_out = heads * head_dim;
    l.wq = &s.declare(name + ".Wq", {d_in, d_out}, g, nn::InitKind::gaussian);
    l.wk = &s.declare(name + ".Wk", {d_in, d_out}, g, nn::InitKind::gaussian);
    l.wv = &s.declare(name + ".Wv", {d_in, d_out}, g, nn::InitKind::gaussian);
    l.wres = &s.declare(name + ".Wres", {d_in, d_out}, g, nn::InitKind::gaussian);
    return l;
  }

  nn::Var<T> operator()(nn::Var<T> rows, std::vector<nn::Matrix<T>>* attention = nullptr) const {
    nn::Tape<T>& t = *rows.tape;
    const auto dh = static_cast<Eigen::Index>(head_dim);
    nn::Var<T> q = nn::matmul(rows, t.param(*wq));
    nn::Var<T> k = nn::matmul(rows, t.param(*wk));
    nn::Var<T> v = nn::matmul(rows, t.param(*wv));
    std::vector<nn::Var<T>> per_head;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      nn::Var<T> a = nn::softmax_rows(nn::matmul_nt(nn::slice_cols(q, off, dh), nn::slice_cols(k, off, dh)));
      if (attention) attention->push_back(a.value());
      per_head.push_back(nn::matmul(a, nn::slice_cols(v, off, dh)));
    }
    nn::Var<T> combined = heads == 1 ? per_head[0] : nn::concat_cols(per_head);
    return nn::relu(nn::add(combined, nn::matmul(rows, t.param(*wres))));
  }
};

template <class T>
class WritingNet {
 public:
  static constexpr std::size_t kNumerical = kNumFeatures - 1;

  WritingNet() = default;

  WritingNet(nn::ParameterStore<T>& s, const WritingConfig& cfg) : cfg_(cfg) {
    field_embedding_ = &s.declare("writing.field_embedding", {kNumerical, cfg.embed_dim},
                                  nn::Group::other, nn::InitKind::gaussian);
    category_table_ = &s.declare("writing.category_table", {cfg.num_categories, cfg.embed_dim},
                                 nn::Group::other, nn::InitKind::gaussian);
    std::size_t d_in = cfg.embed_dim;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      layers_.push_back(InteractingLayer<T>::declare(s, "writing.layer" + std::to_string(l), d_in,
                                                     cfg.heads, cfg.head_dim));
      d_in = cfg.layer_dim();
    }
  }

  const WritingConfig& config() const { return cfg_; }
  std::size_t output_dim() const {
    return kNumFeatures * (cfg_.layers == 0 ? cfg_.embed_dim : cfg_.layer_dim());
  }
  const std::vector<InteractingLayer<T>>& layers() const { return layers_; }

  // 48 x embed_dim: row i = value_i * v_i for numerical fields, the category
  // table row for field 48.
  nn::Var<T> embed(nn::Tape<T>& t, const FeatureRecord& record) const {
    const auto cat = record.category();
    if (cat < 0 || cat >= static_cast<std::int64_t>(cfg_.num_categories))
      throw ValidationError("category id " + std::to_string(cat) + " outside table of " +
                            std::to_string(cfg_.num_categories));
    std::vector<T> values(kNumerical);
    for (std::size_t i = 0; i < kNumerical; ++i) values[i] = static_cast<T>(record.values[i]);
    nn::Var<T> numeric = nn::scale_rows(t.param(*field_embedding_), std::move(values));
    const std::int32_t id = static_cast<std::int32_t>(cat);
    nn::Var<T> category = nn::embedding_lookup(t.param(*category_table_), std::span<const std::int32_t>(&id, 1));
    return nn::concat_rows<T>({numeric, category});
  }

  // Returns 48 x layer_dim (the stacked layer output before flattening).
  nn::Var<T> field_rows(nn::Tape<T>& t, const FeatureRecord& record,
                        WritingAttention<T>* capture = nullptr) const {
    nn::Var<T> rows = embed(t, record);
    if (capture) capture->assign(layers_.size(), {});
    for (std::size_t l = 0; l < layers_.size(); ++l)
      rows = layers_[l](rows, capture ? &(*capture)[l] : nullptr);
    return rows;
  }

  // h_w: the final field rows concatenated, 1 x 48 * layer_dim.
  nn::Var<T> forward(nn::Tape<T>& t, const FeatureRecord& record,
                     WritingAttention<T>* capture = nullptr) const {
    return nn::flatten(field_rows(t, record, capture));
  }

 private:
  WritingConfig cfg_;
  nn::Parameter<T>* field_embedding_ = nullptr;
  nn::Parameter<T>* category_table_ = nullptr;
  std::vector<InteractingLayer<T>> layers_;
};

}  // namespace coqan
