#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coqan/params.hpp"
#include "coqan/tape.hpp"

namespace coqan::nn {

using Rng = std::mt19937_64;

template <class T>
struct Linear {
  Parameter<T>* w = nullptr;
  Parameter<T>* b = nullptr;  // null when declared without bias

  static Linear declare(ParameterStore<T>& s, const std::string& name, std::size_t in,
                        std::size_t out, Group g, bool bias = true) {
    Linear l;
    l.w = &s.declare(name + ".W", {in, out}, g, InitKind::gaussian);
    if (bias) l.b = &s.declare(name + ".b", {out}, g, InitKind::zeros);
    return l;
  }

  std::size_t in_dim() const { return static_cast<std::size_t>(w->value.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(w->value.cols()); }

  Var<T> operator()(Var<T> x) const {
    Tape<T>& t = *x.tape;
    return b ? affine(x, t.param(*w), t.param(*b)) : matmul(x, t.param(*w));
  }
};

template <class T>
struct LayerNorm {
  Parameter<T>* gain = nullptr;
  Parameter<T>* bias = nullptr;

  static LayerNorm declare(ParameterStore<T>& s, const std::string& name, std::size_t dim,
                           Group g) {
    return {&s.declare(name + ".gain", {dim}, g, InitKind::ones),
            &s.declare(name + ".bias", {dim}, g, InitKind::zeros)};
  }

  Var<T> operator()(Var<T> x) const {
    Tape<T>& t = *x.tape;
    return layer_norm(x, t.param(*gain), t.param(*bias));
  }
};

// Gated recurrent unit with h_0 = 0:
//   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + bn + (r * h) Un)
//   h' = z * h + (1 - z) * n
// W packs [Wz | Wr | Wn], b packs [bz | br | bn], U_zr packs [Uz | Ur].
template <class T>
struct Gru {
  Parameter<T>* w = nullptr;
  Parameter<T>* b = nullptr;
  Parameter<T>* u_zr = nullptr;
  Parameter<T>* u_n = nullptr;
  std::size_t hidden = 0;

  static Gru declare(ParameterStore<T>& s, const std::string& name, std::size_t in,
                     std::size_t hidden, Group g) {
    Gru r;
    r.hidden = hidden;
    r.w = &s.declare(name + ".W", {in, 3 * hidden}, g, InitKind::gaussian);
    r.b = &s.declare(name + ".b", {3 * hidden}, g, InitKind::zeros);
    r.u_zr = &s.declare(name + ".U_zr", {hidden, 2 * hidden}, g, InitKind::gaussian);
    r.u_n = &s.declare(name + ".U_n", {hidden, hidden}, g, InitKind::gaussian);
    return r;
  }

  // All hidden states h_1..h_M, each 1 x hidden.
  std::vector<Var<T>> sequence(Var<T> inputs) const {
    if (inputs.rows() == 0) throw ShapeError("gru_sequence: empty sequence");
    Tape<T>& t = *inputs.tape;
    const auto h_dim = static_cast<Eigen::Index>(hidden);
    Var<T> xw = affine(inputs, t.param(*w), t.param(*b));
    Var<T> uzr = t.param(*u_zr);
    Var<T> un = t.param(*u_n);
    Var<T> h = t.constant(Matrix<T>::Zero(1, h_dim));
    std::vector<Var<T>> states;
    states.reserve(static_cast<std::size_t>(inputs.rows()));
    for (Eigen::Index step = 0; step < inputs.rows(); ++step) {
      Var<T> x = slice_rows(xw, step, 1);
      Var<T> gates = sigmoid(add(slice_cols(x, 0, 2 * h_dim), matmul(h, uzr)));
      Var<T> z = slice_cols(gates, 0, h_dim);
      Var<T> r = slice_cols(gates, h_dim, h_dim);
      Var<T> n = tanh(add(slice_cols(x, 2 * h_dim, h_dim), matmul(mul(r, h), un)));
      h = add(n, mul(z, sub(h, n)));
      states.push_back(h);
    }
    return states;
  }
};

// Valid 1-D convolution per window size, ReLU, max-over-time pooling, and
// concatenation of the pooled values of every filter.
template <class T>
struct ConvMaxPool {
  struct Bank {
    std::size_t window = 0;
    Parameter<T>* w = nullptr;  // (window * input_dim) x filters
    Parameter<T>* b = nullptr;  // one bias per filter
  };
  std::vector<Bank> banks;

  static ConvMaxPool declare(ParameterStore<T>& s, const std::string& name,
                             std::size_t input_dim, const std::vector<std::size_t>& windows,
                             std::size_t filters_per_window, Group g) {
    ConvMaxPool c;
    for (auto h : windows) {
      const std::string n = name + ".k" + std::to_string(h);
      c.banks.push_back({h, &s.declare(n + ".W", {h * input_dim, filters_per_window}, g,
                                       InitKind::gaussian),
                         &s.declare(n + ".b", {filters_per_window}, g, InitKind::zeros)});
    }
    return c;
  }

  std::size_t out_dim() const {
    std::size_t n = 0;
    for (const auto& b : banks) n += static_cast<std::size_t>(b.w->value.cols());
    return n;
  }

  Var<T> operator()(Var<T> inputs) const {
    if (inputs.rows() == 0) throw ShapeError("conv1d_maxpool: empty sequence");
    Tape<T>& t = *inputs.tape;
    std::vector<Var<T>> pooled;
    for (const auto& bank : banks) {
      Var<T> windows = im2col(inputs, static_cast<Eigen::Index>(bank.window));
      pooled.push_back(max_rows(relu(affine(windows, t.param(*bank.w), t.param(*bank.b)))));
    }
    return concat_cols(pooled);
  }
};

// Multi-head scaled dot-product self-attention.
template <class T>
struct MultiHeadAttention {
  Linear<T> q, k, v, o;
  std::size_t heads = 1;

  static MultiHeadAttention declare(ParameterStore<T>& s, const std::string& name,
                                    std::size_t d_model, std::size_t heads, Group g) {
    if (heads == 0 || d_model % heads != 0)
      throw ConfigError(name + ": d_model " + std::to_string(d_model) +
                        " not divisible by heads " + std::to_string(heads));
    MultiHeadAttention a;
    a.q = Linear<T>::declare(s, name + ".q", d_model, d_model, g);
    a.k = Linear<T>::declare(s, name + ".k", d_model, d_model, g);
    a.v = Linear<T>::declare(s, name + ".v", d_model, d_model, g);
    a.o = Linear<T>::declare(s, name + ".o", d_model, d_model, g);
    a.heads = heads;
    return a;
  }

  Var<T> operator()(Var<T> x, std::span<const std::uint8_t> mask,
                    std::vector<Matrix<T>>* attention = nullptr) const {
    const auto d = x.cols();
    const auto dh = d / static_cast<Eigen::Index>(heads);
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    Var<T> qv = q(x), kv = k(x), vv = v(x);
    std::vector<Var<T>> outs;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      Var<T> scores = scale(matmul_nt(slice_cols(qv, off, dh), slice_cols(kv, off, dh)), inv_sqrt);
      Var<T> a = softmax_rows(scores, mask, mask);
      if (attention) attention->push_back(a.value());
      outs.push_back(matmul(a, slice_cols(vv, off, dh)));
    }
    return o(heads == 1 ? outs[0] : concat_cols(outs));
  }
};

// Post-norm encoder block: LN(x + Attn(x)), then LN(y + FF(y)) with a GELU
// feed-forward.
template <class T>
struct TransformerBlock {
  MultiHeadAttention<T> attn;
  LayerNorm<T> ln1, ln2;
  Linear<T> ff1, ff2;

  static TransformerBlock declare(ParameterStore<T>& s, const std::string& name,
                                  std::size_t d_model, std::size_t heads, std::size_t d_ff,
                                  Group g) {
    TransformerBlock b;
    b.attn = MultiHeadAttention<T>::declare(s, name + ".attn", d_model, heads, g);
    b.ln1 = LayerNorm<T>::declare(s, name + ".ln1", d_model, g);
    b.ff1 = Linear<T>::declare(s, name + ".ff1", d_model, d_ff, g);
    b.ff2 = Linear<T>::declare(s, name + ".ff2", d_ff, d_model, g);
    b.ln2 = LayerNorm<T>::declare(s, name + ".ln2", d_model, g);
    return b;
  }

  // mask: one entry per row, nonzero = real position. Empty = all real.
  Var<T> operator()(Var<T> x, std::span<const std::uint8_t> mask, bool training, double p_drop,
                    Rng& rng, std::vector<Matrix<T>>* attention = nullptr) const {
    if (!mask.empty()) {
      bool any = false;
      for (auto m : mask) any = any || m;
      if (!any) throw ShapeError("transformer_block: all positions masked");
    }
    Var<T> a = dropout(attn(x, mask, attention), p_drop, training, rng);
    Var<T> y = ln1(add(x, a));
    Var<T> f = dropout(ff2(gelu(ff1(y))), p_drop, training, rng);
    return ln2(add(y, f));
  }
};

}  // namespace coqan::nn
