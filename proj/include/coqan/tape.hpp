#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "coqan/error.hpp"

namespace coqan::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Group { text_encoder, other };

inline std::string_view to_string(Group g) {
  return g == Group::text_encoder ? "text_encoder" : "other";
}

enum class InitKind { gaussian, zeros, ones };

// A named trainable array. One-dimensional parameters are stored as 1 x n.
template <class T>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  Group group = Group::other;
  InitKind init = InitKind::gaussian;
  Matrix<T> value;
  Matrix<T> grad;
};

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

template <class T>
class Tape;

// Handle to a node on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Matrix<T>& value() const { return tape->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode recording of matrix operations. Each op appends a node that
// holds its value and a closure propagating the node gradient to its inputs.
template <class T>
class Tape {
 public:
  using Mat = Matrix<T>;
  using Backward = std::function<void(Tape&, std::uint32_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Mat m) {
    check_finite(m, "constant");
    nodes_.push_back(Node{std::move(m), {}, {}, false, nullptr});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  // Leaf bound to a parameter; its gradient accumulates straight into
  // Parameter::grad. Repeated calls return the same node.
  Var<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    nodes_.push_back(Node{{}, {}, {}, true, &p});
    const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_nodes_.emplace(&p, id);
    return {this, id};
  }

  // Appends an op result. The closure is dropped when no input needs grad.
  Var<T> push(Mat value, std::initializer_list<Var<T>> inputs, Backward bw,
              const char* op) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(bw) : Backward{},
                          needs, nullptr});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Var<T> push(Mat value, std::span<const Var<T>> inputs, Backward bw, const char* op) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(bw) : Backward{},
                          needs, nullptr});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  const Mat& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

  // Gradient of a node; empty until something flows into it.
  const Mat& grad(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->grad : n.grad;
  }

  template <class Expr>
  void accumulate(std::uint32_t id, const Expr& e) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    Mat& g = n.param ? n.param->grad : n.grad;
    if (g.size() == 0) {
      g = e;
    } else {
      g.noalias() += e;
    }
  }

  // Seeds d(root)/d(root) = 1 for a 1 x 1 root and runs the closures in
  // reverse order.
  void backward(Var<T> root) {
    const Mat& v = value(root.id);
    if (v.rows() != 1 || v.cols() != 1)
      throw ShapeError("backward: root must be 1x1, got " + shape_str(v.rows(), v.cols()));
    backward(root, Mat::Ones(1, 1));
  }

  void backward(Var<T> root, const Mat& seed) {
    accumulate(root.id, seed);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, static_cast<std::uint32_t>(i));
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool needs_grad = false;
    Parameter<T>* param = nullptr;
  };

  static void check_finite(const Mat& m, const char* op) {
    if (!m.allFinite())
      throw NumericError(std::string("non-finite value produced by ") + op);
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Operations

namespace detail {
template <class T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
}
}  // namespace detail

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  Matrix<T> out;
  out.noalias() = a.value() * b.value();
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.needs_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  }, "matmul");
}

// a * b^T
template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  Matrix<T> out;
  out.noalias() = a.value() * b.value().transpose();
  return a.tape->push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id));
    if (t.needs_grad(b.id)) t.accumulate(b.id, g.transpose() * t.value(a.id));
  }, "matmul_nt");
}

// x W + b with b broadcast over rows.
template <class T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols())
    throw ShapeError("affine: shape mismatch x" + shape_str(x.rows(), x.cols()) + " W" +
                     shape_str(w.rows(), w.cols()) + " b" + shape_str(b.rows(), b.cols()));
  Matrix<T> out;
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape->push(std::move(out), {x, w, b}, [x, w, b](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(x.id)) t.accumulate(x.id, g * t.value(w.id).transpose());
    if (t.needs_grad(w.id)) t.accumulate(w.id, t.value(x.id).transpose() * g);
    if (t.needs_grad(b.id)) t.accumulate(b.id, g.colwise().sum());
  }, "affine");
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same(a, b, "add");
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  }, "add");
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same(a, b, "sub");
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    t.accumulate(a.id, g);
    t.accumulate(b.id, -g);
  }, "sub");
}

// Elementwise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same(a, b, "mul");
  return a.tape->push(a.value().cwiseProduct(b.value()), {a, b},
                      [a, b](Tape<T>& t, std::uint32_t self) {
                        const auto& g = t.grad(self);
                        if (t.needs_grad(a.id)) t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
                        if (t.needs_grad(b.id)) t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
                      }, "mul");
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  return a.tape->push(a.value() * s, {a}, [a, s](Tape<T>& t, std::uint32_t self) {
    t.accumulate(a.id, t.grad(self) * s);
  }, "scale");
}

// Adds a 1 x n row to every row of a.
template <class T>
Var<T> add_row(Var<T> a, Var<T> row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(row.rows(), row.cols()));
  Matrix<T> out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape->push(std::move(out), {a, row}, [a, row](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    t.accumulate(a.id, g);
    if (t.needs_grad(row.id)) t.accumulate(row.id, g.colwise().sum());
  }, "add_row");
}

template <class T>
Var<T> relu(Var<T> a) {
  Matrix<T> out = a.value().cwiseMax(T(0));
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::uint32_t self) {
    const auto& x = t.value(a.id);
    t.accumulate(a.id, (x.array() > T(0)).select(t.grad(self), T(0)));
  }, "relu");
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  Matrix<T> out = a.value().unaryExpr([](T v) {
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::uint32_t self) {
    const auto& y = t.value(self);
    t.accumulate(a.id, t.grad(self).cwiseProduct(y.cwiseProduct((T(1) - y.array()).matrix())));
  }, "sigmoid");
}

template <class T>
Var<T> tanh(Var<T> a) {
  Matrix<T> out = a.value().array().tanh().matrix();
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::uint32_t self) {
    const auto& y = t.value(self);
    t.accumulate(a.id, t.grad(self).cwiseProduct((T(1) - y.array().square()).matrix()));
  }, "tanh");
}

// Tanh approximation of GELU.
template <class T>
Var<T> gelu(Var<T> a) {
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T k = static_cast<T>(0.044715);
  Matrix<T> out = a.value().unaryExpr([c, k](T x) {
    return T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x)));
  });
  return a.tape->push(std::move(out), {a}, [a, c, k](Tape<T>& t, std::uint32_t self) {
    Matrix<T> d = t.value(a.id).unaryExpr([c, k](T x) {
      const T u = c * (x + k * x * x * x);
      const T th = std::tanh(u);
      return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * c * (T(1) + T(3) * k * x * x);
    });
    t.accumulate(a.id, t.grad(self).cwiseProduct(d));
  }, "gelu");
}

// Row-wise softmax. key_mask (size cols, nonzero = visible) removes masked
// columns via an additive -inf; rows flagged off in query_mask become all
// zero. Every visible row must keep at least one visible column.
template <class T>
Var<T> softmax_rows(Var<T> a, std::span<const std::uint8_t> key_mask = {},
                    std::span<const std::uint8_t> query_mask = {}) {
  const auto& x = a.value();
  if (!key_mask.empty() && key_mask.size() != static_cast<std::size_t>(x.cols()))
    throw ShapeError("softmax_rows: key mask size " + std::to_string(key_mask.size()) +
                     " vs cols " + std::to_string(x.cols()));
  if (!query_mask.empty() && query_mask.size() != static_cast<std::size_t>(x.rows()))
    throw ShapeError("softmax_rows: query mask size " + std::to_string(query_mask.size()) +
                     " vs rows " + std::to_string(x.rows()));
  Matrix<T> out = Matrix<T>::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!query_mask.empty() && !query_mask[i]) continue;
    T mx = -std::numeric_limits<T>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (key_mask.empty() || key_mask[j]) mx = std::max(mx, x(i, j));
    }
    if (mx == -std::numeric_limits<T>::infinity())
      throw ShapeError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    T sum = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (key_mask.empty() || key_mask[j]) {
        out(i, j) = std::exp(x(i, j) - mx);
        sum += out(i, j);
      }
    }
    out.row(i) /= sum;
  }
  return a.tape->push(std::move(out), {a}, [a](Tape<T>& t, std::uint32_t self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    Matrix<T> dot = g.cwiseProduct(y).rowwise().sum();
    Matrix<T> dx = y.cwiseProduct((g.colwise() - dot.col(0)));
    t.accumulate(a.id, dx);
  }, "softmax_rows");
}

// Inverted dropout. Returns the input node itself when not training.
template <class T, class Rng>
Var<T> dropout(Var<T> a, double p, bool training, Rng& rng) {
  if (!training || p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout: probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const T s = static_cast<T>(1.0 / (1.0 - p));
  Matrix<T> mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : T(0);
  Matrix<T> out = a.value().cwiseProduct(mask);
  return a.tape->push(std::move(out), {a}, [a, mask = std::move(mask)](Tape<T>& t, std::uint32_t self) {
    t.accumulate(a.id, t.grad(self).cwiseProduct(mask));
  }, "dropout");
}

template <class T>
Var<T> concat_cols(std::vector<Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concat_cols: shape mismatch " + shape_str(rows, parts[0].cols()) +
                       " vs " + shape_str(p.rows(), p.cols()));
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  Tape<T>* tape = parts[0].tape;
  return tape->push(std::move(out), std::span<const Var<T>>(parts),
                    [parts](Tape<T>& t, std::uint32_t self) {
                      const auto& g = t.grad(self);
                      Eigen::Index o = 0;
                      for (const auto& p : parts) {
                        const auto c = t.value(p.id).cols();
                        if (t.needs_grad(p.id)) t.accumulate(p.id, g.middleCols(o, c));
                        o += c;
                      }
                    }, "concat_cols");
}

template <class T>
Var<T> concat_rows(std::vector<Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ShapeError("concat_rows: shape mismatch " + shape_str(parts[0].rows(), cols) +
                       " vs " + shape_str(p.rows(), p.cols()));
    rows += p.rows();
  }
  Matrix<T> out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  Tape<T>* tape = parts[0].tape;
  return tape->push(std::move(out), std::span<const Var<T>>(parts),
                    [parts](Tape<T>& t, std::uint32_t self) {
                      const auto& g = t.grad(self);
                      Eigen::Index o = 0;
                      for (const auto& p : parts) {
                        const auto r = t.value(p.id).rows();
                        if (t.needs_grad(p.id)) t.accumulate(p.id, g.middleRows(o, r));
                        o += r;
                      }
                    }, "concat_rows");
}

template <class T>
Var<T> slice_cols(Var<T> a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols())
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + n) +
                     ") out of " + shape_str(a.rows(), a.cols()));
  return a.tape->push(a.value().middleCols(start, n), {a},
                      [a, start, n](Tape<T>& t, std::uint32_t self) {
                        Matrix<T> g = Matrix<T>::Zero(t.value(a.id).rows(), t.value(a.id).cols());
                        g.middleCols(start, n) = t.grad(self);
                        t.accumulate(a.id, g);
                      }, "slice_cols");
}

template <class T>
Var<T> slice_rows(Var<T> a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.rows())
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + n) +
                     ") out of " + shape_str(a.rows(), a.cols()));
  return a.tape->push(a.value().middleRows(start, n), {a},
                      [a, start, n](Tape<T>& t, std::uint32_t self) {
                        Matrix<T> g = Matrix<T>::Zero(t.value(a.id).rows(), t.value(a.id).cols());
                        g.middleRows(start, n) = t.grad(self);
                        t.accumulate(a.id, g);
                      }, "slice_rows");
}

// Row i of the result is row index[i] of a.
template <class T>
Var<T> gather_rows(Var<T> a, std::vector<Eigen::Index> index) {
  Matrix<T> out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows())
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of " +
                       std::to_string(a.rows()) + " rows");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return a.tape->push(std::move(out), {a}, [a, index = std::move(index)](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    Matrix<T> d = Matrix<T>::Zero(t.value(a.id).rows(), t.value(a.id).cols());
    for (std::size_t i = 0; i < index.size(); ++i) d.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a.id, d);
  }, "gather_rows");
}

template <class T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::int32_t> ids) {
  std::vector<Eigen::Index> idx(ids.begin(), ids.end());
  for (auto i : idx) {
    if (i < 0 || i >= table.rows())
      throw ShapeError("embedding_lookup: id " + std::to_string(i) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
  }
  return gather_rows(table, std::move(idx));
}

// Multiplies row i of a by the constant s[i].
template <class T>
Var<T> scale_rows(Var<T> a, std::vector<T> s) {
  if (s.size() != static_cast<std::size_t>(a.rows()))
    throw ShapeError("scale_rows: " + std::to_string(s.size()) + " scales for " +
                     std::to_string(a.rows()) + " rows");
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> sv(s.data(), static_cast<Eigen::Index>(s.size()));
  Matrix<T> out = sv.asDiagonal() * a.value();
  return a.tape->push(std::move(out), {a}, [a, s = std::move(s)](Tape<T>& t, std::uint32_t self) {
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> v(s.data(), static_cast<Eigen::Index>(s.size()));
    t.accumulate(a.id, v.asDiagonal() * t.grad(self));
  }, "scale_rows");
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-6)) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 || bias.cols() != x.cols())
    throw ShapeError("layer_norm: shape mismatch x" + shape_str(x.rows(), x.cols()) + " gain" +
                     shape_str(gain.rows(), gain.cols()) + " bias" + shape_str(bias.rows(), bias.cols()));
  const auto& xv = x.value();
  const auto n = xv.cols();
  Matrix<T> xhat(xv.rows(), n);
  std::vector<T> inv_std(static_cast<std::size_t>(xv.rows()));
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const T mu = xv.row(i).mean();
    const T var = (xv.row(i).array() - mu).square().mean();
    inv_std[i] = T(1) / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std[i];
  }
  Matrix<T> out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.tape->push(std::move(out), {x, gain, bias},
                      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                          Tape<T>& t, std::uint32_t self) {
                        const auto& g = t.grad(self);
                        if (t.needs_grad(gain.id))
                          t.accumulate(gain.id, g.cwiseProduct(xhat).colwise().sum());
                        if (t.needs_grad(bias.id)) t.accumulate(bias.id, g.colwise().sum());
                        if (!t.needs_grad(x.id)) return;
                        Matrix<T> dxhat = g.array().rowwise() * t.value(gain.id).row(0).array();
                        Matrix<T> dx(dxhat.rows(), dxhat.cols());
                        for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                          const T m1 = dxhat.row(i).mean();
                          const T m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                          dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std[i];
                        }
                        t.accumulate(x.id, dx);
                      }, "layer_norm");
}

// Rows of the result are the flattened windows x[i .. i+h-1], i = 0..M-h.
// Sequences shorter than h are zero-padded at the tail to one window.
template <class T>
Var<T> im2col(Var<T> x, Eigen::Index h) {
  if (h <= 0) throw ShapeError("im2col: window must be positive");
  const auto m = x.rows();
  const auto d = x.cols();
  const Eigen::Index windows = m >= h ? m - h + 1 : 1;
  Matrix<T> out = Matrix<T>::Zero(windows, h * d);
  for (Eigen::Index i = 0; i < windows; ++i) {
    for (Eigen::Index k = 0; k < h && i + k < m; ++k) out.block(i, k * d, 1, d) = x.value().row(i + k);
  }
  return x.tape->push(std::move(out), {x}, [x, h](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(x.id);
    const auto m = xv.rows();
    const auto d = xv.cols();
    Matrix<T> dx = Matrix<T>::Zero(m, d);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index k = 0; k < h && i + k < m; ++k) dx.row(i + k) += g.block(i, k * d, 1, d);
    }
    t.accumulate(x.id, dx);
  }, "im2col");
}

// Column-wise maximum over rows; the gradient goes to the first argmax.
template <class T>
Var<T> max_rows(Var<T> a) {
  const auto& v = a.value();
  if (v.rows() == 0) throw ShapeError("max_rows: empty input");
  Matrix<T> out(1, v.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.rows(); ++i) {
      if (v(i, j) > v(best, j)) best = i;
    }
    arg[j] = best;
    out(0, j) = v(best, j);
  }
  return a.tape->push(std::move(out), {a}, [a, arg = std::move(arg)](Tape<T>& t, std::uint32_t self) {
    const auto& g = t.grad(self);
    Matrix<T> d = Matrix<T>::Zero(t.value(a.id).rows(), t.value(a.id).cols());
    for (std::size_t j = 0; j < arg.size(); ++j) d(arg[j], static_cast<Eigen::Index>(j)) = g(0, static_cast<Eigen::Index>(j));
    t.accumulate(a.id, d);
  }, "max_rows");
}

// sum(a .* w) for a constant weight matrix w; used to reduce to a scalar.
template <class T>
Var<T> weighted_sum(Var<T> a, Matrix<T> w) {
  if (w.rows() != a.rows() || w.cols() != a.cols())
    throw ShapeError("weighted_sum: shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(w.rows(), w.cols()));
  Matrix<T> out(1, 1);
  out(0, 0) = a.value().cwiseProduct(w).sum();
  return a.tape->push(std::move(out), {a}, [a, w = std::move(w)](Tape<T>& t, std::uint32_t self) {
    t.accumulate(a.id, w * t.grad(self)(0, 0));
  }, "weighted_sum");
}

template <class T>
Var<T> sum_all(Var<T> a) {
  return weighted_sum(a, Matrix<T>(Matrix<T>::Ones(a.rows(), a.cols())));
}

// Row-major reshape to 1 x (rows * cols): the rows concatenated in order.
template <class T>
Var<T> flatten(Var<T> a) {
  const auto r = a.rows(), c = a.cols();
  Matrix<T> out = Eigen::Map<const Matrix<T>>(a.value().data(), 1, r * c);
  return a.tape->push(std::move(out), {a}, [a, r, c](Tape<T>& t, std::uint32_t self) {
    t.accumulate(a.id, Eigen::Map<const Matrix<T>>(t.grad(self).data(), r, c));
  }, "flatten");
}

// Mean binary cross-entropy of probabilities p (n x 1) against 0/1 labels,
// with p clamped to [1e-7, 1 - 1e-7]. The gradient is zero where clamped.
template <class T>
Var<T> binary_cross_entropy(Var<T> p, std::vector<int> labels) {
  if (p.cols() != 1 || static_cast<std::size_t>(p.rows()) != labels.size())
    throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     shape_str(p.rows(), p.cols()));
  const T lo = static_cast<T>(1e-7), hi = T(1) - static_cast<T>(1e-7);
  T total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw ConfigError("binary_cross_entropy: label " + std::to_string(labels[i]) + " not in {0,1}");
    const T q = std::clamp(p.value()(static_cast<Eigen::Index>(i), 0), lo, hi);
    total -= labels[i] ? std::log(q) : std::log(T(1) - q);
  }
  Matrix<T> out(1, 1);
  out(0, 0) = total / static_cast<T>(labels.size());
  return p.tape->push(std::move(out), {p}, [p, lo, hi, labels = std::move(labels)](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)(0, 0) / static_cast<T>(labels.size());
    Matrix<T> d = Matrix<T>::Zero(static_cast<Eigen::Index>(labels.size()), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const T q = t.value(p.id)(static_cast<Eigen::Index>(i), 0);
      if (q < lo || q > hi) continue;
      d(static_cast<Eigen::Index>(i), 0) = labels[i] ? -g / q : g / (T(1) - q);
    }
    t.accumulate(p.id, d);
  }, "binary_cross_entropy");
}

}  // namespace coqan::nn
