// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Tape-based reverse-mode differentiation over dense double matrices.
//
// A Graph records every operation applied to Vars. Calling backward() on a
// 1x1 Var walks the tape in reverse creation order and accumulates gradients
// into the Parameters that were pulled into the graph with param().
// Graphs built with recording disabled skip all gradient bookkeeping and are
// used for decoding and evaluation.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vtm::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Graph& graph() const { return *graph_; }
  [[nodiscard]] int id() const { return id_; }
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const { return value()(0, 0); }
  [[nodiscard]] bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  // Receives the graph, the id of the node being differentiated and its
  // upstream gradient; pushes contributions into the node's inputs.
  using Backward = std::function<void(Graph&, int, const Matrix&)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  [[nodiscard]] bool recording() const { return record_; }

  Var constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  // One leaf per parameter per graph, so repeated uses share a gradient slot.
  Var param(Parameter& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, record_, record_ ? &p : nullptr, {}});
    int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(&p, id);
    return {this, id};
  }

  // Parameters read through a const model: value only, never differentiated.
  Var param(const Parameter& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, false, nullptr, {}});
    int id = static_cast<int>(nodes_.size()) - 1;
    param_ids_.emplace(&p, id);
    return {this, id};
  }

  Var make(Matrix value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    if (record_) {
      for (const Var& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward) : Backward{}});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var make(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return make(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  [[nodiscard]] const Matrix& value(int id) const { return nodes_[id].value; }
  [[nodiscard]] bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  // Gradient buffer for node `id`, zero-initialised on first touch.
  Matrix& grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  template <class Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void backward(Var loss) {
    if (!record_) throw std::logic_error("backward() on a graph built without recording");
    if (loss.rows() != 1 || loss.cols() != 1) throw std::logic_error("backward() needs a 1x1 loss");
    for (Node& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) {
        n.backward(*this, id, n.grad);
      } else if (n.param != nullptr) {
        if (n.param->grad.size() == 0) {
          n.param->grad = n.grad;
        } else {
          n.param->grad += n.grad;
        }
      }
      n.grad.resize(0, 0);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
};

inline const Matrix& Var::value() const { return graph_->value(id_); }

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear algebra.

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return a.graph().make(a.value() * b.value(), {a, b}, [ia, ib](Graph& g, int, const Matrix& d) {
    if (g.requires_grad(ia)) g.accumulate(ia, d * g.value(ib).transpose());
    if (g.requires_grad(ib)) g.accumulate(ib, g.value(ia).transpose() * d);
  });
}

inline Var add(Var a, Var b) {
  detail::check_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.graph().make(a.value() + b.value(), {a, b}, [ia, ib](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d);
    g.accumulate(ib, d);
  });
}

inline Var sub(Var a, Var b) {
  detail::check_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.graph().make(a.value() - b.value(), {a, b}, [ia, ib](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d);
    g.accumulate(ib, -d);
  });
}

inline Var mul(Var a, Var b) {
  detail::check_same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.graph().make(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Graph& g, int, const Matrix& d) {
    if (g.requires_grad(ia)) g.accumulate(ia, d.cwiseProduct(g.value(ib)));
    if (g.requires_grad(ib)) g.accumulate(ib, d.cwiseProduct(g.value(ia)));
  });
}

inline Var scale(Var a, double s) {
  const int ia = a.id();
  return a.graph().make(a.value() * s, {a}, [ia, s](Graph& g, int, const Matrix& d) { g.accumulate(ia, d * s); });
}

// a (n x m) plus a 1 x m row broadcast over every row.
inline Var add_bias(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw std::invalid_argument("add_bias: bias must be 1 x cols");
  const int ia = a.id(), ib = bias.id();
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.graph().make(std::move(out), {a, bias}, [ia, ib](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d);
    if (g.requires_grad(ib)) g.accumulate(ib, d.colwise().sum());
  });
}

// a (n x m) plus b (k x m) where k divides n; row i of a receives row i % k of b.
inline Var add_tiled(Var a, Var b) {
  if (b.cols() != a.cols() || b.rows() == 0 || a.rows() % b.rows() != 0) {
    throw std::invalid_argument("add_tiled: incompatible shapes");
  }
  const int ia = a.id(), ib = b.id();
  const Eigen::Index k = b.rows();
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); r += k) out.middleRows(r, k) += b.value();
  return a.graph().make(std::move(out), {a, b}, [ia, ib, k](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d);
    if (g.requires_grad(ib)) {
      Matrix acc = Matrix::Zero(k, d.cols());
      for (Eigen::Index r = 0; r < d.rows(); r += k) acc += d.middleRows(r, k);
      g.accumulate(ib, acc);
    }
  });
}

inline Var tanh(Var a) {
  const int ia = a.id();
  Matrix out = a.value().array().tanh().matrix();
  return a.graph().make(std::move(out), {a}, [ia](Graph& g, int self, const Matrix& d) {
    const Matrix& y = g.value(self);
    g.accumulate(ia, (d.array() * (1.0 - y.array().square())).matrix());
  });
}

inline Var sigmoid(Var a) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) { return detail::sigmoid(x); });
  return a.graph().make(std::move(out), {a}, [ia](Graph& g, int self, const Matrix& d) {
    const Matrix& y = g.value(self);
    g.accumulate(ia, (d.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

inline Var exp(Var a) {
  const int ia = a.id();
  Matrix out = a.value().array().exp().matrix();
  return a.graph().make(std::move(out), {a}, [ia](Graph& g, int self, const Matrix& d) {
    g.accumulate(ia, d.cwiseProduct(g.value(self)));
  });
}

inline Var square(Var a) {
  const int ia = a.id();
  return a.graph().make(a.value().array().square().matrix(), {a}, [ia](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, 2.0 * d.cwiseProduct(g.value(ia)));
  });
}

// Passes gradient only where lo <= x <= hi.
inline Var clamp(Var a, double lo, double hi) {
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.graph().make(std::move(out), {a}, [ia, lo, hi](Graph& g, int, const Matrix& d) {
    const Matrix& x = g.value(ia);
    g.accumulate(ia, d.binaryExpr(x, [lo, hi](double gd, double xv) { return (xv >= lo && xv <= hi) ? gd : 0.0; }));
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation.

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    layout.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return parts[0].graph().make(std::move(out), parts, [layout](Graph& g, int, const Matrix& d) {
    for (auto [id, off] : layout) {
      if (g.requires_grad(id)) g.accumulate(id, d.middleCols(off, g.value(id).cols()));
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    layout.emplace_back(p.id(), offset);
    offset += p.rows();
  }
  return parts[0].graph().make(std::move(out), parts, [layout](Graph& g, int, const Matrix& d) {
    for (auto [id, off] : layout) {
      if (g.requires_grad(id)) g.accumulate(id, d.middleRows(off, g.value(id).rows()));
    }
  });
}

inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  const int ia = a.id();
  return a.graph().make(a.value().middleCols(start, count), {a}, [ia, start, count](Graph& g, int, const Matrix& d) {
    g.grad_buffer(ia).middleCols(start, count) += d;
  });
}

inline Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  const int ia = a.id();
  return a.graph().make(a.value().middleRows(start, count), {a}, [ia, start, count](Graph& g, int, const Matrix& d) {
    g.grad_buffer(ia).middleRows(start, count) += d;
  });
}

// Row gather: out.row(i) = table.row(ids[i]).
inline Var embedding(Var table, std::vector<int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::out_of_range("embedding: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  const int it = table.id();
  return table.graph().make(std::move(out), {table}, [it, ids = std::move(ids)](Graph& g, int, const Matrix& d) {
    Matrix& gt = g.grad_buffer(it);
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += d.row(static_cast<Eigen::Index>(i));
  });
}

// Row-wise select: out.row(i) = keep[i] ? fresh.row(i) : stale.row(i).
inline Var select_rows(const std::vector<std::uint8_t>& keep, Var fresh, Var stale) {
  detail::check_same_shape(fresh, stale, "select_rows");
  if (static_cast<Eigen::Index>(keep.size()) != fresh.rows()) throw std::invalid_argument("select_rows: mask size");
  Matrix out = stale.value();
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.row(static_cast<Eigen::Index>(i)) = fresh.value().row(static_cast<Eigen::Index>(i));
  }
  const int ifr = fresh.id(), ist = stale.id();
  return fresh.graph().make(std::move(out), {fresh, stale}, [keep, ifr, ist](Graph& g, int, const Matrix& d) {
    Matrix df = d, ds = d;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i]) {
        ds.row(static_cast<Eigen::Index>(i)).setZero();
      } else {
        df.row(static_cast<Eigen::Index>(i)).setZero();
      }
    }
    g.accumulate(ifr, df);
    g.accumulate(ist, ds);
  });
}

// ---------------------------------------------------------------------------
// Reductions.

inline Var sum(Var a) {
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().make(std::move(out), {a}, [ia](Graph& g, int, const Matrix& d) {
    const Matrix& x = g.value(ia);
    g.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), d(0, 0)));
  });
}

// n x m -> n x 1.
inline Var row_sum(Var a) {
  const int ia = a.id();
  return a.graph().make(a.value().rowwise().sum(), {a}, [ia](Graph& g, int, const Matrix& d) {
    const Eigen::Index cols = g.value(ia).cols();
    g.accumulate(ia, d.replicate(1, cols));
  });
}

// (r*k) x m -> k x m, summing rows congruent modulo k.
inline Var fold_rows(Var a, Eigen::Index k) {
  if (k <= 0 || a.rows() % k != 0) throw std::invalid_argument("fold_rows: k must divide rows");
  Matrix out = Matrix::Zero(k, a.cols());
  for (Eigen::Index r = 0; r < a.rows(); r += k) out += a.value().middleRows(r, k);
  const int ia = a.id();
  return a.graph().make(std::move(out), {a}, [ia, k](Graph& g, int, const Matrix& d) {
    const Eigen::Index reps = g.value(ia).rows() / k;
    g.accumulate(ia, d.replicate(reps, 1));
  });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

// n x n -> n x 1 diagonal.
inline Var diagonal(Var a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("diagonal: square input required");
  const int ia = a.id();
  return a.graph().make(a.value().diagonal(), {a}, [ia](Graph& g, int, const Matrix& d) {
    Matrix& ga = g.grad_buffer(ia);
    for (Eigen::Index i = 0; i < d.rows(); ++i) ga(i, i) += d(i, 0);
  });
}

// n x m -> n x 1, numerically stable log(sum(exp(row))).
inline Var logsumexp_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
  }
  const int ia = a.id();
  return a.graph().make(std::move(out), {a}, [ia](Graph& g, int self, const Matrix& d) {
    const Matrix& xin = g.value(ia);
    const Matrix& lse = g.value(self);
    Matrix soft = (xin.colwise() - lse.col(0)).array().exp().matrix();
    g.accumulate(ia, (soft.array().colwise() * d.col(0).array()).matrix());
  });
}

// ---------------------------------------------------------------------------
// Fused model pieces.

// LSTM cell update with gate layout [input, forget, candidate, output]:
// returns f * c_prev + i * g.
inline Var lstm_cell(Var gates, Var c_prev) {
  const Eigen::Index h = c_prev.cols();
  if (gates.cols() != 4 * h || gates.rows() != c_prev.rows()) throw std::invalid_argument("lstm_cell: shapes");
  const Matrix& gv = gates.value();
  Matrix i = gv.middleCols(0, h).unaryExpr([](double x) { return detail::sigmoid(x); });
  Matrix f = gv.middleCols(h, h).unaryExpr([](double x) { return detail::sigmoid(x); });
  Matrix c = gv.middleCols(2 * h, h).array().tanh().matrix();
  Matrix out = f.cwiseProduct(c_prev.value()) + i.cwiseProduct(c);
  const int ig = gates.id(), ic = c_prev.id();
  return gates.graph().make(std::move(out), {gates, c_prev}, [ig, ic, h](Graph& g, int, const Matrix& d) {
    const Matrix& gv2 = g.value(ig);
    const Matrix& cp = g.value(ic);
    Matrix i2 = gv2.middleCols(0, h).unaryExpr([](double x) { return detail::sigmoid(x); });
    Matrix f2 = gv2.middleCols(h, h).unaryExpr([](double x) { return detail::sigmoid(x); });
    Matrix c2 = gv2.middleCols(2 * h, h).array().tanh().matrix();
    if (g.requires_grad(ig)) {
      Matrix& gg = g.grad_buffer(ig);
      gg.middleCols(0, h).array() += d.array() * c2.array() * i2.array() * (1.0 - i2.array());
      gg.middleCols(h, h).array() += d.array() * cp.array() * f2.array() * (1.0 - f2.array());
      gg.middleCols(2 * h, h).array() += d.array() * i2.array() * (1.0 - c2.array().square());
    }
    if (g.requires_grad(ic)) g.accumulate(ic, d.cwiseProduct(f2));
  });
}

// LSTM output: sigmoid(output gate) * tanh(cell).
inline Var lstm_hidden(Var gates, Var cell) {
  const Eigen::Index h = cell.cols();
  if (gates.cols() != 4 * h || gates.rows() != cell.rows()) throw std::invalid_argument("lstm_hidden: shapes");
  Matrix o = gates.value().middleCols(3 * h, h).unaryExpr([](double x) { return detail::sigmoid(x); });
  Matrix out = o.cwiseProduct(cell.value().array().tanh().matrix());
  const int ig = gates.id(), ic = cell.id();
  return gates.graph().make(std::move(out), {gates, cell}, [ig, ic, h](Graph& g, int, const Matrix& d) {
    Matrix o2 = g.value(ig).middleCols(3 * h, h).unaryExpr([](double x) { return detail::sigmoid(x); });
    Matrix tc = g.value(ic).array().tanh().matrix();
    if (g.requires_grad(ig)) {
      g.grad_buffer(ig).middleCols(3 * h, h).array() += d.array() * tc.array() * o2.array() * (1.0 - o2.array());
    }
    if (g.requires_grad(ic)) g.accumulate(ic, (d.array() * o2.array() * (1.0 - tc.array().square())).matrix());
  });
}

// Per-row negative log-likelihood of `targets` under softmax(logits),
// multiplied by `weights` (0 masks a row out). Returns n x 1.
inline Var softmax_nll(Var logits, std::vector<int> targets, std::vector<double> weights) {
  const Matrix& x = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != x.rows() || weights.size() != targets.size()) {
    throw std::invalid_argument("softmax_nll: target/weight count must match rows");
  }
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= x.cols()) throw std::out_of_range("softmax_nll: target out of range");
    const double w = weights[static_cast<std::size_t>(i)];
    if (w == 0.0) {
      out(i, 0) = 0.0;
      continue;
    }
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out(i, 0) = w * (lse - x(i, t));
  }
  const int il = logits.id();
  return logits.graph().make(
      std::move(out), {logits},
      [il, targets = std::move(targets), weights = std::move(weights)](Graph& g, int, const Matrix& d) {
        const Matrix& xin = g.value(il);
        Matrix& gl = g.grad_buffer(il);
        for (Eigen::Index i = 0; i < xin.rows(); ++i) {
          const double w = weights[static_cast<std::size_t>(i)] * d(i, 0);
          if (w == 0.0) continue;
          const double m = xin.row(i).maxCoeff();
          Eigen::RowVectorXd p = (xin.row(i).array() - m).exp();
          p /= p.sum();
          p(targets[static_cast<std::size_t>(i)]) -= 1.0;
          gl.row(i) += w * p;
        }
      });
}

// Layout of a flattened, padded set of per-table record rows: table b owns
// rows [b * slots, b * slots + counts[b]).
struct RecordLayout {
  int slots = 0;
  std::vector<int> counts;
};

// Softmax weights of query row r over the valid records of table
// row_table[r]; scores are plain dot products.
inline Matrix attention_weights(const Matrix& query, const Matrix& records, const RecordLayout& layout,
                                const std::vector<int>& row_table) {
  Matrix w = Matrix::Zero(query.rows(), layout.slots);
  for (Eigen::Index r = 0; r < query.rows(); ++r) {
    const int b = row_table[static_cast<std::size_t>(r)];
    const int k = layout.counts[static_cast<std::size_t>(b)];
    const Eigen::Index base = static_cast<Eigen::Index>(b) * layout.slots;
    Eigen::RowVectorXd s = (records.middleRows(base, k) * query.row(r).transpose()).transpose();
    const double m = s.maxCoeff();
    s = (s.array() - m).exp();
    s /= s.sum();
    w.row(r).head(k) = s;
  }
  return w;
}

// Context vectors sum_k a_rk records_k with a = attention_weights(...).
inline Var attend(Var query, Var records, RecordLayout layout, std::vector<int> row_table) {
  if (query.cols() != records.cols()) throw std::invalid_argument("attend: query/record widths differ");
  if (static_cast<Eigen::Index>(row_table.size()) != query.rows()) throw std::invalid_argument("attend: row map");
  const Matrix& rec = records.value();
  Matrix w = attention_weights(query.value(), rec, layout, row_table);
  Matrix ctx(query.rows(), query.cols());
  for (Eigen::Index r = 0; r < query.rows(); ++r) {
    const int b = row_table[static_cast<std::size_t>(r)];
    const int k = layout.counts[static_cast<std::size_t>(b)];
    ctx.row(r) = w.row(r).head(k) * rec.middleRows(static_cast<Eigen::Index>(b) * layout.slots, k);
  }
  const int iq = query.id(), ir = records.id();
  return query.graph().make(
      std::move(ctx), {query, records},
      [iq, ir, layout = std::move(layout), row_table = std::move(row_table), w = std::move(w)](Graph& g, int,
                                                                                              const Matrix& d) {
        const Matrix& q = g.value(iq);
        const Matrix& recv = g.value(ir);
        const bool need_q = g.requires_grad(iq), need_r = g.requires_grad(ir);
        Matrix* gq = need_q ? &g.grad_buffer(iq) : nullptr;
        Matrix* gr = need_r ? &g.grad_buffer(ir) : nullptr;
        for (Eigen::Index r = 0; r < q.rows(); ++r) {
          const int b = row_table[static_cast<std::size_t>(r)];
          const int k = layout.counts[static_cast<std::size_t>(b)];
          const Eigen::Index base = static_cast<Eigen::Index>(b) * layout.slots;
          auto rows = recv.middleRows(base, k);
          Eigen::RowVectorXd a = w.row(r).head(k);
          Eigen::RowVectorXd da = (rows * d.row(r).transpose()).transpose();
          const double dot = a.dot(da);
          Eigen::RowVectorXd ds = a.array() * (da.array() - dot);
          if (need_q) gq->row(r) += ds * rows;
          if (need_r) {
            gr->middleRows(base, k) += a.transpose() * d.row(r);
            gr->middleRows(base, k) += ds.transpose() * q.row(r);
          }
        }
      });
}

// Elementwise max over the valid record rows of each table -> tables x cols.
// Ties route the gradient to the first maximising record.
inline Var max_pool_records(Var records, RecordLayout layout) {
  const Matrix& rec = records.value();
  const auto tables = static_cast<Eigen::Index>(layout.counts.size());
  Matrix out(tables, rec.cols());
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(tables * rec.cols()));
  for (Eigen::Index b = 0; b < tables; ++b) {
    const int k = layout.counts[static_cast<std::size_t>(b)];
    if (k <= 0) throw std::invalid_argument("max_pool_records: table without records");
    const Eigen::Index base = b * layout.slots;
    for (Eigen::Index j = 0; j < rec.cols(); ++j) {
      Eigen::Index best = base;
      for (Eigen::Index i = base + 1; i < base + k; ++i) {
        if (rec(i, j) > rec(best, j)) best = i;
      }
      out(b, j) = rec(best, j);
      argmax[static_cast<std::size_t>(b * rec.cols() + j)] = best;
    }
  }
  const int ir = records.id();
  return records.graph().make(std::move(out), {records}, [ir, argmax = std::move(argmax)](Graph& g, int,
                                                                                        const Matrix& d) {
    Matrix& gr = g.grad_buffer(ir);
    for (Eigen::Index b = 0; b < d.rows(); ++b) {
      for (Eigen::Index j = 0; j < d.cols(); ++j) gr(argmax[static_cast<std::size_t>(b * d.cols() + j)], j) += d(b, j);
    }
  });
}

// out(i, j) = log N(samples_i; mean_j, diag(exp(logvar_j))).
inline Var gaussian_log_density_matrix(Var samples, Var mean, Var logvar) {
  detail::check_same_shape(mean, logvar, "gaussian_log_density_matrix");
  if (samples.cols() != mean.cols()) throw std::invalid_argument("gaussian_log_density_matrix: dims");
  const Matrix& v = samples.value();
  const Matrix& m = mean.value();
  const Matrix& l = logvar.value();
  const Eigen::Index n = v.rows(), k = m.rows(), dim = v.cols();
  Matrix inv_var = (-l.array()).exp().matrix();
  Matrix out(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm = l.row(j).sum() + static_cast<double>(dim) * detail::kLog2Pi;
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, j) = -0.5 * (((v.row(i) - m.row(j)).array().square() * inv_var.row(j).array()).sum() + norm);
    }
  }
  const int iv = samples.id(), im = mean.id(), il = logvar.id();
  return samples.graph().make(std::move(out), {samples, mean, logvar}, [iv, im, il](Graph& g, int, const Matrix& d) {
    const Matrix& vv = g.value(iv);
    const Matrix& mm = g.value(im);
    const Matrix& ll = g.value(il);
    Matrix inv = (-ll.array()).exp().matrix();
    Matrix gv = Matrix::Zero(vv.rows(), vv.cols());
    Matrix gm = Matrix::Zero(mm.rows(), mm.cols());
    Matrix gl = Matrix::Zero(ll.rows(), ll.cols());
    for (Eigen::Index j = 0; j < mm.rows(); ++j) {
      for (Eigen::Index i = 0; i < vv.rows(); ++i) {
        const double w = d(i, j);
        if (w == 0.0) continue;
        Eigen::RowVectorXd diff = vv.row(i) - mm.row(j);
        Eigen::RowVectorXd scaled = diff.cwiseProduct(inv.row(j));
        gv.row(i) -= w * scaled;
        gm.row(j) += w * scaled;
        gl.row(j).array() += 0.5 * w * (diff.array() * scaled.array() - 1.0);
      }
    }
    g.accumulate(iv, gv);
    g.accumulate(im, gm);
    g.accumulate(il, gl);
  });
}

// Row-wise KL(N(mean, diag(exp(logvar))) || N(0, I)) -> n x 1.
inline Var kl_standard_normal_rows(Var mean, Var logvar) {
  detail::check_same_shape(mean, logvar, "kl_standard_normal_rows");
  const Matrix& m = mean.value();
  const Matrix& l = logvar.value();
  Matrix out = 0.5 * (l.array().exp() + m.array().square() - 1.0 - l.array()).matrix().rowwise().sum();
  const int im = mean.id(), il = logvar.id();
  return mean.graph().make(std::move(out), {mean, logvar}, [im, il](Graph& g, int, const Matrix& d) {
    const Eigen::Index cols = g.value(im).cols();
    Matrix dd = d.replicate(1, cols);
    if (g.requires_grad(im)) g.accumulate(im, dd.cwiseProduct(g.value(im)));
    if (g.requires_grad(il)) g.accumulate(il, (0.5 * dd.array() * (g.value(il).array().exp() - 1.0)).matrix());
  });
}

}  // namespace vtm::ad
