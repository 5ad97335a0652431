#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "caf/errors.hpp"
#include "caf/matrix.hpp"
#include "caf/rng.hpp"

namespace caf::ad {

enum class Op {
  input,
  constant,
  dense_matmul,
  sparse_dense_matmul,
  add,
  scale,
  relu,
  sigmoid,
  concat_columns,
  slice_columns,
  row_cosine_similarity,
  row_squared_l2_distance,
  softmax_cross_entropy,
  binary_cross_entropy,
  mean_reduce,
  sum_reduce,
  absolute_value,
  elementwise_multiply,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::dense_matmul: return "dense-matmul";
    case Op::sparse_dense_matmul: return "sparse-dense-matmul";
    case Op::add: return "add";
    case Op::scale: return "scale";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::concat_columns: return "concat-columns";
    case Op::slice_columns: return "slice-columns";
    case Op::row_cosine_similarity: return "row-cosine-similarity";
    case Op::row_squared_l2_distance: return "row-squared-L2-distance";
    case Op::softmax_cross_entropy: return "softmax-cross-entropy";
    case Op::binary_cross_entropy: return "binary-cross-entropy";
    case Op::mean_reduce: return "mean-reduce";
    case Op::sum_reduce: return "sum-reduce";
    case Op::absolute_value: return "absolute-value";
    case Op::elementwise_multiply: return "elementwise-multiply";
  }
  return "?";
}

constexpr double kCosineNormGuard = 1e-12;
constexpr double kBceClamp = 1e-7;

// Reverse-mode tape over dense matrices. Values are evaluated eagerly at
// node creation, which gives topological order by construction; backward()
// walks the node list in reverse. One tape describes one evaluation; leaves
// are rebound by building a fresh tape.
class Tape {
 public:
  struct Node {
    Op op;
    int a = -1, b = -1;
    Matrix value;
    Matrix grad;
    double factor = 0.0;               // scale
    int col_begin = 0, col_end = 0;    // slice-columns
    const Csr* sparse = nullptr;       // sparse-dense-matmul (not owned)
    std::vector<int> targets;          // cross-entropy class / 0-1 targets
    bool requires_grad = false;
  };

  int input(Matrix v) { return push_leaf(Op::input, std::move(v), true); }
  int constant(Matrix v) { return push_leaf(Op::constant, std::move(v), false); }

  int dense_matmul(int a, int b) {
    const auto& [ma, mb] = pair(a, b);
    if (ma.cols() != mb.rows()) fail_shape(Op::dense_matmul, a, b);
    return push(Op::dense_matmul, a, b, matmul(ma, mb));
  }

  int sparse_dense_matmul(const Csr& s, int x) {
    if (s.cols != node(x).value.rows()) fail_shape(Op::sparse_dense_matmul, x, x);
    Node n = make(Op::sparse_dense_matmul, x, -1, spmm(s, node(x).value));
    n.sparse = &s;
    return commit(std::move(n));
  }

  // Same shape, or b broadcast as a 1 x cols row or a 1 x 1 scalar.
  int add(int a, int b) {
    const auto& [ma, mb] = pair(a, b);
    if (!broadcast_ok(ma, mb)) fail_shape(Op::add, a, b);
    Matrix out = ma;
    if (mb.same_shape(ma)) {
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += mb.data()[i];
    } else if (mb.rows() == 1 && mb.cols() == ma.cols()) {
      for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) += mb(0, c);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += mb(0, 0);
    }
    return push(Op::add, a, b, std::move(out));
  }

  int scale(int a, double k) {
    Matrix out = node(a).value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= k;
    Node n = make(Op::scale, a, -1, std::move(out));
    n.factor = k;
    return commit(std::move(n));
  }

  int relu(int a) {
    Matrix out = node(a).value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(out.data()[i], 0.0);
    return push(Op::relu, a, -1, std::move(out));
  }

  int sigmoid(int a) {
    Matrix out = node(a).value;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = out.data()[i];
      out.data()[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                             : std::exp(x) / (1.0 + std::exp(x));
    }
    return push(Op::sigmoid, a, -1, std::move(out));
  }

  int concat_columns(int a, int b) {
    const auto& [ma, mb] = pair(a, b);
    if (ma.rows() != mb.rows()) fail_shape(Op::concat_columns, a, b);
    Matrix out(ma.rows(), ma.cols() + mb.cols());
    for (int r = 0; r < ma.rows(); ++r) {
      for (int c = 0; c < ma.cols(); ++c) out(r, c) = ma(r, c);
      for (int c = 0; c < mb.cols(); ++c) out(r, ma.cols() + c) = mb(r, c);
    }
    return push(Op::concat_columns, a, b, std::move(out));
  }

  int slice_columns(int a, int begin, int end) {
    const auto& ma = node(a).value;
    if (begin < 0 || end > ma.cols() || begin >= end) fail_shape(Op::slice_columns, a, a);
    Matrix out(ma.rows(), end - begin);
    for (int r = 0; r < ma.rows(); ++r)
      for (int c = begin; c < end; ++c) out(r, c - begin) = ma(r, c);
    Node n = make(Op::slice_columns, a, -1, std::move(out));
    n.col_begin = begin;
    n.col_end = end;
    return commit(std::move(n));
  }

  // Per-row cosine similarity of two equal-shape matrices -> n x 1.
  // Norms are guarded with +1e-12 so near-zero rows stay defined.
  int row_cosine_similarity(int a, int b) {
    const auto& [ma, mb] = pair(a, b);
    if (!ma.same_shape(mb)) fail_shape(Op::row_cosine_similarity, a, b);
    Matrix out(ma.rows(), 1);
    for (int r = 0; r < ma.rows(); ++r) {
      double dot = 0, na = 0, nb = 0;
      for (int c = 0; c < ma.cols(); ++c) {
        dot += ma(r, c) * mb(r, c);
        na += ma(r, c) * ma(r, c);
        nb += mb(r, c) * mb(r, c);
      }
      out(r, 0) = dot / ((std::sqrt(na) + kCosineNormGuard) * (std::sqrt(nb) + kCosineNormGuard));
    }
    return push(Op::row_cosine_similarity, a, b, std::move(out));
  }

  int row_squared_l2_distance(int a, int b) {
    const auto& [ma, mb] = pair(a, b);
    if (!ma.same_shape(mb)) fail_shape(Op::row_squared_l2_distance, a, b);
    Matrix out(ma.rows(), 1);
    for (int r = 0; r < ma.rows(); ++r) {
      double s = 0;
      for (int c = 0; c < ma.cols(); ++c) {
        const double d = ma(r, c) - mb(r, c);
        s += d * d;
      }
      out(r, 0) = s;
    }
    return push(Op::row_squared_l2_distance, a, b, std::move(out));
  }

  // Per-row cross entropy of softmaxed logits against integer class
  // targets -> n x 1.
  int softmax_cross_entropy(int logits, std::vector<int> targets) {
    const auto& ml = node(logits).value;
    if (static_cast<int>(targets.size()) != ml.rows())
      fail_shape(Op::softmax_cross_entropy, logits, logits);
    Matrix out(ml.rows(), 1);
    for (int r = 0; r < ml.rows(); ++r) {
      if (targets[r] < 0 || targets[r] >= ml.cols())
        throw ValidationError("softmax-cross-entropy: target out of range at row " +
                              std::to_string(r));
      double mx = ml(r, 0);
      for (int c = 1; c < ml.cols(); ++c) mx = std::max(mx, ml(r, c));
      double lse = 0;
      for (int c = 0; c < ml.cols(); ++c) lse += std::exp(ml(r, c) - mx);
      out(r, 0) = std::log(lse) + mx - ml(r, targets[r]);
    }
    Node n = make(Op::softmax_cross_entropy, logits, -1, std::move(out));
    n.targets = std::move(targets);
    return commit(std::move(n));
  }

  // Per-row BCE of probabilities against 0/1 targets -> n x 1. The log
  // argument (p for a positive target, 1-p for a negative one) is clamped
  // from below at 1e-7, keeping saturated pairs finite.
  int binary_cross_entropy(int probs, std::vector<int> targets) {
    const auto& mp = node(probs).value;
    if (mp.cols() != 1 || static_cast<int>(targets.size()) != mp.rows())
      fail_shape(Op::binary_cross_entropy, probs, probs);
    Matrix out(mp.rows(), 1);
    for (int r = 0; r < mp.rows(); ++r) {
      if (targets[r] != 0 && targets[r] != 1)
        throw ValidationError("binary-cross-entropy: target outside {0,1} at row " +
                              std::to_string(r));
      const double arg = targets[r] == 1 ? mp(r, 0) : 1.0 - mp(r, 0);
      out(r, 0) = -std::log(std::max(arg, kBceClamp));
    }
    Node n = make(Op::binary_cross_entropy, probs, -1, std::move(out));
    n.targets = std::move(targets);
    return commit(std::move(n));
  }

  int mean_reduce(int a) {
    const auto& ma = node(a).value;
    if (ma.size() == 0) fail_shape(Op::mean_reduce, a, a);
    double s = 0;
    for (std::size_t i = 0; i < ma.size(); ++i) s += ma.data()[i];
    Matrix out(1, 1);
    out(0, 0) = s / static_cast<double>(ma.size());
    return push(Op::mean_reduce, a, -1, std::move(out));
  }

  int sum_reduce(int a) {
    const auto& ma = node(a).value;
    double s = 0;
    for (std::size_t i = 0; i < ma.size(); ++i) s += ma.data()[i];
    Matrix out(1, 1);
    out(0, 0) = s;
    return push(Op::sum_reduce, a, -1, std::move(out));
  }

  int absolute_value(int a) {
    Matrix out = node(a).value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::fabs(out.data()[i]);
    return push(Op::absolute_value, a, -1, std::move(out));
  }

  // Same shape, or b broadcast as a 1 x cols row or a 1 x 1 scalar.
  int elementwise_multiply(int a, int b) {
    const auto& [ma, mb] = pair(a, b);
    if (!broadcast_ok(ma, mb)) fail_shape(Op::elementwise_multiply, a, b);
    Matrix out = ma;
    if (mb.same_shape(ma)) {
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mb.data()[i];
    } else if (mb.rows() == 1 && mb.cols() == ma.cols()) {
      for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) *= mb(0, c);
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mb(0, 0);
    }
    return push(Op::elementwise_multiply, a, b, std::move(out));
  }

  const Matrix& value(int id) const { return node(id).value; }
  const Matrix& grad(int id) const { return node(id).grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Reverse accumulation from a scalar output. Leaves not reachable from
  // the output keep zero gradients.
  void backward(int out) {
    auto& on = nodes_[check_id(out)];
    if (on.value.rows() != 1 || on.value.cols() != 1)
      throw ValidationError("backward: output must be scalar, node " + std::to_string(out) +
                            " is " + std::to_string(on.value.rows()) + "x" +
                            std::to_string(on.value.cols()));
    for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
    on.grad(0, 0) = 1.0;
    for (int id = out; id >= 0; --id) accumulate(id);
  }

 private:
  std::vector<Node> nodes_;

  int check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw ValidationError("tape: bad node id " + std::to_string(id));
    return id;
  }
  const Node& node(int id) const { return nodes_[check_id(id)]; }
  std::pair<const Matrix&, const Matrix&> pair(int a, int b) const {
    return {node(a).value, node(b).value};
  }

  static bool broadcast_ok(const Matrix& a, const Matrix& b) {
    return b.same_shape(a) || (b.rows() == 1 && b.cols() == a.cols()) ||
           (b.rows() == 1 && b.cols() == 1);
  }

  [[noreturn]] void fail_shape(Op op, int a, int b) const {
    const auto& ma = node(a).value;
    const auto& mb = node(b).value;
    throw ValidationError(std::string("shape mismatch in ") + op_name(op) + " (node " +
                          std::to_string(nodes_.size()) + "): " + std::to_string(ma.rows()) +
                          "x" + std::to_string(ma.cols()) + " vs " + std::to_string(mb.rows()) +
                          "x" + std::to_string(mb.cols()));
  }

  Node make(Op op, int a, int b, Matrix value) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    n.requires_grad = (a >= 0 && node(a).requires_grad) || (b >= 0 && node(b).requires_grad);
    return n;
  }

  int push_leaf(Op op, Matrix v, bool requires_grad) {
    Node n;
    n.op = op;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    return commit(std::move(n));
  }

  int push(Op op, int a, int b, Matrix value) { return commit(make(op, a, b, std::move(value))); }

  int commit(Node n) {
    if (!all_finite(n.value))
      throw ValidationError(std::string("non-finite value produced by ") + op_name(n.op) +
                            " at node " + std::to_string(nodes_.size()));
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Adds g into the adjoint of `id`, reducing over broadcast dimensions.
  void add_grad_broadcast(int id, const Matrix& g) {
    auto& target = nodes_[id].grad;
    if (target.same_shape(g)) {
      for (std::size_t i = 0; i < g.size(); ++i) target.data()[i] += g.data()[i];
    } else if (target.rows() == 1 && target.cols() == g.cols()) {
      for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c) target(0, c) += g(r, c);
    } else {
      double s = 0;
      for (std::size_t i = 0; i < g.size(); ++i) s += g.data()[i];
      target(0, 0) += s;
    }
  }

  void accumulate(int id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.a < 0) return;
    const Matrix& g = n.grad;
    Node& na = nodes_[n.a];
    switch (n.op) {
      case Op::dense_matmul: {
        Node& nb = nodes_[n.b];
        if (na.requires_grad) {
          const Matrix da = matmul(g, transpose(nb.value));
          for (std::size_t i = 0; i < da.size(); ++i) na.grad.data()[i] += da.data()[i];
        }
        if (nb.requires_grad) {
          const Matrix db = matmul(transpose(na.value), g);
          for (std::size_t i = 0; i < db.size(); ++i) nb.grad.data()[i] += db.data()[i];
        }
        break;
      }
      case Op::sparse_dense_matmul:
        if (na.requires_grad) spmm_transpose_add(*n.sparse, g, na.grad);
        break;
      case Op::add:
        if (na.requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) na.grad.data()[i] += g.data()[i];
        if (nodes_[n.b].requires_grad) add_grad_broadcast(n.b, g);
        break;
      case Op::scale:
        for (std::size_t i = 0; i < g.size(); ++i) na.grad.data()[i] += n.factor * g.data()[i];
        break;
      case Op::relu:
        for (std::size_t i = 0; i < g.size(); ++i)
          if (na.value.data()[i] > 0) na.grad.data()[i] += g.data()[i];
        break;
      case Op::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data()[i];
          na.grad.data()[i] += y * (1.0 - y) * g.data()[i];
        }
        break;
      case Op::concat_columns: {
        Node& nb = nodes_[n.b];
        for (int r = 0; r < g.rows(); ++r) {
          if (na.requires_grad)
            for (int c = 0; c < na.value.cols(); ++c) na.grad(r, c) += g(r, c);
          if (nb.requires_grad)
            for (int c = 0; c < nb.value.cols(); ++c)
              nb.grad(r, c) += g(r, na.value.cols() + c);
        }
        break;
      }
      case Op::slice_columns:
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < g.cols(); ++c) na.grad(r, n.col_begin + c) += g(r, c);
        break;
      case Op::row_cosine_similarity: {
        Node& nb = nodes_[n.b];
        for (int r = 0; r < na.value.rows(); ++r) {
          const double gr = g(r, 0);
          if (gr == 0.0) continue;
          double na2 = 0, nb2 = 0;
          for (int c = 0; c < na.value.cols(); ++c) {
            na2 += na.value(r, c) * na.value(r, c);
            nb2 += nb.value(r, c) * nb.value(r, c);
          }
          const double la = std::sqrt(na2), lb = std::sqrt(nb2);
          const double denom = (la + kCosineNormGuard) * (lb + kCosineNormGuard);
          const double cosv = n.value(r, 0);
          for (int c = 0; c < na.value.cols(); ++c) {
            if (na.requires_grad) {
              double d = nb.value(r, c) / denom;
              if (la > 0) d -= cosv * na.value(r, c) / (la * (la + kCosineNormGuard));
              na.grad(r, c) += gr * d;
            }
            if (nb.requires_grad) {
              double d = na.value(r, c) / denom;
              if (lb > 0) d -= cosv * nb.value(r, c) / (lb * (lb + kCosineNormGuard));
              nb.grad(r, c) += gr * d;
            }
          }
        }
        break;
      }
      case Op::row_squared_l2_distance: {
        Node& nb = nodes_[n.b];
        for (int r = 0; r < na.value.rows(); ++r) {
          const double gr = g(r, 0);
          for (int c = 0; c < na.value.cols(); ++c) {
            const double d = 2.0 * (na.value(r, c) - nb.value(r, c)) * gr;
            if (na.requires_grad) na.grad(r, c) += d;
            if (nb.requires_grad) nb.grad(r, c) -= d;
          }
        }
        break;
      }
      case Op::softmax_cross_entropy: {
        for (int r = 0; r < na.value.rows(); ++r) {
          const double gr = g(r, 0);
          if (gr == 0.0) continue;
          double mx = na.value(r, 0);
          for (int c = 1; c < na.value.cols(); ++c) mx = std::max(mx, na.value(r, c));
          double lse = 0;
          for (int c = 0; c < na.value.cols(); ++c) lse += std::exp(na.value(r, c) - mx);
          for (int c = 0; c < na.value.cols(); ++c) {
            const double p = std::exp(na.value(r, c) - mx) / lse;
            na.grad(r, c) += gr * (p - (n.targets[r] == c ? 1.0 : 0.0));
          }
        }
        break;
      }
      case Op::binary_cross_entropy:
        for (int r = 0; r < na.value.rows(); ++r) {
          const double p = na.value(r, 0);
          const double d = n.targets[r] == 1 ? -1.0 / std::max(p, kBceClamp)
                                             : 1.0 / std::max(1.0 - p, kBceClamp);
          na.grad(r, 0) += d * g(r, 0);
        }
        break;
      case Op::mean_reduce: {
        const double gr = g(0, 0) / static_cast<double>(na.value.size());
        for (std::size_t i = 0; i < na.value.size(); ++i) na.grad.data()[i] += gr;
        break;
      }
      case Op::sum_reduce:
        for (std::size_t i = 0; i < na.value.size(); ++i) na.grad.data()[i] += g(0, 0);
        break;
      case Op::absolute_value:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double x = na.value.data()[i];
          na.grad.data()[i] += (x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0) * g.data()[i];
        }
        break;
      case Op::elementwise_multiply: {
        Node& nb = nodes_[n.b];
        const Matrix& mb = nb.value;
        if (na.requires_grad) {
          if (mb.same_shape(na.value)) {
            for (std::size_t i = 0; i < g.size(); ++i)
              na.grad.data()[i] += mb.data()[i] * g.data()[i];
          } else if (mb.rows() == 1 && mb.cols() == na.value.cols()) {
            for (int r = 0; r < g.rows(); ++r)
              for (int c = 0; c < g.cols(); ++c) na.grad(r, c) += mb(0, c) * g(r, c);
          } else {
            for (std::size_t i = 0; i < g.size(); ++i)
              na.grad.data()[i] += mb(0, 0) * g.data()[i];
          }
        }
        if (nb.requires_grad) {
          Matrix scaled = g;
          for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) scaled(r, c) = g(r, c) * na.value(r, c);
          add_grad_broadcast(n.b, scaled);
        }
        break;
      }
      case Op::input:
      case Op::constant:
        break;
    }
  }
};

}  // namespace caf::ad
