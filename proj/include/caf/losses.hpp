#pragma once

#include <string>
#include <vector>

#include "caf/autodiff.hpp"
#include "caf/cfselect.hpp"
#include "caf/errors.hpp"
#include "caf/graph.hpp"

namespace caf {

enum class DisMetric { cosine_distance, squared_l2 };

inline DisMetric dis_metric_from_name(const std::string& s) {
  if (s == "cosine" || s == "cosine-distance") return DisMetric::cosine_distance;
  if (s == "l2" || s == "squared-l2") return DisMetric::squared_l2;
  throw ValidationError("unknown distance metric '" + s + "'");
}

inline const char* dis_metric_name(DisMetric m) {
  return m == DisMetric::cosine_distance ? "cosine" : "squared-l2";
}

struct LossWeights {
  double alpha = 1.0;  // invariance
  double beta = 5.0;   // sufficiency
  double gamma = 0.5;  // orthogonality inside the invariance term
  DisMetric dis_metric = DisMetric::cosine_distance;
};

namespace loss_detail {

// Row-selection matrix: out[r] = src[rows[r]].
inline Csr selection_csr(const std::vector<int>& rows, int n) {
  Csr s;
  s.rows = static_cast<int>(rows.size());
  s.cols = n;
  s.row_ptr.reserve(rows.size() + 1);
  for (int r : rows) {
    s.col_idx.push_back(r);
    s.values.push_back(1.0);
    s.row_ptr.push_back(static_cast<int>(s.col_idx.size()));
  }
  return s;
}

}  // namespace loss_detail

// Mean softmax cross-entropy over the train mask.
inline int prediction_loss_on_tape(ad::Tape& tape, int logits, const Graph& g) {
  if (g.split.train.empty()) throw ValidationError("prediction_loss: empty train mask");
  const int n = tape.value(logits).rows();
  std::vector<int> targets(n, 0);
  Matrix mask(n, 1);
  const double w = 1.0 / static_cast<double>(g.split.train.size());
  for (int i : g.split.train) {
    if (g.labels[i] == -1)
      throw ValidationError("prediction_loss: unlabeled node in train mask");
    targets[i] = g.labels[i];
    mask(i, 0) = w;
  }
  const int ce = tape.softmax_cross_entropy(logits, std::move(targets));
  return tape.sum_reduce(tape.elementwise_multiply(ce, tape.constant(std::move(mask))));
}

// Link reconstruction: BCE of sigmoid(h_i . h_j) over positive and sampled
// negative pairs, averaged over all pairs.
struct PairBatch {
  Csr left, right;           // row selections into H
  std::vector<int> targets;  // 1 = edge, 0 = non-edge
};

inline PairBatch make_pair_batch(const EdgeSet& pos, const EdgeSet& neg, int n) {
  if (pos.pairs.empty() && neg.pairs.empty())
    throw ValidationError("sufficiency_loss: no pairs to score");
  std::vector<int> lefts, rights;
  PairBatch batch;
  for (const auto& [i, j] : pos.pairs) {
    lefts.push_back(i);
    rights.push_back(j);
    batch.targets.push_back(1);
  }
  for (const auto& [i, j] : neg.pairs) {
    lefts.push_back(i);
    rights.push_back(j);
    batch.targets.push_back(0);
  }
  batch.left = loss_detail::selection_csr(lefts, n);
  batch.right = loss_detail::selection_csr(rights, n);
  return batch;
}

// The batch must outlive the tape (the tape keeps CSR pointers).
// BCE of sigmoid(h_i . h_j) computed in logit space as a two-class cross
// entropy over [0, logit]; identical value, gradients stay alive when the
// inner products saturate.
inline int sufficiency_loss_on_tape(ad::Tape& tape, int h, const PairBatch& batch) {
  const int d = tape.value(h).cols();
  const int m = batch.left.rows;
  const int hi = tape.sparse_dense_matmul(batch.left, h);
  const int hj = tape.sparse_dense_matmul(batch.right, h);
  const int prod = tape.elementwise_multiply(hi, hj);
  const int logits = tape.dense_matmul(prod, tape.constant(Matrix(d, 1, 1.0)));
  const int two_class = tape.concat_columns(tape.constant(Matrix(m, 1, 0.0)), logits);
  return tape.mean_reduce(tape.softmax_cross_entropy(two_class, batch.targets));
}

// Invariance: per node, the mean dis() to its content stand-ins plus the
// mean dis() to its environment stand-ins plus gamma * |cos(c_i, e_i)|,
// averaged over nodes. Nodes with fewer than K candidates use their actual
// count; empty lists contribute nothing.
struct InvariancePairs {
  Csr self_c, cand_c;  // (i, e_k(i)) selections for the content side
  Csr self_e, cand_e;  // (i, c_k(i)) selections for the environment side
  Matrix weight_c, weight_e;  // per-pair 1/(n * count_i)
  bool has_c = false, has_e = false;
};

inline InvariancePairs make_invariance_pairs(const CFIndex& index, int n) {
  InvariancePairs pairs;
  std::vector<int> self_c, cand_c, self_e, cand_e;
  std::vector<double> w_c, w_e;
  for (int i = 0; i < index.n(); ++i) {
    if (!index.e_idx[i].empty()) {
      const double w = 1.0 / (static_cast<double>(n) * index.e_idx[i].size());
      for (int j : index.e_idx[i]) {
        self_c.push_back(i);
        cand_c.push_back(j);
        w_c.push_back(w);
      }
    }
    if (!index.c_idx[i].empty()) {
      const double w = 1.0 / (static_cast<double>(n) * index.c_idx[i].size());
      for (int j : index.c_idx[i]) {
        self_e.push_back(i);
        cand_e.push_back(j);
        w_e.push_back(w);
      }
    }
  }
  pairs.has_c = !self_c.empty();
  pairs.has_e = !self_e.empty();
  pairs.self_c = loss_detail::selection_csr(self_c, n);
  pairs.cand_c = loss_detail::selection_csr(cand_c, n);
  pairs.self_e = loss_detail::selection_csr(self_e, n);
  pairs.cand_e = loss_detail::selection_csr(cand_e, n);
  pairs.weight_c = Matrix(static_cast<int>(w_c.size()), 1);
  for (std::size_t r = 0; r < w_c.size(); ++r) pairs.weight_c(static_cast<int>(r), 0) = w_c[r];
  pairs.weight_e = Matrix(static_cast<int>(w_e.size()), 1);
  for (std::size_t r = 0; r < w_e.size(); ++r) pairs.weight_e(static_cast<int>(r), 0) = w_e[r];
  return pairs;
}

namespace loss_detail {

inline int dis_on_tape(ad::Tape& tape, int a, int b, DisMetric metric) {
  if (metric == DisMetric::squared_l2) return tape.row_squared_l2_distance(a, b);
  // cosine distance: 1 - cos
  const int cosv = tape.row_cosine_similarity(a, b);
  const int rows = tape.value(cosv).rows();
  return tape.add(tape.scale(cosv, -1.0), tape.constant(Matrix(rows, 1, 1.0)));
}

}  // namespace loss_detail

// The pairs struct must outlive the tape.
inline int invariance_loss_on_tape(ad::Tape& tape, int content, int environment,
                                   const InvariancePairs& pairs, const LossWeights& weights) {
  int total = tape.constant(Matrix(1, 1, 0.0));
  if (pairs.has_c) {
    const int ci = tape.sparse_dense_matmul(pairs.self_c, content);
    const int cj = tape.sparse_dense_matmul(pairs.cand_c, content);
    const int dis = loss_detail::dis_on_tape(tape, ci, cj, weights.dis_metric);
    total = tape.add(total, tape.sum_reduce(tape.elementwise_multiply(
                          dis, tape.constant(pairs.weight_c))));
  }
  if (pairs.has_e) {
    const int ei = tape.sparse_dense_matmul(pairs.self_e, environment);
    const int ej = tape.sparse_dense_matmul(pairs.cand_e, environment);
    const int dis = loss_detail::dis_on_tape(tape, ei, ej, weights.dis_metric);
    total = tape.add(total, tape.sum_reduce(tape.elementwise_multiply(
                          dis, tape.constant(pairs.weight_e))));
  }
  // Orthogonality: gamma * mean_i |cos(c_i, e_i)|, once per node.
  const int ortho = tape.mean_reduce(
      tape.absolute_value(tape.row_cosine_similarity(content, environment)));
  return tape.add(total, tape.scale(ortho, weights.gamma));
}

inline int total_loss_on_tape(ad::Tape& tape, int l_pred, int l_inv, int l_suf,
                              const LossWeights& weights) {
  return tape.add(l_pred,
                  tape.add(tape.scale(l_inv, weights.alpha), tape.scale(l_suf, weights.beta)));
}

// --- Numeric wrappers (fresh tape per call), pure functions of their
// inputs. ---

inline double prediction_loss(const Matrix& logits, const Graph& g) {
  ad::Tape tape;
  return tape.value(prediction_loss_on_tape(tape, tape.input(logits), g))(0, 0);
}

inline double sufficiency_loss(const Matrix& h, const EdgeSet& pos, const EdgeSet& neg) {
  ad::Tape tape;
  const PairBatch batch = make_pair_batch(pos, neg, h.rows());
  return tape.value(sufficiency_loss_on_tape(tape, tape.input(h), batch))(0, 0);
}

inline double invariance_loss(const Matrix& content, const Matrix& environment,
                              const CFIndex& index, const LossWeights& weights) {
  ad::Tape tape;
  const InvariancePairs pairs = make_invariance_pairs(index, content.rows());
  return tape.value(invariance_loss_on_tape(tape, tape.input(content),
                                            tape.input(environment), pairs, weights))(0, 0);
}

inline double total_loss(double l_pred, double l_inv, double l_suf, const LossWeights& w) {
  return l_pred + w.alpha * l_inv + w.beta * l_suf;
}

}  // namespace caf
