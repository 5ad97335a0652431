#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "caf/autodiff.hpp"
#include "caf/matrix.hpp"
#include "caf/rng.hpp"

namespace caf::ad {

constexpr double kFdEps = 1e-6;
constexpr double kKinkMargin = 1e-4;

// Relative error with the both-tiny convention: 0 when |a| and |b| are
// both below 1e-12.
inline double relative_error(double a, double b) {
  if (std::fabs(a) < 1e-12 && std::fabs(b) < 1e-12) return 0.0;
  return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

// Central finite differences of a scalar function of matrix leaves.
inline std::vector<Matrix> finite_difference_gradients(
    const std::function<double(const std::vector<Matrix>&)>& f, std::vector<Matrix> leaves,
    double eps = kFdEps) {
  std::vector<Matrix> grads;
  grads.reserve(leaves.size());
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Matrix g(leaves[l].rows(), leaves[l].cols());
    for (std::size_t i = 0; i < leaves[l].size(); ++i) {
      const double keep = leaves[l].data()[i];
      leaves[l].data()[i] = keep + eps;
      const double up = f(leaves);
      leaves[l].data()[i] = keep - eps;
      const double down = f(leaves);
      leaves[l].data()[i] = keep;
      g.data()[i] = (up - down) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t i = 0; i < a[l].size(); ++i)
      worst = std::max(worst, relative_error(a[l].data()[i], b[l].data()[i]));
  return worst;
}

namespace detail {

inline Matrix random_matrix(Rng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
  return m;
}

// Sample away from relu/abs kinks.
inline Matrix random_matrix_off_kink(Rng& rng, int rows, int cols) {
  Matrix m = random_matrix(rng, rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    while (std::fabs(m.data()[i]) < kKinkMargin) m.data()[i] = -1.0 + 2.0 * rng.uniform();
  return m;
}

inline Csr random_csr(Rng& rng, int rows, int cols) {
  Csr s;
  s.rows = rows;
  s.cols = cols;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (rng.uniform() < 0.5) {
        s.col_idx.push_back(j);
        s.values.push_back(-1.0 + 2.0 * rng.uniform());
      }
    }
    s.row_ptr.push_back(static_cast<int>(s.col_idx.size()));
  }
  return s;
}

struct CheckProblem {
  std::vector<Matrix> leaves;
  Csr sparse;
  std::vector<int> targets;
  double factor = 0.0;
  int col_begin = 0, col_end = 0;
};

inline CheckProblem make_problem(Op op, const std::vector<std::pair<int, int>>& shapes,
                                 std::uint64_t seed) {
  Rng rng(stream_key(seed, 0x67636bULL));
  CheckProblem p;
  auto shape = [&](std::size_t i) { return shapes.at(i); };
  switch (op) {
    case Op::relu:
    case Op::absolute_value:
      p.leaves.push_back(random_matrix_off_kink(rng, shape(0).first, shape(0).second));
      break;
    case Op::binary_cross_entropy:
      p.leaves.push_back(random_matrix(rng, shape(0).first, 1, 0.1, 0.9));
      for (int r = 0; r < shape(0).first; ++r)
        p.targets.push_back(static_cast<int>(rng.below(2)));
      break;
    case Op::softmax_cross_entropy:
      p.leaves.push_back(random_matrix(rng, shape(0).first, shape(0).second));
      for (int r = 0; r < shape(0).first; ++r)
        p.targets.push_back(static_cast<int>(rng.below(shape(0).second)));
      break;
    case Op::sparse_dense_matmul:
      p.sparse = random_csr(rng, shape(0).first, shape(0).second);
      p.leaves.push_back(random_matrix(rng, shape(1).first, shape(1).second));
      break;
    case Op::scale:
      p.leaves.push_back(random_matrix(rng, shape(0).first, shape(0).second));
      p.factor = -2.0 + 4.0 * rng.uniform();
      break;
    case Op::slice_columns:
      p.leaves.push_back(random_matrix(rng, shape(0).first, shape(0).second));
      p.col_begin = shape(0).second / 4;
      p.col_end = std::max(p.col_begin + 1, 3 * shape(0).second / 4);
      break;
    default:
      for (std::size_t i = 0; i < shapes.size(); ++i)
        p.leaves.push_back(random_matrix(rng, shape(i).first, shape(i).second));
      break;
  }
  return p;
}

inline double evaluate_problem(Op op, const CheckProblem& p, const std::vector<Matrix>& leaves,
                               std::vector<Matrix>* grads_out) {
  Tape tape;
  std::vector<int> ids;
  ids.reserve(leaves.size());
  for (const auto& m : leaves) ids.push_back(tape.input(m));
  int out = -1;
  switch (op) {
    case Op::dense_matmul: out = tape.dense_matmul(ids.at(0), ids.at(1)); break;
    case Op::sparse_dense_matmul: out = tape.sparse_dense_matmul(p.sparse, ids.at(0)); break;
    case Op::add: out = tape.add(ids.at(0), ids.at(1)); break;
    case Op::scale: out = tape.scale(ids.at(0), p.factor); break;
    case Op::relu: out = tape.relu(ids.at(0)); break;
    case Op::sigmoid: out = tape.sigmoid(ids.at(0)); break;
    case Op::concat_columns: out = tape.concat_columns(ids.at(0), ids.at(1)); break;
    case Op::slice_columns: out = tape.slice_columns(ids.at(0), p.col_begin, p.col_end); break;
    case Op::row_cosine_similarity:
      out = tape.row_cosine_similarity(ids.at(0), ids.at(1));
      break;
    case Op::row_squared_l2_distance:
      out = tape.row_squared_l2_distance(ids.at(0), ids.at(1));
      break;
    case Op::softmax_cross_entropy:
      out = tape.softmax_cross_entropy(ids.at(0), p.targets);
      break;
    case Op::binary_cross_entropy:
      out = tape.binary_cross_entropy(ids.at(0), p.targets);
      break;
    case Op::mean_reduce: out = tape.mean_reduce(ids.at(0)); break;
    case Op::sum_reduce: out = tape.sum_reduce(ids.at(0)); break;
    case Op::absolute_value: out = tape.absolute_value(ids.at(0)); break;
    case Op::elementwise_multiply: out = tape.elementwise_multiply(ids.at(0), ids.at(1)); break;
    case Op::input:
    case Op::constant:
      throw ValidationError("gradient_check: leaves have no gradient rule to check");
  }
  if (tape.value(out).rows() != 1 || tape.value(out).cols() != 1) out = tape.sum_reduce(out);
  const double y = tape.value(out)(0, 0);
  if (grads_out) {
    tape.backward(out);
    grads_out->clear();
    for (int id : ids) grads_out->push_back(tape.grad(id));
  }
  return y;
}

}  // namespace detail

// Max relative error between the op's reverse-mode gradients and central
// finite differences on a random instance of the given input shapes.
inline double gradient_check(Op op, const std::vector<std::pair<int, int>>& shapes,
                             std::uint64_t seed) {
  const auto problem = detail::make_problem(op, shapes, seed);
  std::vector<Matrix> analytic;
  detail::evaluate_problem(op, problem, problem.leaves, &analytic);
  const auto fd = finite_difference_gradients(
      [&](const std::vector<Matrix>& leaves) {
        return detail::evaluate_problem(op, problem, leaves, nullptr);
      },
      problem.leaves);
  return max_relative_error(analytic, fd);
}

}  // namespace caf::ad
