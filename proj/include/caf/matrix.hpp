#pragma once

#include <cmath>
#include <cstring>
#include <initializer_list>
#include <string>
#include <vector>

#include "caf/errors.hpp"

namespace caf {

// Dense row-major matrix of doubles. All numerics in the project are
// 64-bit; problem sizes are small enough that naive kernels suffice.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw ValidationError("Matrix::from_rows: ragged rows");
      int j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Byte-level equality, for determinism contracts.
inline bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

inline bool all_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i])) return false;
  return true;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ValidationError("matmul: inner dimensions " + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.rows()));
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i);
    double* or_ = out.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double av = ar[k];
      if (av == 0.0) continue;
      const double* br = b.row(k);
      for (int j = 0; j < b.cols(); ++j) or_[j] += av * br[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// Compressed sparse row matrix. Column indices are sorted within each row.
struct Csr {
  int rows = 0, cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col_idx;
  std::vector<double> values;

  int nnz() const { return static_cast<int>(col_idx.size()); }
};

inline Matrix spmm(const Csr& s, const Matrix& x) {
  if (s.cols != x.rows())
    throw ValidationError("spmm: inner dimensions " + std::to_string(s.cols) +
                          " vs " + std::to_string(x.rows()));
  Matrix out(s.rows, x.cols());
  for (int i = 0; i < s.rows; ++i) {
    double* or_ = out.row(i);
    for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
      const double v = s.values[p];
      const double* xr = x.row(s.col_idx[p]);
      for (int j = 0; j < x.cols(); ++j) or_[j] += v * xr[j];
    }
  }
  return out;
}

// into += transpose(s) * upstream, used by reverse-mode sparse products.
inline void spmm_transpose_add(const Csr& s, const Matrix& upstream, Matrix& into) {
  for (int i = 0; i < s.rows; ++i) {
    const double* ur = upstream.row(i);
    for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
      const double v = s.values[p];
      double* tr = into.row(s.col_idx[p]);
      for (int j = 0; j < upstream.cols(); ++j) tr[j] += v * ur[j];
    }
  }
}

inline Matrix csr_to_dense(const Csr& s) {
  Matrix out(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i)
    for (int p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p)
      out(i, s.col_idx[p]) += s.values[p];
  return out;
}

}  // namespace caf
