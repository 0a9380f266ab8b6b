#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"

namespace rpcaf {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense real matrix with row-major 64-bit storage. Immutable in spirit:
/// all library operations return fresh values. Entries supplied from the
/// outside are validated to be finite at construction.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    check_shape(rows, cols);
    entries_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  }

  DenseMatrix(int rows, int cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    check_shape(rows, cols);
    if (entries_.size() != static_cast<std::size_t>(rows) * cols) {
      throw DimensionError("entry count " + std::to_string(entries_.size()) +
                           " does not match " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
    for (double v : entries_) {
      if (!std::isfinite(v)) {
        throw ValueError("non-finite matrix entry");
      }
    }
  }

  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double& operator()(int i, int j) {
    return entries_[static_cast<std::size_t>(i) * cols_ + j];
  }

  const std::vector<double>& entries() const { return entries_; }
  const double* data() const { return entries_.data(); }
  double* data() { return entries_.data(); }

  Eigen::Map<const EigenRowMajor> map() const {
    return {entries_.data(), rows_, cols_};
  }
  Eigen::Map<EigenRowMajor> map() {
    return {entries_.data(), rows_, cols_};
  }

  bool operator==(const DenseMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           entries_ == other.entries_;
  }

 private:
  static void check_shape(int rows, int cols) {
    if (rows < 1 || cols < 1) {
      throw DimensionError("matrix dimensions must be positive, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> entries_;
};

/// Wraps an Eigen expression back into a DenseMatrix.
template <typename Derived>
DenseMatrix from_eigen(const Eigen::MatrixBase<Derived>& m) {
  DenseMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  out.map() = m;
  return out;
}

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                               const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shapes " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("product shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
  DenseMatrix out(a.rows(), b.cols());
  out.map().noalias() = a.map() * b.map();
  return out;
}

/// a * bᵀ without forming the transpose.
inline DenseMatrix times_transpose(const DenseMatrix& a,
                                   const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("a*b^T with inner sizes " + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()));
  }
  DenseMatrix out(a.rows(), b.rows());
  out.map().noalias() = a.map() * b.map().transpose();
  return out;
}

/// aᵀ * b without forming the transpose.
inline DenseMatrix transpose_times(const DenseMatrix& a,
                                   const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("a^T*b with inner sizes " + std::to_string(a.rows()) +
                         " vs " + std::to_string(b.rows()));
  }
  DenseMatrix out(a.cols(), b.cols());
  out.map().noalias() = a.map().transpose() * b.map();
  return out;
}

inline DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "sum");
  DenseMatrix out(a.rows(), a.cols());
  out.map() = a.map() + b.map();
  return out;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "difference");
  DenseMatrix out(a.rows(), a.cols());
  out.map() = a.map() - b.map();
  return out;
}

inline DenseMatrix operator*(double c, const DenseMatrix& a) {
  DenseMatrix out(a.rows(), a.cols());
  out.map() = c * a.map();
  return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  out.map() = a.map().transpose();
  return out;
}

inline double frobenius_norm(const DenseMatrix& a) { return a.map().norm(); }

/// Largest singular value.
inline double spectral_norm(const DenseMatrix& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.map());
  return svd.singularValues()(0);
}

/// Entrywise max |a_ij|.
inline double max_abs(const DenseMatrix& a) {
  return a.map().cwiseAbs().maxCoeff();
}

/// The (2,inf) norm: maximum row l2-norm.
inline double max_row_norm(const DenseMatrix& a) {
  return std::sqrt(a.map().rowwise().squaredNorm().maxCoeff());
}

inline bool all_finite(const DenseMatrix& a) {
  for (double v : a.entries()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace rpcaf
