#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"

namespace rpcaf {

/// Top-r singular triple; u and v have orthonormal columns and sigma is
/// non-negative and non-increasing.
struct SvdTriple {
  DenseMatrix u;
  std::vector<double> sigma;
  DenseMatrix v;
};

/// Rank-r truncated SVD. Column signs are fixed so that each u-column's
/// largest-magnitude entry (first such index on ties) is positive, making the
/// output deterministic.
inline SvdTriple truncated_svd(const DenseMatrix& a, int r) {
  const int mn = std::min(a.rows(), a.cols());
  if (r < 1 || r > mn) {
    throw RankError("rank " + std::to_string(r) + " outside [1, " +
                    std::to_string(mn) + "]");
  }
  Eigen::MatrixXd m = a.map();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  Eigen::MatrixXd v = svd.matrixV().leftCols(r);
  std::vector<double> sigma(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) sigma[static_cast<std::size_t>(i)] = svd.singularValues()(i);

  for (int c = 0; c < r; ++c) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < u.rows(); ++i) {
      const double mag = std::fabs(u(i, c));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (u(arg, c) < 0.0) {
      u.col(c) = -u.col(c);
      v.col(c) = -v.col(c);
    }
  }
  return {from_eigen(u), std::move(sigma), from_eigen(v)};
}

}  // namespace rpcaf
