#pragma once

// Shared helpers for the test suites. Oracles used to pin expected values
// live next to the tests that use them, not here, so each stays independent
// of the code path it checks.

#include <rpcaf/matrix.hpp>
#include <rpcaf/rng.hpp>

namespace test_util {

inline rpcaf::DenseMatrix random_matrix(rpcaf::SplitMix64& rng, int rows,
                                        int cols, double stddev = 1.0) {
  rpcaf::DenseMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = stddev * rng.gaussian();
  }
  return m;
}

inline double max_abs_diff(const rpcaf::DenseMatrix& a,
                           const rpcaf::DenseMatrix& b) {
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      worst = std::max(worst, std::fabs(a(i, j) - b(i, j)));
    }
  }
  return worst;
}

}  // namespace test_util
