#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"

namespace rpcaf {

/// Which entries survive the row/column top-fraction operator.
///   ZeroIfBelowBoth: an entry is zeroed only when it is outside the top
///     fraction of BOTH its row and its column (i.e. kept when large in
///     either).
///   KeepIfAboveBoth: an entry is kept only when it is inside the top
///     fraction of both its row and its column.
enum class KeepRule { ZeroIfBelowBoth, KeepIfAboveBoth };

struct ThresholdSpec {
  double theta = 0.0;
  KeepRule keep_rule = KeepRule::ZeroIfBelowBoth;

  ThresholdSpec() = default;
  ThresholdSpec(double t, KeepRule rule = KeepRule::ZeroIfBelowBoth)
      : theta(std::clamp(t, 0.0, 1.0)), keep_rule(rule) {}
};

/// The gradient-phase threshold fraction for a given corruption level:
/// min(alpha + min(10*alpha, 0.1), 1). The initialization phase thresholds
/// with alpha itself.
inline double threshold_value(double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) {
    throw ValueError("corruption fraction must lie in [0, 1)");
  }
  return std::min(alpha + std::min(10.0 * alpha, 0.1), 1.0);
}

namespace detail {

// Rank position of an entry within its line: larger magnitude first, ties
// broken by smaller row-major linear index. Total order, so top-k membership
// is unambiguous.
struct RankedEntry {
  double mag;
  std::int64_t idx;
};

inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  return a.mag > b.mag || (a.mag == b.mag && a.idx < b.idx);
}

// floor(theta*n) with a tiny nudge so that fractions like 1/3 stored in
// binary still hit their intended integer.
inline int top_count(double theta, int n) {
  const int k = static_cast<int>(std::floor(theta * n + 1e-9));
  return std::clamp(k, 0, n);
}

}  // namespace detail

/// Row/column top-fraction hard thresholding. An entry belongs to the top of
/// its row when its rank there is at most floor(theta*cols), and likewise for
/// columns with floor(theta*rows); a zero count means nothing qualifies on
/// that axis.
inline DenseMatrix threshold(const DenseMatrix& a, const ThresholdSpec& spec) {
  using detail::RankedEntry;
  const int rows = a.rows();
  const int cols = a.cols();
  const int k_row = detail::top_count(spec.theta, cols);
  const int k_col = detail::top_count(spec.theta, rows);

  // Boundary = the k-th ranked entry of each line; membership is then a
  // single comparison. Partial selection keeps each line linear on average.
  std::vector<RankedEntry> row_bound(rows);
  std::vector<RankedEntry> col_bound(cols);
  std::vector<RankedEntry> line;

  if (k_row > 0) {
    line.resize(cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        line[j] = {std::fabs(a(i, j)),
                   static_cast<std::int64_t>(i) * cols + j};
      }
      std::nth_element(line.begin(), line.begin() + (k_row - 1), line.end(),
                       detail::ranks_before);
      row_bound[i] = line[k_row - 1];
    }
  }
  if (k_col > 0) {
    line.resize(rows);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) {
        line[i] = {std::fabs(a(i, j)),
                   static_cast<std::int64_t>(i) * cols + j};
      }
      std::nth_element(line.begin(), line.begin() + (k_col - 1), line.end(),
                       detail::ranks_before);
      col_bound[j] = line[k_col - 1];
    }
  }

  DenseMatrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const RankedEntry e{std::fabs(a(i, j)),
                          static_cast<std::int64_t>(i) * cols + j};
      const bool in_row_top =
          k_row > 0 && !detail::ranks_before(row_bound[i], e);
      const bool in_col_top =
          k_col > 0 && !detail::ranks_before(col_bound[j], e);
      const bool keep = spec.keep_rule == KeepRule::ZeroIfBelowBoth
                            ? (in_row_top || in_col_top)
                            : (in_row_top && in_col_top);
      out(i, j) = keep ? a(i, j) : 0.0;
    }
  }
  return out;
}

}  // namespace rpcaf
