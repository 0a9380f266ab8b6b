#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"
#include "rpcaf/model.hpp"
#include "rpcaf/rng.hpp"

namespace rpcaf {

/// Everything the generator knows about an instance: the true decomposition,
/// its singular triple and the implied true factor pair.
struct GroundTruth {
  DenseMatrix l_star;
  DenseMatrix s_star;
  DenseMatrix u_star;
  DenseMatrix v_star;
  std::vector<double> sigma_star;
  FactorPair star_factors;  // P* = Xᵀ U* Σ*^{1/2}, Q* = Yᵀ V* Σ*^{1/2}

  double sigma1() const { return sigma_star.front(); }
  double sigma_r() const { return sigma_star.back(); }
  double kappa() const { return sigma1() / sigma_r(); }
};

/// Rotation-invariant distance between factor pairs:
///   min over orthogonal R of sqrt(||A - A*R||_F^2 + ||B - B*R||_F^2),
/// solved exactly by the orthogonal Procrustes alignment R = U Vᵀ from the
/// SVD of A*ᵀA + B*ᵀB. Reflections are admitted (full orthogonal group).
inline double factor_distance(const FactorPair& f, const FactorPair& f_star) {
  if (f.rank() != f_star.rank()) {
    throw DimensionError("factor pairs have different ranks");
  }
  if (f.p.rows() != f_star.p.rows() || f.q.rows() != f_star.q.rows()) {
    throw DimensionError("factor pairs have different shapes");
  }
  const Eigen::MatrixXd w = f_star.p.map().transpose() * f.p.map() +
                            f_star.q.map().transpose() * f.q.map();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd rot = svd.matrixU() * svd.matrixV().transpose();
  const double dp = (f.p.map() - f_star.p.map() * rot).squaredNorm();
  const double dq = (f.q.map() - f_star.q.map() * rot).squaredNorm();
  return std::sqrt(dp + dq);
}

/// ||L - L*||_F / ||L*||_F
inline double relative_error(const DenseMatrix& l, const DenseMatrix& l_star) {
  require_same_shape(l, l_star, "relative error");
  const double denom = frobenius_norm(l_star);
  if (denom == 0.0) throw DegenerateError("reference matrix is zero");
  return frobenius_norm(l - l_star) / denom;
}

/// Smallest constant mu with max row norm <= sqrt(mu * cols / rows):
/// mu = (rows / cols) * ||u||_{2,inf}^2. Applies both to orthonormal factors
/// (cols = r) and to feature dictionaries (cols = d).
inline double incoherence(const DenseMatrix& u) {
  const double mrn = max_row_norm(u);
  return static_cast<double>(u.rows()) / u.cols() * mrn * mrn;
}

struct TheoryBounds {
  IncoherenceCase inc_case;
  double mu1;
  double mu2;
  double kappa;
  double alpha_init_bound;
  double alpha_descent_bound;
  double init_distance_bound;
  // The descent bound's absolute constants are existential; it is evaluated
  // with c = 1 and must be read as a scaling, not a sharp threshold.
  bool descent_bound_up_to_constant = true;
};

/// Corruption-bound calculators for the initialization and descent phases,
/// evaluated with ground-truth constants at corruption level alpha.
inline TheoryBounds theory_bounds(const GroundTruth& gt,
                                  const FeaturePair& features,
                                  IncoherenceCase inc_case, double alpha) {
  TheoryBounds b{};
  b.inc_case = inc_case;
  b.mu1 = std::max(incoherence(gt.u_star), incoherence(gt.v_star));
  b.mu2 = std::max(incoherence(features.x()), incoherence(features.y()));
  b.kappa = gt.kappa();
  const double r = gt.star_factors.rank();
  const double d1 = features.d1();
  const double d2 = features.d2();
  const double d = std::sqrt(d1 * d2);
  const double sigma1 = gt.sigma1();

  switch (inc_case) {
    case IncoherenceCase::I:
      b.alpha_init_bound = 1.0 / (16.0 * b.kappa * r * b.mu1);
      b.init_distance_bound =
          18.0 * alpha * r * b.mu1 * std::sqrt(r * b.kappa * sigma1);
      b.alpha_descent_bound = 1.0 / (b.mu1 * std::pow(b.kappa * r, 1.5));
      break;
    case IncoherenceCase::II:
      b.alpha_init_bound = 1.0 / (16.0 * b.kappa * b.mu2 * d);
      b.init_distance_bound =
          18.0 * alpha * b.mu2 * std::sqrt(r * d1 * d2 * b.kappa * sigma1);
      b.alpha_descent_bound =
          1.0 / (b.mu2 * d * std::sqrt(r) * std::pow(b.kappa, 1.5));
      break;
    case IncoherenceCase::III:
      b.alpha_init_bound = 1.0 / (16.0 * b.kappa * r * b.mu1);
      b.init_distance_bound =
          18.0 * alpha * r * b.mu1 * std::sqrt(r * b.kappa * sigma1);
      b.alpha_descent_bound =
          std::min(1.0 / (b.mu2 * d * b.kappa),
                   1.0 / (b.mu1 * std::pow(b.kappa * r, 1.5)));
      break;
  }
  return b;
}

struct LemmaReport {
  int trials = 0;
  int spectral_support_pass = 0;   // ||A||_2 <= beta*n*||A||_inf
  int entry_svd_pass = 0;          // ||A||_inf <= sigma1*||U||_2inf*||V||_2inf
  int contraction_pass = 0;        // d(XᵀA, YᵀB, XᵀC, YᵀD) <= d(A,B,C,D)

  bool all_passed() const {
    return spectral_support_pass == trials && entry_svd_pass == trials &&
           contraction_pass == trials;
  }
};

namespace detail {

inline DenseMatrix random_gaussian(SplitMix64& rng, int rows, int cols,
                                   double stddev = 1.0) {
  DenseMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = stddev * rng.gaussian();
  }
  return m;
}

inline DenseMatrix random_orthonormal(SplitMix64& rng, int rows, int cols) {
  return orthonormalize(random_gaussian(rng, rows, cols));
}

inline std::string serialize_counterexample(const char* lemma,
                                            const DenseMatrix& m,
                                            double lhs, double rhs) {
  std::ostringstream os;
  os.precision(17);
  os << lemma << " violated: lhs " << lhs << " > rhs " << rhs << "; matrix "
     << m.rows() << "x" << m.cols() << ":";
  for (int i = 0; i < m.rows(); ++i) {
    os << "\n";
    for (int j = 0; j < m.cols(); ++j) {
      os << m(i, j) << (j + 1 < m.cols() ? "," : "");
    }
  }
  return os.str();
}

}  // namespace detail

/// Randomized numerical checks of three inequalities the analysis leans on:
/// the spectral bound for row/column-sparse matrices, the entrywise bound via
/// the singular triple, and non-expansion of the factor distance under
/// orthonormal compression. Throws LemmaViolationError with the offending
/// instance on any failure; tolerance slack is 1e-10.
inline LemmaReport lemma_property_checks(int trials,
                                         std::uint64_t seed = 0x5EEDu) {
  if (trials < 1) throw ValueError("need at least one trial");
  constexpr double kSlack = 1e-10;
  SplitMix64 rng(seed);
  LemmaReport report;
  report.trials = trials;
  std::vector<int> scratch;

  for (int t = 0; t < trials; ++t) {
    // Sparse-support spectral bound. Support = union of k random
    // permutations, so each row and column holds at most k = beta*n entries.
    {
      const int n = 8 + static_cast<int>(rng.below(17));
      const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n / 2)));
      DenseMatrix a(n, n);
      std::vector<int> perm(static_cast<std::size_t>(n));
      for (int rep = 0; rep < k; ++rep) {
        for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        for (int i = 0; i < n; ++i) {
          a(i, perm[static_cast<std::size_t>(i)]) = rng.uniform(-1.0, 1.0);
        }
      }
      const double lhs = spectral_norm(a);
      const double rhs = static_cast<double>(k) * max_abs(a);
      if (lhs > rhs + kSlack) {
        throw LemmaViolationError(detail::serialize_counterexample(
            "sparse-support spectral bound", a, lhs, rhs));
      }
      ++report.spectral_support_pass;
    }

    // Entrywise bound from the compact SVD.
    {
      const int n = 8 + static_cast<int>(rng.below(17));
      const int m = 8 + static_cast<int>(rng.below(17));
      const int r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min({n, m, 6}))));
      const DenseMatrix u = detail::random_orthonormal(rng, n, r);
      const DenseMatrix v = detail::random_orthonormal(rng, m, r);
      std::vector<double> sigma(static_cast<std::size_t>(r));
      for (double& s : sigma) s = rng.uniform(0.5, 2.0);
      std::sort(sigma.rbegin(), sigma.rend());
      DenseMatrix us = u;
      for (int c = 0; c < r; ++c) {
        for (int i = 0; i < n; ++i) us(i, c) *= sigma[static_cast<std::size_t>(c)];
      }
      const DenseMatrix a = times_transpose(us, v);
      const double lhs = max_abs(a);
      const double rhs = sigma[0] * max_row_norm(u) * max_row_norm(v);
      if (lhs > rhs + kSlack) {
        throw LemmaViolationError(detail::serialize_counterexample(
            "entrywise SVD bound", a, lhs, rhs));
      }
      ++report.entry_svd_pass;
    }

    // Factor-distance contraction under orthonormal compression.
    {
      const int n = 10 + static_cast<int>(rng.below(11));
      const int m = 10 + static_cast<int>(rng.below(11));
      const int d1 = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 2)));
      const int d2 = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - 2)));
      const int r = 1 + static_cast<int>(rng.below(4));
      const DenseMatrix x = detail::random_orthonormal(rng, n, d1);
      const DenseMatrix y = detail::random_orthonormal(rng, m, d2);
      const DenseMatrix a = detail::random_gaussian(rng, n, r);
      const DenseMatrix b = detail::random_gaussian(rng, m, r);
      const DenseMatrix c = detail::random_gaussian(rng, n, r);
      const DenseMatrix e = detail::random_gaussian(rng, m, r);
      const double lhs =
          factor_distance(FactorPair(transpose_times(x, a), transpose_times(y, b)),
                          FactorPair(transpose_times(x, c), transpose_times(y, e)));
      const double rhs = factor_distance(FactorPair(a, b), FactorPair(c, e));
      if (lhs > rhs + kSlack) {
        throw LemmaViolationError(detail::serialize_counterexample(
            "distance contraction", a, lhs, rhs));
      }
      ++report.contraction_pass;
    }
  }
  return report;
}

}  // namespace rpcaf
