#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"
#include "rpcaf/projection.hpp"
#include "rpcaf/threshold.hpp"

namespace rpcaf {

/// ||aᵀa - I||_F
inline double orthonormality_defect(const DenseMatrix& a) {
  Eigen::MatrixXd g = a.map().transpose() * a.map();
  g.diagonal().array() -= 1.0;
  return g.norm();
}

/// Orthonormal basis of col(a) via Householder QR, with the R diagonal made
/// positive so the result is deterministic and idempotent. Rank-deficient
/// input raises RankError.
inline DenseMatrix orthonormalize(const DenseMatrix& a) {
  const int n = a.rows();
  const int d = a.cols();
  if (d > n) throw RankError("more columns than rows cannot be orthonormal");
  Eigen::MatrixXd m = a.map();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd& qrm = qr.matrixQR();
  double max_diag = 0.0;
  for (int i = 0; i < d; ++i) max_diag = std::max(max_diag, std::fabs(qrm(i, i)));
  for (int i = 0; i < d; ++i) {
    if (std::fabs(qrm(i, i)) <= 1e-12 * max_diag) {
      throw RankError("rank-deficient input to orthonormalize");
    }
  }
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
  for (int i = 0; i < d; ++i) {
    if (qrm(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return from_eigen(q);
}

/// Orthonormal side-information dictionaries X (n1 x d1) and Y (n2 x d2).
/// Inputs that fail the orthonormality tolerance are re-orthonormalized by
/// default; Policy::Require turns that repair into an error for strict runs.
class FeaturePair {
 public:
  enum class Policy { Orthonormalize, Require };

  static constexpr double kOrthoTol = 1e-10;

  FeaturePair(DenseMatrix x, DenseMatrix y,
              Policy policy = Policy::Orthonormalize)
      : x_(std::move(x)), y_(std::move(y)) {
    repair_or_reject(x_, policy, "X");
    repair_or_reject(y_, policy, "Y");
  }

  static FeaturePair identities(int n1, int n2) {
    return FeaturePair(DenseMatrix::identity(n1), DenseMatrix::identity(n2),
                       Policy::Require);
  }

  const DenseMatrix& x() const { return x_; }
  const DenseMatrix& y() const { return y_; }
  int d1() const { return x_.cols(); }
  int d2() const { return y_.cols(); }

 private:
  static void repair_or_reject(DenseMatrix& m, Policy policy,
                               const char* name) {
    if (m.cols() > m.rows()) {
      throw DimensionError(std::string(name) +
                           " has more columns than rows");
    }
    if (orthonormality_defect(m) > kOrthoTol) {
      if (policy == Policy::Require) {
        throw ValueError(std::string(name) + " is not orthonormal");
      }
      m = orthonormalize(m);
    }
  }

  DenseMatrix x_;
  DenseMatrix y_;
};

/// Solver input: observation, features, target rank and the informed
/// per-row/column corruption fraction.
struct Problem {
  DenseMatrix m;
  FeaturePair features;
  int rank;
  double alpha;

  Problem(DenseMatrix obs, FeaturePair feats, int r, double a)
      : m(std::move(obs)), features(std::move(feats)), rank(r), alpha(a) {
    if (features.x().rows() != m.rows() || features.y().rows() != m.cols()) {
      throw DimensionError("feature row counts must match the observation");
    }
    if (rank < 1 || rank > std::min(features.d1(), features.d2())) {
      throw RankError("rank must lie in [1, min(d1, d2)]");
    }
    if (!(alpha >= 0.0 && alpha < 1.0)) {
      throw ValueError("corruption fraction must lie in [0, 1)");
    }
  }

  int n1() const { return m.rows(); }
  int n2() const { return m.cols(); }
};

/// The (P, Q) iterate pair; the implied low-rank estimate is X P Qᵀ Yᵀ.
struct FactorPair {
  DenseMatrix p;
  DenseMatrix q;

  FactorPair(DenseMatrix p_in, DenseMatrix q_in)
      : p(std::move(p_in)), q(std::move(q_in)) {
    if (p.cols() != q.cols()) {
      throw DimensionError("factor pair column counts differ");
    }
  }

  int rank() const { return p.cols(); }
};

enum class IncoherenceCase { I, II, III };

struct ThresholdRule {
  enum class Kind { PaperMin, Custom };
  Kind kind = Kind::PaperMin;
  double custom_theta = 0.0;

  static ThresholdRule paper_min() { return {}; }
  static ThresholdRule custom(double theta) {
    ThresholdRule r;
    r.kind = Kind::Custom;
    r.custom_theta = std::clamp(theta, 0.0, 1.0);
    return r;
  }

  double gradient_theta(double alpha) const {
    return kind == Kind::PaperMin ? threshold_value(alpha) : custom_theta;
  }
};

struct SolverConfig {
  double step_size = 0.5;
  int max_iters = 3000;
  double tol = 1e-7;
  IncoherenceCase incoherence_case = IncoherenceCase::II;
  std::optional<double> mu1;  // nullopt = estimate from the initialization
  ProjectionSettings projection;
  ThresholdRule threshold_rule;
  KeepRule keep_rule = KeepRule::ZeroIfBelowBoth;
  // Replaces the fixed step with 1 / (192 ||L0||_2).
  bool safe_step = false;

  void validate() const {
    if (!(step_size > 0.0)) throw ValueError("step size must be positive");
    if (max_iters < 1) throw ValueError("need at least one iteration");
    if (!(tol > 0.0)) throw ValueError("tolerance must be positive");
    if (mu1 && !(*mu1 > 0.0)) throw ValueError("mu1 must be positive");
    if (projection.dykstra_iters < 0) {
      throw ValueError("projection cycle count must be non-negative");
    }
  }
};

struct RecoveryResult {
  DenseMatrix l;
  DenseMatrix s;
  FactorPair factors;
  int iterations_run = 0;
  std::vector<double> residual_history;  // ||M - L - S||_F / ||M||_F per iter
  bool converged = false;
  std::chrono::duration<double> elapsed{0.0};
};

}  // namespace rpcaf
