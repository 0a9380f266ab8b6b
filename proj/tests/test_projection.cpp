#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include <rpcaf/model.hpp>
#include <rpcaf/projection.hpp>
#include <rpcaf/rng.hpp>

#include "test_util.hpp"

using rpcaf::DenseMatrix;
using rpcaf::RowNormBudget;

namespace {

double row_image_norm(const DenseMatrix& feature, int i, const DenseMatrix& a) {
  double s = 0.0;
  for (int c = 0; c < a.cols(); ++c) {
    double v = 0.0;
    for (int k = 0; k < feature.cols(); ++k) v += feature(i, k) * a(k, c);
    s += v * v;
  }
  return std::sqrt(s);
}

double worst_violation(const DenseMatrix& a, const RowNormBudget& b) {
  double worst = 0.0;
  for (int i = 0; i < b.sets(); ++i) {
    worst = std::max(worst, row_image_norm(b.feature(), i, a) - b.cap(i));
  }
  return worst;
}

double violation_energy(const DenseMatrix& a, const RowNormBudget& b) {
  double s = 0.0;
  for (int i = 0; i < b.sets(); ++i) {
    const double v =
        std::max(0.0, row_image_norm(b.feature(), i, a) - b.cap(i));
    s += v * v;
  }
  return s;
}

// Independent numerical minimizer of ||A - p||_F^2 subject to
// ||x A|| = cap. Stationarity gives A(lambda) = (I + lambda xᵀx)⁻¹ p for a
// multiplier lambda >= 0; this oracle solves that d x d system with a
// general-purpose LU factorization (no rank-one inverse identity) and
// bisects on lambda until the constraint holds. ||x A(lambda)|| decreases
// monotonically in lambda, so bisection is valid.
DenseMatrix kkt_bisection_minimizer(const DenseMatrix& p,
                                    const DenseMatrix& feature, int row,
                                    double cap) {
  const int d = p.rows();
  Eigen::VectorXd x(d);
  for (int k = 0; k < d; ++k) x(k) = feature(row, k);
  const Eigen::MatrixXd pm = p.map();

  const auto image_norm = [&](double lambda) {
    const Eigen::MatrixXd sys =
        Eigen::MatrixXd::Identity(d, d) + lambda * (x * x.transpose());
    const Eigen::MatrixXd a = sys.fullPivLu().solve(pm);
    return (x.transpose() * a).norm();
  };

  double lo = 0.0;
  double hi = 1.0;
  while (image_norm(hi) > cap) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (image_norm(mid) > cap ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  const Eigen::MatrixXd sys =
      Eigen::MatrixXd::Identity(d, d) + lambda * (x * x.transpose());
  return rpcaf::from_eigen(sys.fullPivLu().solve(pm));
}

}  // namespace

TEST_CASE("budgets validate caps and shapes") {
  const DenseMatrix f = DenseMatrix::identity(3);
  CHECK_THROWS_AS(RowNormBudget(f, 0.0), rpcaf::ValueError);
  CHECK_THROWS_AS(RowNormBudget(f, std::vector<double>{1.0, 1.0}),
                  rpcaf::DimensionError);
}

TEST_CASE("feasible points are returned unchanged") {
  rpcaf::SplitMix64 rng(3);
  const DenseMatrix p = test_util::random_matrix(rng, 4, 2);
  const RowNormBudget budget(DenseMatrix::identity(4), 1e6);
  for (int i = 0; i < 4; ++i) CHECK(rpcaf::project_single(p, budget, i) == p);
  CHECK(rpcaf::dykstra_project(p, budget, 25) == p);
}

TEST_CASE("identity features constrain one factor row directly") {
  DenseMatrix p(3, 2);
  p(0, 0) = 3.0;
  p(0, 1) = 4.0;  // row norm 5
  p(1, 0) = 0.5;
  p(2, 1) = -0.25;
  const RowNormBudget budget(DenseMatrix::identity(3), 2.5);
  const DenseMatrix out = rpcaf::project_single(p, budget, 0);
  CHECK(out(0, 0) == Catch::Approx(1.5).epsilon(1e-12));
  CHECK(out(0, 1) == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(out(1, 0) == 0.5);
  CHECK(out(2, 1) == -0.25);
}

TEST_CASE("single-set projection lands exactly on the cap") {
  rpcaf::SplitMix64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 3 + static_cast<int>(rng.below(5));
    const int r = 1 + static_cast<int>(rng.below(4));
    const DenseMatrix feature = test_util::random_matrix(rng, 4, d);
    DenseMatrix p = test_util::random_matrix(rng, d, r, 2.0);
    const int row = static_cast<int>(rng.below(4));
    const double norm = row_image_norm(feature, row, p);
    if (norm < 1e-9) continue;
    const double cap = 0.5 * norm;  // force a violation
    const RowNormBudget budget(feature, cap);
    const DenseMatrix out = rpcaf::project_single(p, budget, row);
    CHECK(row_image_norm(feature, row, out) == Catch::Approx(cap).margin(1e-10));
  }
}

TEST_CASE("single-set projection matches an independent constrained minimizer") {
  rpcaf::SplitMix64 rng(29);
  const int d = 6, r = 3;
  DenseMatrix feature = test_util::random_matrix(rng, 1, d);
  {  // unit feature row, as in the reference setup
    double n = 0.0;
    for (int k = 0; k < d; ++k) n += feature(0, k) * feature(0, k);
    n = std::sqrt(n);
    for (int k = 0; k < d; ++k) feature(0, k) /= n;
  }
  const DenseMatrix p = test_util::random_matrix(rng, d, r);
  const double cap = 0.5;
  REQUIRE(row_image_norm(feature, 0, p) > cap);

  const RowNormBudget budget(feature, cap);
  const DenseMatrix closed = rpcaf::project_single(p, budget, 0);
  const DenseMatrix numeric = kkt_bisection_minimizer(p, feature, 0, cap);
  CHECK(test_util::max_abs_diff(closed, numeric) < 1e-6);

  // optimality probe: no sampled feasible point is closer to p
  const double dist = rpcaf::frobenius_norm(closed - p);
  for (int probe = 0; probe < 200; ++probe) {
    DenseMatrix z = test_util::random_matrix(rng, d, r);
    const double zn = row_image_norm(feature, 0, z);
    if (zn > cap) z = (cap / zn) * z;
    CHECK(rpcaf::frobenius_norm(z - p) >= dist - 1e-9);
  }
}

TEST_CASE("projection never moves away from feasible points") {
  rpcaf::SplitMix64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 5, r = 2;
    const DenseMatrix feature = test_util::random_matrix(rng, 6, d);
    const DenseMatrix p = test_util::random_matrix(rng, d, r, 2.0);
    const int row = static_cast<int>(rng.below(6));
    const double cap = 0.25 + rng.uniform01();
    const RowNormBudget budget(feature, cap);
    const DenseMatrix projected = rpcaf::project_single(p, budget, row);
    // a feasible point: shrink a random candidate into the set
    DenseMatrix z = test_util::random_matrix(rng, d, r);
    const double zn = row_image_norm(feature, row, z);
    if (zn > cap) z = (0.9 * cap / zn) * z;
    CHECK(rpcaf::frobenius_norm(projected - z) <=
          rpcaf::frobenius_norm(p - z) + 1e-12);
  }
}

TEST_CASE("zero cycles or an all-feasible start are no-ops") {
  rpcaf::SplitMix64 rng(37);
  const DenseMatrix feature = test_util::random_matrix(rng, 5, 4);
  const DenseMatrix p = test_util::random_matrix(rng, 4, 2);
  const RowNormBudget loose(feature, 1e9);
  CHECK(rpcaf::dykstra_project(p, loose, 0) == p);
  CHECK(rpcaf::dykstra_project(p, loose, 100) == p);
}

TEST_CASE("decoupled sets reduce to independent per-row clipping") {
  rpcaf::SplitMix64 rng(41);
  const int d = 6, r = 3;
  const DenseMatrix p = test_util::random_matrix(rng, d, r, 2.0);
  std::vector<double> caps;
  for (int i = 0; i < d; ++i) caps.push_back(0.2 + 0.5 * rng.uniform01());
  const RowNormBudget budget(DenseMatrix::identity(d), caps);

  DenseMatrix clipped = p;
  for (int i = 0; i < d; ++i) {
    double n = 0.0;
    for (int c = 0; c < r; ++c) n += p(i, c) * p(i, c);
    n = std::sqrt(n);
    if (n > caps[static_cast<std::size_t>(i)]) {
      for (int c = 0; c < r; ++c) {
        clipped(i, c) = p(i, c) * caps[static_cast<std::size_t>(i)] / n;
      }
    }
  }
  const DenseMatrix out = rpcaf::dykstra_project(p, budget, 500);
  CHECK(test_util::max_abs_diff(out, clipped) < 1e-8);
}

TEST_CASE("dykstra reaches the intersection and never worsens across cycles") {
  rpcaf::SplitMix64 rng(43);
  const int n = 20, d = 7, r = 3;
  const DenseMatrix feature = test_util::random_matrix(rng, n, d);
  const DenseMatrix p = test_util::random_matrix(rng, d, r, 2.0);
  std::vector<double> caps;
  for (int i = 0; i < n; ++i) caps.push_back(0.3 + rng.uniform01());
  const RowNormBudget budget(feature, caps);

  double prev_energy = violation_energy(p, budget);
  DenseMatrix iterate = p;
  for (int cycle = 1; cycle <= 60; ++cycle) {
    iterate = rpcaf::dykstra_project(p, budget, cycle);
    const double energy = violation_energy(iterate, budget);
    CHECK(energy <= prev_energy + 1e-12);
    prev_energy = energy;
  }
  const DenseMatrix converged = rpcaf::dykstra_project(p, budget, 500);
  CHECK(worst_violation(converged, budget) < 1e-8);
}

TEST_CASE("project_factor honors the mode switch") {
  rpcaf::SplitMix64 rng(47);
  const DenseMatrix p = test_util::random_matrix(rng, 5, 2, 3.0);
  const DenseMatrix feature = test_util::random_matrix(rng, 8, 5);
  const RowNormBudget budget(feature, 0.5);

  rpcaf::ProjectionSettings off;
  CHECK(rpcaf::project_factor(p, std::nullopt, off) == p);
  CHECK(rpcaf::project_factor(p, budget, off) == p);

  rpcaf::ProjectionSettings on{rpcaf::ProjectionMode::SetProjection, 200};
  const DenseMatrix projected = rpcaf::project_factor(p, budget, on);
  CHECK(worst_violation(projected, budget) < 1e-6);
  CHECK_THROWS_AS(rpcaf::project_factor(p, std::nullopt, on),
                  rpcaf::ValueError);

  // a single violated row with identity features rescales just that row
  const RowNormBudget decoupled(DenseMatrix::identity(5), 100.0);
  CHECK(rpcaf::project_factor(p, decoupled, on) == p);
}
