#include <catch2/catch_amalgamated.hpp>

#include <rpcaf/model.hpp>
#include <rpcaf/rng.hpp>

#include "test_util.hpp"

using rpcaf::DenseMatrix;
using rpcaf::FeaturePair;
using rpcaf::orthonormalize;

TEST_CASE("orthonormalize keeps an identity fixed") {
  const DenseMatrix id = DenseMatrix::identity(4);
  const DenseMatrix q = orthonormalize(id);
  CHECK(test_util::max_abs_diff(q, id) < 1e-14);
}

TEST_CASE("orthonormalize strips column scaling") {
  const DenseMatrix a(3, 2, {2, 0, 0, 3, 0, 0});
  const DenseMatrix q = orthonormalize(a);
  const DenseMatrix expected(3, 2, {1, 0, 0, 1, 0, 0});
  CHECK(test_util::max_abs_diff(q, expected) < 1e-14);
}

TEST_CASE("orthonormalize yields an orthonormal basis of the column space") {
  rpcaf::SplitMix64 rng(7);
  const DenseMatrix a = test_util::random_matrix(rng, 10, 4);
  const DenseMatrix b = orthonormalize(a);
  CHECK(rpcaf::orthonormality_defect(b) < 1e-12);
  // col(b) = col(a): b bᵀ a = a
  const DenseMatrix proj = b * rpcaf::transpose_times(b, a);
  CHECK(rpcaf::frobenius_norm(proj - a) < 1e-10);
  // idempotent up to (fixed) column signs
  const DenseMatrix again = orthonormalize(b);
  CHECK(test_util::max_abs_diff(again, b) < 1e-12);
}

TEST_CASE("orthonormalize rejects rank-deficient input") {
  DenseMatrix a(4, 2);
  for (int i = 0; i < 4; ++i) {
    a(i, 0) = i + 1.0;
    a(i, 1) = 2.0 * (i + 1.0);  // same direction
  }
  CHECK_THROWS_AS(orthonormalize(a), rpcaf::RankError);
}

TEST_CASE("feature pair repairs or rejects non-orthonormal dictionaries") {
  rpcaf::SplitMix64 rng(11);
  const DenseMatrix raw_x = test_util::random_matrix(rng, 8, 3);
  const DenseMatrix raw_y = test_util::random_matrix(rng, 6, 2);

  const FeaturePair repaired(raw_x, raw_y);
  CHECK(rpcaf::orthonormality_defect(repaired.x()) < 1e-10);
  CHECK(rpcaf::orthonormality_defect(repaired.y()) < 1e-10);

  CHECK_THROWS_AS(FeaturePair(raw_x, raw_y, FeaturePair::Policy::Require),
                  rpcaf::ValueError);
  CHECK_THROWS_AS(FeaturePair(test_util::random_matrix(rng, 2, 5), raw_y),
                  rpcaf::DimensionError);
}

TEST_CASE("problem construction checks dimensions, rank and alpha") {
  const int n1 = 8, n2 = 6;
  const FeaturePair feats = FeaturePair::identities(n1, n2);
  const DenseMatrix m(n1, n2);

  CHECK_NOTHROW(rpcaf::Problem(m, feats, 3, 0.1));
  CHECK_THROWS_AS(rpcaf::Problem(DenseMatrix(n1 + 1, n2), feats, 3, 0.1),
                  rpcaf::DimensionError);
  CHECK_THROWS_AS(rpcaf::Problem(m, feats, 0, 0.1), rpcaf::RankError);
  CHECK_THROWS_AS(rpcaf::Problem(m, feats, 7, 0.1), rpcaf::RankError);
  CHECK_THROWS_AS(rpcaf::Problem(m, feats, 3, 1.0), rpcaf::ValueError);
  CHECK_THROWS_AS(rpcaf::Problem(m, feats, 3, -0.1), rpcaf::ValueError);
}

TEST_CASE("factor pair requires matching column counts") {
  CHECK_THROWS_AS(rpcaf::FactorPair(DenseMatrix(4, 2), DenseMatrix(4, 3)),
                  rpcaf::DimensionError);
}

TEST_CASE("solver config validation") {
  rpcaf::SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.step_size = 0.0;
  CHECK_THROWS_AS(cfg.validate(), rpcaf::ValueError);
  cfg.step_size = 0.5;
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), rpcaf::ValueError);
  cfg.tol = 1e-7;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), rpcaf::ValueError);
}

TEST_CASE("custom threshold rule clamps to the unit interval") {
  const auto rule = rpcaf::ThresholdRule::custom(1.7);
  CHECK(rule.gradient_theta(0.3) == 1.0);
  const auto low = rpcaf::ThresholdRule::custom(-0.2);
  CHECK(low.gradient_theta(0.3) == 0.0);
}
