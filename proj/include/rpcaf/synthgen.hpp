#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"
#include "rpcaf/metrics.hpp"
#include "rpcaf/model.hpp"
#include "rpcaf/rng.hpp"
#include "rpcaf/svd.hpp"

namespace rpcaf {

enum class SignModel { BernoulliPM1, CoherentSign };

/// Synthetic instance recipe. Low-rank part L* = J Kᵀ with Gaussian factors
/// of variance 5e-3; per column, floor(alpha*n1) entries are corrupted with
/// magnitudes U(0, magnitude_high) and signs from the sign model; supports
/// are redrawn until no row exceeds alpha + row_slack corruption. Features
/// interleave the true singular vectors with extra_basis null-space basis
/// vectors under a random column permutation.
struct GenSpec {
  int n1 = 200;
  int n2 = 200;
  int rank = 5;
  double alpha = 0.1;
  SignModel sign_model = SignModel::BernoulliPM1;
  std::optional<double> magnitude_high;  // nullopt: rank / 40
  int extra_basis = 5;
  double row_slack = 0.065;
  std::uint64_t seed = 0;

  void validate() const {
    if (n1 < 1 || n2 < 1) throw SpecError("dimensions must be positive");
    if (rank < 1 || rank > std::min(n1, n2)) {
      throw SpecError("rank must lie in [1, min(n1, n2)]");
    }
    if (!(alpha >= 0.0 && alpha < 1.0)) {
      throw SpecError("alpha must lie in [0, 1)");
    }
    if (extra_basis < 0) throw SpecError("extra_basis must be non-negative");
    if (rank + extra_basis > std::min(n1, n2)) {
      throw SpecError("rank + extra_basis exceeds the feature dimension room");
    }
    if (magnitude_high && !(*magnitude_high > 0.0)) {
      throw SpecError("magnitude_high must be positive");
    }
  }
};

struct GeneratedInstance {
  Problem problem;
  GroundTruth truth;
};

namespace detail {

// Null-space basis: Gaussian block projected off col(u) twice, then QR.
inline DenseMatrix null_space_basis(SplitMix64& rng, const DenseMatrix& u,
                                    int count) {
  const int n = u.rows();
  DenseMatrix g = random_gaussian(rng, n, count);
  Eigen::MatrixXd gm = g.map();
  const auto um = u.map();
  gm -= um * (um.transpose() * gm);
  gm -= um * (um.transpose() * gm);
  return orthonormalize(from_eigen(gm));
}

// Columns of [u | extras] under a random permutation.
inline DenseMatrix interleave_columns(SplitMix64& rng, const DenseMatrix& u,
                                      const DenseMatrix& extras) {
  const int n = u.rows();
  const int d = u.cols() + extras.cols();
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  DenseMatrix out(n, d);
  for (int c = 0; c < d; ++c) {
    const int src = order[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i) {
      out(i, c) = src < u.cols() ? u(i, src) : extras(i, src - u.cols());
    }
  }
  return out;
}

}  // namespace detail

inline GeneratedInstance generate(const GenSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const double stddev = std::sqrt(5e-3);

  const DenseMatrix j = detail::random_gaussian(rng, spec.n1, spec.rank, stddev);
  const DenseMatrix k = detail::random_gaussian(rng, spec.n2, spec.rank, stddev);
  const DenseMatrix l_star = times_transpose(j, k);

  SvdTriple svd = truncated_svd(l_star, spec.rank);
  if (!(svd.sigma.back() > 1e-10 * svd.sigma.front())) {
    throw GenerationError("generated low-rank part is numerically degenerate");
  }

  // Corruption support: exact floor(alpha*n1) entries per column, redrawn
  // until the worst row stays within alpha + row_slack.
  const int per_col = static_cast<int>(std::floor(spec.alpha * spec.n1 + 1e-9));
  const double row_cap = (spec.alpha + spec.row_slack) * spec.n2;
  std::vector<std::vector<int>> support(static_cast<std::size_t>(spec.n2));
  constexpr int kMaxAttempts = 200;
  bool accepted = per_col == 0;
  if (accepted) {
    // nothing to draw
  } else {
    std::vector<int> scratch;
    std::vector<int> row_count(static_cast<std::size_t>(spec.n1));
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      std::fill(row_count.begin(), row_count.end(), 0);
      for (int c = 0; c < spec.n2; ++c) {
        support[static_cast<std::size_t>(c)] =
            rng.sample_without_replacement(spec.n1, per_col, scratch);
        std::sort(support[static_cast<std::size_t>(c)].begin(),
                  support[static_cast<std::size_t>(c)].end());
        for (int row : support[static_cast<std::size_t>(c)]) {
          ++row_count[static_cast<std::size_t>(row)];
        }
      }
      const int worst =
          *std::max_element(row_count.begin(), row_count.end());
      accepted = static_cast<double>(worst) <= row_cap + 1e-9;
    }
    if (!accepted) {
      throw GenerationError("no support met the row cap within " +
                            std::to_string(kMaxAttempts) + " attempts");
    }
  }

  const double mag_high = spec.magnitude_high.value_or(spec.rank / 40.0);
  DenseMatrix s_star(spec.n1, spec.n2);
  if (per_col > 0) {
    for (int c = 0; c < spec.n2; ++c) {
      for (int row : support[static_cast<std::size_t>(c)]) {
        const double mag = rng.uniform(0.0, mag_high);
        double sign = 1.0;
        if (spec.sign_model == SignModel::BernoulliPM1) {
          sign = (rng.next() & 1u) ? 1.0 : -1.0;
        } else {
          sign = l_star(row, c) >= 0.0 ? 1.0 : -1.0;
        }
        s_star(row, c) = sign * mag;
      }
    }
  }

  DenseMatrix x = svd.u;
  if (spec.extra_basis > 0) {
    x = detail::interleave_columns(
        rng, svd.u, detail::null_space_basis(rng, svd.u, spec.extra_basis));
  }
  DenseMatrix y = svd.v;
  if (spec.extra_basis > 0) {
    y = detail::interleave_columns(
        rng, svd.v, detail::null_space_basis(rng, svd.v, spec.extra_basis));
  }

  FeaturePair features(std::move(x), std::move(y),
                       FeaturePair::Policy::Require);

  std::vector<double> sqrt_sigma(svd.sigma.size());
  for (std::size_t i = 0; i < svd.sigma.size(); ++i) {
    sqrt_sigma[i] = std::sqrt(svd.sigma[i]);
  }
  DenseMatrix u_scaled = svd.u;
  DenseMatrix v_scaled = svd.v;
  for (int c = 0; c < spec.rank; ++c) {
    for (int i = 0; i < spec.n1; ++i) u_scaled(i, c) *= sqrt_sigma[static_cast<std::size_t>(c)];
    for (int i = 0; i < spec.n2; ++i) v_scaled(i, c) *= sqrt_sigma[static_cast<std::size_t>(c)];
  }
  FactorPair star_factors(transpose_times(features.x(), u_scaled),
                          transpose_times(features.y(), v_scaled));

  Problem problem(l_star + s_star, features, spec.rank, spec.alpha);
  GroundTruth truth{l_star,
                    std::move(s_star),
                    std::move(svd.u),
                    std::move(svd.v),
                    std::move(svd.sigma),
                    std::move(star_factors)};
  return {std::move(problem), std::move(truth)};
}

}  // namespace rpcaf
