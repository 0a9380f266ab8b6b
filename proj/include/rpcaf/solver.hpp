#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"
#include "rpcaf/model.hpp"
#include "rpcaf/projection.hpp"
#include "rpcaf/svd.hpp"
#include "rpcaf/threshold.hpp"

namespace rpcaf {

struct InitState {
  FactorPair factors;
  DenseMatrix s0;
  SvdTriple svd;  // triple of M - S0; sigma[0] is ||L0||_2
};

namespace detail {

// Scales the columns of u by sqrt(sigma), flooring tiny singular values at
// 1e-12 * sigma_1 so the square root does not amplify noise directions.
inline DenseMatrix scale_by_sqrt_sigma(const DenseMatrix& u,
                                       const std::vector<double>& sigma) {
  DenseMatrix out = u;
  const double floor_at = sigma.empty() ? 0.0 : 1e-12 * sigma[0];
  for (int c = 0; c < out.cols(); ++c) {
    const double s = std::sqrt(std::max(sigma[static_cast<std::size_t>(c)], floor_at));
    for (int i = 0; i < out.rows(); ++i) out(i, c) *= s;
  }
  return out;
}

}  // namespace detail

/// Initialization phase: S0 = T_alpha(M), then the rank-r SVD of M - S0
/// seeds P0 = Xᵀ U Σ^{1/2} and Q0 = Yᵀ V Σ^{1/2}.
inline InitState initialize_state(const Problem& problem,
                                  const SolverConfig& config) {
  const DenseMatrix s0 =
      threshold(problem.m, ThresholdSpec(problem.alpha, config.keep_rule));
  const DenseMatrix l0 = problem.m - s0;
  SvdTriple svd = truncated_svd(l0, problem.rank);
  const DenseMatrix bu = detail::scale_by_sqrt_sigma(svd.u, svd.sigma);
  const DenseMatrix bv = detail::scale_by_sqrt_sigma(svd.v, svd.sigma);
  FactorPair factors(transpose_times(problem.features.x(), bu),
                     transpose_times(problem.features.y(), bv));
  return {std::move(factors), s0, std::move(svd)};
}

inline std::pair<FactorPair, DenseMatrix> initialize(
    const Problem& problem, const SolverConfig& config = {}) {
  InitState st = initialize_state(problem, config);
  return {std::move(st.factors), std::move(st.s0)};
}

/// Objective: 0.5 ||X P Qᵀ Yᵀ + S - M||_F^2 + (1/64) ||PᵀP - QᵀQ||_F^2.
inline double loss(const FactorPair& f, const DenseMatrix& s,
                   const Problem& problem) {
  const DenseMatrix xp = problem.features.x() * f.p;
  const DenseMatrix yq = problem.features.y() * f.q;
  const DenseMatrix resid = times_transpose(xp, yq) + s - problem.m;
  const DenseMatrix balance =
      transpose_times(f.p, f.p) - transpose_times(f.q, f.q);
  const double rn = frobenius_norm(resid);
  const double bn = frobenius_norm(balance);
  return 0.5 * rn * rn + bn * bn / 64.0;
}

/// Gradients of the objective at (P, Q) with S held fixed. With
/// D = X P Qᵀ Yᵀ + S - M:
///   grad_p = Xᵀ D Y Q + (1/16) P (PᵀP - QᵀQ)
///   grad_q = (Xᵀ D Y)ᵀ P + (1/16) Q (QᵀQ - PᵀP)
/// evaluated right-to-left so nothing larger than n x r is formed.
inline std::pair<DenseMatrix, DenseMatrix> gradients(const FactorPair& f,
                                                     const DenseMatrix& s,
                                                     const Problem& problem) {
  const DenseMatrix& x = problem.features.x();
  const DenseMatrix& y = problem.features.y();
  const DenseMatrix xp = x * f.p;
  const DenseMatrix yq = y * f.q;
  const DenseMatrix delta = times_transpose(xp, yq) + s - problem.m;
  const DenseMatrix gram =
      transpose_times(f.p, f.p) - transpose_times(f.q, f.q);
  DenseMatrix grad_p =
      transpose_times(x, delta * yq) + (1.0 / 16.0) * (f.p * gram);
  DenseMatrix grad_q = transpose_times(y, transpose_times(delta, xp)) +
                       (-1.0 / 16.0) * (f.q * gram);
  return {std::move(grad_p), std::move(grad_q)};
}

/// Per-iteration hook: receives the 1-based iteration index, the factors the
/// iteration evaluated (pre-update), and the relative residual. Returning
/// false stops the loop after the current iteration.
using IterationObserver =
    std::function<bool(int, const FactorPair&, double)>;

/// Full pipeline: initialization, factor regularization, then simultaneous
/// projected gradient steps with a fresh sparse estimate each iteration.
/// Stops at relative residual < tol or after max_iters.
inline RecoveryResult solve(const Problem& problem, const SolverConfig& config,
                            const IterationObserver& observer = {}) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  InitState init = initialize_state(problem, config);
  const DenseMatrix& x = problem.features.x();
  const DenseMatrix& y = problem.features.y();
  const DenseMatrix& m = problem.m;

  std::optional<RowNormBudget> p_budget;
  std::optional<RowNormBudget> q_budget;
  if (config.projection.mode == ProjectionMode::SetProjection) {
    double mu1;
    if (config.mu1) {
      mu1 = *config.mu1;
    } else {
      // The true factors are unknown at run time; estimate the incoherence
      // from the initialization triple instead.
      const double nu = problem.n1() * std::pow(max_row_norm(init.svd.u), 2);
      const double nv = problem.n2() * std::pow(max_row_norm(init.svd.v), 2);
      mu1 = std::max(nu, nv) / problem.rank;
    }
    const double rr = static_cast<double>(problem.rank);
    p_budget.emplace(x, std::sqrt(2.0 * mu1 * rr / problem.n1()) *
                            spectral_norm(init.factors.p));
    q_budget.emplace(y, std::sqrt(2.0 * mu1 * rr / problem.n2()) *
                            spectral_norm(init.factors.q));
  }

  DenseMatrix p = project_factor(init.factors.p, p_budget, config.projection);
  DenseMatrix q = project_factor(init.factors.q, q_budget, config.projection);
  DenseMatrix s = init.s0;

  const double sigma1 = init.svd.sigma[0];
  const double eta = config.safe_step && sigma1 > 0.0
                         ? 1.0 / (192.0 * sigma1)
                         : config.step_size;
  const double m_norm = frobenius_norm(m);
  const double denom = m_norm > 0.0 ? m_norm : 1.0;
  const ThresholdSpec grad_spec(config.threshold_rule.gradient_theta(problem.alpha),
                                config.keep_rule);

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(std::min(config.max_iters, 4096)));
  bool converged = false;
  int iterations = 0;

  DenseMatrix xp = x * p;
  DenseMatrix yq = y * q;
  DenseMatrix l = times_transpose(xp, yq);

  for (int t = 1; t <= config.max_iters; ++t) {
    const DenseMatrix m_minus_l = m - l;
    s = threshold(m_minus_l, grad_spec);
    const double residual = frobenius_norm(m_minus_l - s) / denom;
    if (!std::isfinite(residual)) {
      throw DivergenceError("non-finite residual at iteration " +
                                std::to_string(t),
                            t);
    }
    history.push_back(residual);
    iterations = t;

    bool keep_going = true;
    if (observer) keep_going = observer(t, FactorPair(p, q), residual);
    if (residual < config.tol) {
      converged = true;
      break;
    }
    if (!keep_going || t == config.max_iters) break;

    // delta = L + S - M; both gradients use the pre-update factors.
    const DenseMatrix delta = s - m_minus_l;
    const DenseMatrix gram = transpose_times(p, p) - transpose_times(q, q);
    DenseMatrix grad_p =
        transpose_times(x, delta * yq) + (1.0 / 16.0) * (p * gram);
    DenseMatrix grad_q = transpose_times(y, transpose_times(delta, xp)) +
                         (-1.0 / 16.0) * (q * gram);

    p = project_factor(p - eta * grad_p, p_budget, config.projection);
    q = project_factor(q - eta * grad_q, q_budget, config.projection);
    if (!all_finite(p) || !all_finite(q)) {
      throw DivergenceError("non-finite factors after iteration " +
                                std::to_string(t),
                            t);
    }
    xp = x * p;
    yq = y * q;
    l = times_transpose(xp, yq);
  }

  RecoveryResult result{std::move(l),
                        std::move(s),
                        FactorPair(std::move(p), std::move(q)),
                        iterations,
                        std::move(history),
                        converged,
                        std::chrono::steady_clock::now() - t_start};
  return result;
}

}  // namespace rpcaf
