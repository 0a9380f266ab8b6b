#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"

namespace rpcaf {

/// One row-norm constraint set per feature row i:
///   { A : ||feature_row_i * A||_2 <= cap_i }.
/// The solver uses a uniform cap sqrt(2*mu1*r/n) * ||P0||_2 for every row;
/// per-row caps are accepted so decoupled configurations can be expressed.
class RowNormBudget {
 public:
  RowNormBudget(DenseMatrix feature, double uniform_cap)
      : feature_(std::move(feature)),
        caps_(static_cast<std::size_t>(feature_.rows()), uniform_cap) {
    validate();
  }

  RowNormBudget(DenseMatrix feature, std::vector<double> per_row_caps)
      : feature_(std::move(feature)), caps_(std::move(per_row_caps)) {
    if (caps_.size() != static_cast<std::size_t>(feature_.rows())) {
      throw DimensionError("need one cap per feature row");
    }
    validate();
  }

  const DenseMatrix& feature() const { return feature_; }
  double cap(int i) const { return caps_[static_cast<std::size_t>(i)]; }
  int sets() const { return feature_.rows(); }

 private:
  void validate() const {
    for (double c : caps_) {
      if (!(c > 0.0)) throw ValueError("row-norm cap must be positive");
    }
  }

  DenseMatrix feature_;
  std::vector<double> caps_;
};

namespace detail {

// ||x*A|| for a single feature row x; also returns x's squared norm.
inline void row_image(const DenseMatrix& feature, int i, const DenseMatrix& a,
                      std::vector<double>& v, double& x_sq) {
  const int d = feature.cols();
  const int r = a.cols();
  v.assign(static_cast<std::size_t>(r), 0.0);
  x_sq = 0.0;
  for (int k = 0; k < d; ++k) {
    const double xk = feature(i, k);
    if (xk == 0.0) continue;
    x_sq += xk * xk;
    for (int c = 0; c < r; ++c) v[static_cast<std::size_t>(c)] += xk * a(k, c);
  }
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

/// Nearest point (Frobenius) to p in the single set i of the budget. Points
/// already inside come back unchanged. The correction is the rank-one update
///   p - ((rho - 1) / (rho * ||x||^2)) * xᵀ (x p),   rho = ||x p|| / cap,
/// which places the row image exactly on the cap.
inline DenseMatrix project_single(const DenseMatrix& p,
                                  const RowNormBudget& budget, int i) {
  std::vector<double> v;
  double x_sq = 0.0;
  detail::row_image(budget.feature(), i, p, v, x_sq);
  const double norm = detail::norm2(v);
  const double cap = budget.cap(i);
  if (norm <= cap) return p;
  if (x_sq == 0.0) {
    throw InfeasibleRowError("zero feature row " + std::to_string(i) +
                             " cannot meet its cap");
  }
  const double rho = norm / cap;
  const double scale = (rho - 1.0) / (rho * x_sq);
  DenseMatrix out = p;
  const int d = p.rows();
  const int r = p.cols();
  for (int k = 0; k < d; ++k) {
    const double xk = budget.feature()(i, k);
    if (xk == 0.0) continue;
    for (int c = 0; c < r; ++c) {
      out(k, c) -= scale * xk * v[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

// Change below which a full Dykstra cycle is treated as converged.
inline constexpr double kDykstraCycleTol = 1e-12;

/// Cyclic Dykstra projection onto the intersection of all row sets. Each
/// step re-adds the correction left by the previous visit to the same set,
/// projects, and stores the new correction; corrections stay rank-one along
/// the set's feature row, so only their r coefficients are kept. Runs
/// `cycles` full passes (early exit once a pass no longer moves the iterate).
inline DenseMatrix dykstra_project(const DenseMatrix& p,
                                   const RowNormBudget& budget, int cycles) {
  if (cycles < 0) throw ValueError("cycle count must be non-negative");
  const int n = budget.sets();
  const int d = p.rows();
  const int r = p.cols();
  if (budget.feature().cols() != d) {
    throw DimensionError("feature columns must match factor rows");
  }

  DenseMatrix a = p;
  DenseMatrix prev = p;
  std::vector<double> coeff(static_cast<std::size_t>(n) * r, 0.0);
  std::vector<double> v(static_cast<std::size_t>(r));

  for (int cycle = 0; cycle < cycles; ++cycle) {
    prev = a;
    for (int step = 0; step < n; ++step) {
      const int s = (step + 1) % n;
      double* cs = coeff.data() + static_cast<std::size_t>(s) * r;

      // v = x*(a + xᵀ cs) = x*a + ||x||^2 cs
      double x_sq = 0.0;
      detail::row_image(budget.feature(), s, a, v, x_sq);
      for (int c = 0; c < r; ++c) v[static_cast<std::size_t>(c)] += x_sq * cs[c];
      const double norm = detail::norm2(v);
      const double cap = budget.cap(s);

      // New correction coefficient; feasible target means it vanishes.
      double scale = 0.0;
      if (norm > cap) {
        if (x_sq == 0.0) {
          throw InfeasibleRowError("zero feature row " + std::to_string(s) +
                                   " cannot meet its cap");
        }
        scale = (norm / cap - 1.0) / ((norm / cap) * x_sq);
      }
      // a += xᵀ (cs - c_new) with c_new = scale * v
      for (int k = 0; k < d; ++k) {
        const double xk = budget.feature()(s, k);
        if (xk == 0.0) continue;
        for (int c = 0; c < r; ++c) {
          a(k, c) += xk * (cs[c] - scale * v[static_cast<std::size_t>(c)]);
        }
      }
      for (int c = 0; c < r; ++c) cs[c] = scale * v[static_cast<std::size_t>(c)];
    }
    if (frobenius_norm(a - prev) < kDykstraCycleTol) break;
  }
  return a;
}

enum class ProjectionMode { None, SetProjection };

struct ProjectionSettings {
  ProjectionMode mode = ProjectionMode::None;
  int dykstra_iters = 100;
};

/// Factor-space projection step of the descent loop: the identity when
/// projection is disabled, otherwise the configured number of Dykstra cycles.
inline DenseMatrix project_factor(const DenseMatrix& p,
                                  const std::optional<RowNormBudget>& budget,
                                  const ProjectionSettings& settings) {
  if (settings.mode == ProjectionMode::None) return p;
  if (!budget) throw ValueError("set projection requires a budget");
  return dykstra_project(p, *budget, settings.dykstra_iters);
}

}  // namespace rpcaf
