#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rpcaf/errors.hpp"
#include "rpcaf/matrix.hpp"
#include "rpcaf/metrics.hpp"
#include "rpcaf/model.hpp"
#include "rpcaf/rng.hpp"
#include "rpcaf/solver.hpp"
#include "rpcaf/synthgen.hpp"

namespace rpcaf {

/// Worker-pool width: RPCAF_THREADS when set, otherwise the hardware count.
inline int worker_count() {
  if (const char* env = std::getenv("RPCAF_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace detail {

// Runs tasks 0..count-1 on the pool. Each task owns its output slot, so the
// result is schedule-independent.
template <typename Fn>
void parallel_for(int count, const Fn& fn) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Observer that halts a solve once the recovered L is well inside the
// success tolerance; checked sparsely to keep the overhead negligible. Only
// short-circuits runs whose verdict is already decided.
inline IterationObserver early_success_stop(const Problem& problem,
                                            const DenseMatrix& l_star,
                                            double stop_at, int cadence = 8) {
  return [&problem, &l_star, stop_at, cadence](int iter, const FactorPair& f,
                                               double) {
    if (iter % cadence != 0) return true;
    const DenseMatrix l = times_transpose(problem.features.x() * f.p,
                                          problem.features.y() * f.q);
    return relative_error(l, l_star) > stop_at;
  };
}

}  // namespace detail

struct TrialOutcome {
  std::uint64_t seed = 0;
  bool generated = false;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double wall_ms = 0.0;
  bool success = false;
};

struct PhaseCell {
  int rank = 0;
  double alpha = 0.0;
  bool ungeneratable = false;
  bool success = false;  // all trials generated and below the tolerance
  std::vector<TrialOutcome> trials;
};

/// Recoverability map over (rank, corruption) cells. A cell succeeds only if
/// every trial recovers below success_tol; cells are seeded independently
/// from (base_seed, r, alpha, trial) so any cell can be reproduced alone.
struct PhaseGrid {
  std::vector<int> ranks;
  std::vector<double> alphas;
  int trials_per_cell = 3;
  double success_tol = 1e-3;
  SignModel sign_model = SignModel::BernoulliPM1;
  std::uint64_t base_seed = 0;
  bool identity_baseline = false;

  std::vector<PhaseCell> cells;           // ranks-major
  std::vector<PhaseCell> baseline_cells;  // X = Y = I on the same instances

  int cell_count() const {
    return static_cast<int>(ranks.size() * alphas.size());
  }
  static int success_count(const std::vector<PhaseCell>& cs) {
    return static_cast<int>(
        std::count_if(cs.begin(), cs.end(),
                      [](const PhaseCell& c) { return c.success; }));
  }
};

inline std::uint64_t phase_cell_seed(std::uint64_t base, int rank,
                                     double alpha, int trial) {
  return derive_seed({base, static_cast<std::uint64_t>(rank),
                      static_cast<std::uint64_t>(std::llround(alpha * 1e4)),
                      static_cast<std::uint64_t>(trial)});
}

namespace detail {

inline TrialOutcome run_phase_trial(const Problem& problem,
                                    const GroundTruth& truth,
                                    const SolverConfig& config,
                                    double success_tol, std::uint64_t seed) {
  TrialOutcome out;
  out.seed = seed;
  out.generated = true;
  const auto observer =
      early_success_stop(problem, truth.l_star, 0.1 * success_tol);
  try {
    const RecoveryResult res = solve(problem, config, observer);
    out.rel_error = relative_error(res.l, truth.l_star);
    out.iterations = res.iterations_run;
    out.wall_ms = res.elapsed.count() * 1e3;
    out.success = out.rel_error < success_tol;
  } catch (const DivergenceError& e) {
    out.rel_error = std::numeric_limits<double>::infinity();
    out.iterations = e.iteration();
    out.success = false;
  }
  return out;
}

}  // namespace detail

/// Fills in the grid results cell by cell (parallel over cells). A cell that
/// cannot be generated is marked ungeneratable rather than failed.
inline PhaseGrid run_phase_grid(PhaseGrid grid, const SolverConfig& config,
                                const GenSpec& base_spec) {
  if (grid.ranks.empty() || grid.alphas.empty()) {
    throw ValueError("phase grid axes must be non-empty");
  }
  const int n_cells = grid.cell_count();
  grid.cells.assign(static_cast<std::size_t>(n_cells), PhaseCell{});
  if (grid.identity_baseline) {
    grid.baseline_cells.assign(static_cast<std::size_t>(n_cells), PhaseCell{});
  }

  detail::parallel_for(n_cells, [&](int idx) {
    const int ri = idx / static_cast<int>(grid.alphas.size());
    const int ai = idx % static_cast<int>(grid.alphas.size());
    const int rank = grid.ranks[static_cast<std::size_t>(ri)];
    const double alpha = grid.alphas[static_cast<std::size_t>(ai)];

    PhaseCell cell;
    cell.rank = rank;
    cell.alpha = alpha;
    PhaseCell base_cell = cell;
    bool all_ok = true;
    bool base_all_ok = true;

    for (int trial = 0; trial < grid.trials_per_cell; ++trial) {
      const std::uint64_t seed =
          phase_cell_seed(grid.base_seed, rank, alpha, trial);
      GenSpec spec = base_spec;
      spec.rank = rank;
      spec.alpha = alpha;
      spec.sign_model = grid.sign_model;
      spec.seed = seed;

      TrialOutcome outcome;
      outcome.seed = seed;
      std::optional<GeneratedInstance> inst;
      try {
        inst.emplace(generate(spec));
      } catch (const GenerationError&) {
        cell.ungeneratable = true;
        base_cell.ungeneratable = true;
      }
      if (inst) {
        outcome = detail::run_phase_trial(inst->problem, inst->truth, config,
                                          grid.success_tol, seed);
      }
      all_ok = all_ok && outcome.success;
      cell.trials.push_back(outcome);

      if (grid.identity_baseline) {
        TrialOutcome base_outcome;
        base_outcome.seed = seed;
        if (inst) {
          const Problem identity_problem(
              inst->problem.m,
              FeaturePair::identities(inst->problem.n1(), inst->problem.n2()),
              spec.rank, spec.alpha);
          base_outcome =
              detail::run_phase_trial(identity_problem, inst->truth, config,
                                      grid.success_tol, seed);
        }
        base_all_ok = base_all_ok && base_outcome.success;
        base_cell.trials.push_back(base_outcome);
      }
    }
    cell.success = all_ok && !cell.ungeneratable;
    grid.cells[static_cast<std::size_t>(idx)] = std::move(cell);
    if (grid.identity_baseline) {
      base_cell.success = base_all_ok && !base_cell.ungeneratable;
      grid.baseline_cells[static_cast<std::size_t>(idx)] = std::move(base_cell);
    }
  });
  return grid;
}

/// Per-trial CSV: r, alpha, trial, rel_error, iterations, wall_ms, success.
/// `include_wall` off writes zeros in the wall column so two seeded runs
/// produce identical bytes.
inline void emit_csv(const PhaseGrid& grid, const std::vector<PhaseCell>& cells,
                     const std::filesystem::path& path,
                     bool include_wall = true) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "r,alpha,trial,rel_error,iterations,wall_ms,success\n";
  char buf[96];
  for (const PhaseCell& cell : cells) {
    for (std::size_t t = 0; t < cell.trials.size(); ++t) {
      const TrialOutcome& tr = cell.trials[t];
      std::snprintf(buf, sizeof(buf), "%d,%.10g,%zu,%.17g,%d,%.3f,%d\n",
                    cell.rank, cell.alpha, t, tr.rel_error, tr.iterations,
                    include_wall ? tr.wall_ms : 0.0, tr.success ? 1 : 0);
      out << buf;
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void emit_csv(const PhaseGrid& grid, const std::filesystem::path& path,
                     bool include_wall = true) {
  emit_csv(grid, grid.cells, path, include_wall);
}

/// Binary PGM (P5), one pixel per cell: 255 success, 0 otherwise. Rows are
/// ranks, columns are alphas.
inline void emit_heatmap(const PhaseGrid& grid,
                         const std::vector<PhaseCell>& cells,
                         const std::filesystem::path& path) {
  if (cells.empty()) throw ValueError("grid has not been run");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << grid.alphas.size() << " " << grid.ranks.size() << "\n255\n";
  for (const PhaseCell& cell : cells) {
    out.put(cell.success ? static_cast<char>(255) : static_cast<char>(0));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void emit_heatmap(const PhaseGrid& grid,
                         const std::filesystem::path& path) {
  emit_heatmap(grid, grid.cells, path);
}

/// Recipe for the running-time sweep. Defaults mirror the scaling protocol:
/// rank 20% of n, 11% random-sign corruption, feature dimension 50% of n,
/// stop once the recovered L is within 1% of the truth.
struct TimingTemplate {
  std::optional<int> fixed_rank;  // overrides rank_frac when set
  double rank_frac = 0.20;
  double alpha = 0.11;
  double feature_frac = 0.50;
  SignModel sign_model = SignModel::BernoulliPM1;
  int trials = 3;
  std::uint64_t base_seed = 0;
  double target_rel_error = 0.01;  // <= 0: run to the solver's own stop
};

struct TimingRow {
  int n = 0;
  int rank = 0;
  int d = 0;
  int trials = 0;
  double mean_wall_ms = 0.0;
  double mean_per_iter_ms = 0.0;
  double min_per_iter_ms = 0.0;
  double mean_iterations = 0.0;
  double mean_rel_error = 0.0;
  bool timeout = false;  // some trial missed the target within max_iters
};

/// Wall-clock scaling over increasing sizes. Trials run serially so the
/// measurements do not contend with each other.
inline std::vector<TimingRow> run_timing_sweep(const std::vector<int>& sizes,
                                               const TimingTemplate& tpl,
                                               const SolverConfig& config) {
  if (sizes.empty()) throw ValueError("no sizes given");
  if (!std::is_sorted(sizes.begin(), sizes.end())) {
    throw ValueError("sizes must be ascending");
  }
  std::vector<TimingRow> rows;
  rows.reserve(sizes.size());
  for (const int n : sizes) {
    const int rank = tpl.fixed_rank
                         ? *tpl.fixed_rank
                         : std::max(1, static_cast<int>(std::lround(
                                           tpl.rank_frac * n)));
    const int d = std::min(
        n, std::max(rank, static_cast<int>(std::lround(tpl.feature_frac * n))));
    TimingRow row;
    row.n = n;
    row.rank = rank;
    row.d = d;
    row.trials = tpl.trials;
    row.min_per_iter_ms = std::numeric_limits<double>::infinity();

    for (int trial = 0; trial < tpl.trials; ++trial) {
      GenSpec spec;
      spec.n1 = spec.n2 = n;
      spec.rank = rank;
      spec.alpha = tpl.alpha;
      spec.sign_model = tpl.sign_model;
      spec.extra_basis = d - rank;
      spec.seed = derive_seed({tpl.base_seed, static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(trial)});
      const GeneratedInstance inst = generate(spec);

      IterationObserver observer;
      if (tpl.target_rel_error > 0.0) {
        observer = detail::early_success_stop(inst.problem, inst.truth.l_star,
                                              tpl.target_rel_error,
                                              /*cadence=*/1);
      }
      const RecoveryResult res = solve(inst.problem, config, observer);
      const double rel = relative_error(res.l, inst.truth.l_star);
      const double wall_ms = res.elapsed.count() * 1e3;
      const double per_iter = wall_ms / std::max(res.iterations_run, 1);
      row.mean_wall_ms += wall_ms / tpl.trials;
      row.mean_per_iter_ms += per_iter / tpl.trials;
      row.min_per_iter_ms = std::min(row.min_per_iter_ms, per_iter);
      row.mean_iterations +=
          static_cast<double>(res.iterations_run) / tpl.trials;
      row.mean_rel_error += rel / tpl.trials;
      if (tpl.target_rel_error > 0.0 && rel > tpl.target_rel_error) {
        row.timeout = true;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline void emit_timing_csv(const std::vector<TimingRow>& rows,
                            const std::filesystem::path& path,
                            bool include_wall = true) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "n,rank,d,trials,mean_wall_ms,mean_per_iter_ms,min_per_iter_ms,"
         "mean_iterations,mean_rel_error,timeout\n";
  char buf[160];
  for (const TimingRow& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%d,%d,%d,%.3f,%.5f,%.5f,%.1f,%.17g,%d\n", r.n, r.rank,
                  r.d, r.trials, include_wall ? r.mean_wall_ms : 0.0,
                  include_wall ? r.mean_per_iter_ms : 0.0,
                  include_wall ? r.min_per_iter_ms : 0.0, r.mean_iterations,
                  r.mean_rel_error, r.timeout ? 1 : 0);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Protocol for the projection-effectiveness sweep: high-rank instances near
/// the recovery frontier, solved once per Dykstra cycle budget on identical
/// seeds so only the projection step differs between columns.
struct ProjectionProtocol {
  int n = 200;
  std::vector<int> ranks = {140, 145, 150, 155};
  double alpha = 0.10;
  SignModel sign_model = SignModel::BernoulliPM1;
  int trials = 2;
  int extra_basis = 5;
  std::uint64_t base_seed = 0;
  double success_tol = 1e-3;
};

struct ProjectionSweepColumn {
  int dykstra_iters = 0;
  std::vector<PhaseCell> cells;  // one per protocol rank
  int successes = 0;
};

struct ProjectionSweepResult {
  ProjectionProtocol protocol;
  std::vector<ProjectionSweepColumn> columns;
};

inline ProjectionSweepResult run_projection_sweep(
    const std::vector<int>& iters_list, const ProjectionProtocol& proto,
    SolverConfig config) {
  if (std::find(iters_list.begin(), iters_list.end(), 0) == iters_list.end()) {
    throw ValueError("the sweep must include 0 projection iterations");
  }
  ProjectionSweepResult result;
  result.protocol = proto;
  result.columns.resize(iters_list.size());
  const int n_ranks = static_cast<int>(proto.ranks.size());
  const int n_tasks = static_cast<int>(iters_list.size()) * n_ranks;
  for (std::size_t c = 0; c < iters_list.size(); ++c) {
    result.columns[c].dykstra_iters = iters_list[c];
    result.columns[c].cells.resize(static_cast<std::size_t>(n_ranks));
  }

  detail::parallel_for(n_tasks, [&](int task) {
    const int col = task / n_ranks;
    const int ri = task % n_ranks;
    const int rank = proto.ranks[static_cast<std::size_t>(ri)];

    SolverConfig cfg = config;
    cfg.incoherence_case = IncoherenceCase::I;
    cfg.projection.mode = ProjectionMode::SetProjection;
    cfg.projection.dykstra_iters = iters_list[static_cast<std::size_t>(col)];

    PhaseCell cell;
    cell.rank = rank;
    cell.alpha = proto.alpha;
    bool all_ok = true;
    for (int trial = 0; trial < proto.trials; ++trial) {
      const std::uint64_t seed = derive_seed(
          {proto.base_seed, static_cast<std::uint64_t>(rank),
           static_cast<std::uint64_t>(trial)});
      GenSpec spec;
      spec.n1 = spec.n2 = proto.n;
      spec.rank = rank;
      spec.alpha = proto.alpha;
      spec.sign_model = proto.sign_model;
      spec.extra_basis = proto.extra_basis;
      spec.seed = seed;
      TrialOutcome outcome;
      outcome.seed = seed;
      try {
        const GeneratedInstance inst = generate(spec);
        outcome = detail::run_phase_trial(inst.problem, inst.truth, cfg,
                                          proto.success_tol, seed);
      } catch (const GenerationError&) {
        cell.ungeneratable = true;
      }
      all_ok = all_ok && outcome.success;
      cell.trials.push_back(outcome);
    }
    cell.success = all_ok && !cell.ungeneratable;
    result.columns[static_cast<std::size_t>(col)]
        .cells[static_cast<std::size_t>(ri)] = std::move(cell);
  });

  for (auto& column : result.columns) {
    column.successes = PhaseGrid::success_count(column.cells);
  }
  return result;
}

inline void emit_projection_csv(const ProjectionSweepResult& result,
                                const std::filesystem::path& path,
                                bool include_wall = true) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "dykstra_iters,r,alpha,trial,rel_error,iterations,wall_ms,success\n";
  char buf[128];
  for (const auto& column : result.columns) {
    for (const PhaseCell& cell : column.cells) {
      for (std::size_t t = 0; t < cell.trials.size(); ++t) {
        const TrialOutcome& tr = cell.trials[t];
        std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%zu,%.17g,%d,%.3f,%d\n",
                      column.dykstra_iters, cell.rank, cell.alpha, t,
                      tr.rel_error, tr.iterations,
                      include_wall ? tr.wall_ms : 0.0, tr.success ? 1 : 0);
        out << buf;
      }
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

struct TheoremCheckRow {
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double distance = 0.0;
  double bound = 0.0;
  bool ok = false;
};

struct TheoremCheckReport {
  std::vector<TheoremCheckRow> rows;
  int passes = 0;
  bool all_passed() const {
    return passes == static_cast<int>(rows.size());
  }
};

/// Empirical validation of the initialization guarantee: on instances whose
/// corruption sits below the case-(iii) admissible level, the initial factor
/// distance must stay within 18*alpha*r*mu1*sqrt(r*kappa*sigma1), all
/// constants taken from the ground truth.
inline TheoremCheckReport theorem1_empirical_check(int instances,
                                                   std::uint64_t seed,
                                                   int n = 200, int rank = 1) {
  if (instances < 1) throw ValueError("need at least one instance");
  TheoremCheckReport report;
  report.rows.resize(static_cast<std::size_t>(instances));

  detail::parallel_for(instances, [&](int i) {
    const std::uint64_t inst_seed =
        derive_seed({seed, static_cast<std::uint64_t>(i)});
    GenSpec probe;
    probe.n1 = probe.n2 = n;
    probe.rank = rank;
    probe.alpha = 0.0;
    probe.seed = inst_seed;
    const GeneratedInstance clean = generate(probe);
    const TheoryBounds clean_bounds = theory_bounds(
        clean.truth, clean.problem.features, IncoherenceCase::III, 0.0);

    GenSpec spec = probe;
    spec.alpha = 0.9 * clean_bounds.alpha_init_bound;
    const GeneratedInstance inst = generate(spec);
    const TheoryBounds bounds = theory_bounds(
        inst.truth, inst.problem.features, IncoherenceCase::III, spec.alpha);

    const auto [factors, s0] = initialize(inst.problem);
    TheoremCheckRow row;
    row.seed = inst_seed;
    row.alpha = spec.alpha;
    row.distance = factor_distance(factors, inst.truth.star_factors);
    row.bound = bounds.init_distance_bound;
    row.ok = row.distance <= row.bound;
    report.rows[static_cast<std::size_t>(i)] = row;
  });
  for (const auto& row : report.rows) {
    if (row.ok) ++report.passes;
  }
  return report;
}

}  // namespace rpcaf
