// Command-line surface: decompose | synth | phase | bench | project | check.
// stdout carries machine-readable results only (JSON or CSV); diagnostics go
// to stderr. Exit codes: 0 ok, 1 usage error, 2 runtime failure, 3 check
// violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <rpcaf/rpcaf.hpp>

namespace {

using nlohmann::json;

struct SolverFlags {
  double step = 0.5;
  int max_iters = 3000;
  double tol = 1e-7;
  std::string inc_case = "ii";
  std::optional<double> mu1;
  std::string projection = "none";
  int dykstra_iters = 100;
  std::string keep_rule = "either";
  bool safe_step = false;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--step", f.step, "gradient step size");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap");
  cmd->add_option("--tol", f.tol, "relative-residual stopping tolerance");
  cmd->add_option("--case", f.inc_case, "incoherence case")
      ->check(CLI::IsMember({"i", "ii", "iii"}));
  cmd->add_option("--mu1", f.mu1,
                  "incoherence constant for the projection sets "
                  "(default: estimated)");
  cmd->add_option("--projection", f.projection, "factor projection")
      ->check(CLI::IsMember({"none", "dykstra"}));
  cmd->add_option("--dykstra-iters", f.dykstra_iters,
                  "projection cycles per step");
  cmd->add_option("--keep-rule", f.keep_rule,
                  "threshold keep rule: top of either line, or of both")
      ->check(CLI::IsMember({"either", "both"}));
  cmd->add_flag("--safe-step", f.safe_step,
                "use the analytic step 1/(192*||L0||_2)");
}

rpcaf::SolverConfig to_config(const SolverFlags& f) {
  rpcaf::SolverConfig cfg;
  cfg.step_size = f.step;
  cfg.max_iters = f.max_iters;
  cfg.tol = f.tol;
  cfg.incoherence_case = f.inc_case == "i"    ? rpcaf::IncoherenceCase::I
                         : f.inc_case == "ii" ? rpcaf::IncoherenceCase::II
                                              : rpcaf::IncoherenceCase::III;
  cfg.mu1 = f.mu1;
  cfg.projection.mode = f.projection == "dykstra"
                            ? rpcaf::ProjectionMode::SetProjection
                            : rpcaf::ProjectionMode::None;
  cfg.projection.dykstra_iters = f.dykstra_iters;
  cfg.keep_rule = f.keep_rule == "both" ? rpcaf::KeepRule::KeepIfAboveBoth
                                        : rpcaf::KeepRule::ZeroIfBelowBoth;
  cfg.safe_step = f.safe_step;
  return cfg;
}

rpcaf::SignModel to_sign_model(const std::string& s) {
  return s == "coherent" ? rpcaf::SignModel::CoherentSign
                         : rpcaf::SignModel::BernoulliPM1;
}

int run_decompose(const std::string& m_path, const std::string& x_path,
                  const std::string& y_path, int rank, double alpha,
                  const std::string& out_l, const std::string& out_s,
                  bool strict_features, const SolverFlags& flags) {
  const rpcaf::DenseMatrix m = rpcaf::read_matrix(m_path);
  const rpcaf::DenseMatrix x = rpcaf::read_matrix(x_path);
  const rpcaf::DenseMatrix y = rpcaf::read_matrix(y_path);
  rpcaf::FeaturePair features(
      x, y,
      strict_features ? rpcaf::FeaturePair::Policy::Require
                      : rpcaf::FeaturePair::Policy::Orthonormalize);
  rpcaf::Problem problem(m, std::move(features), rank, alpha);
  const rpcaf::RecoveryResult res = rpcaf::solve(problem, to_config(flags));
  if (!out_l.empty()) rpcaf::write_matrix(res.l, out_l);
  if (!out_s.empty()) rpcaf::write_matrix(res.s, out_s);

  json out;
  out["converged"] = res.converged;
  out["iterations"] = res.iterations_run;
  out["relative_residual"] = res.residual_history.back();
  out["elapsed_ms"] = res.elapsed.count() * 1e3;
  std::cout << out.dump() << "\n";
  return 0;
}

int run_synth(int n1, int n2, int rank, double alpha, std::uint64_t seed,
              const std::string& sign, int extra_basis,
              std::optional<double> magnitude, const std::string& out_dir) {
  rpcaf::GenSpec spec;
  spec.n1 = n1;
  spec.n2 = n2 > 0 ? n2 : n1;
  spec.rank = rank;
  spec.alpha = alpha;
  spec.seed = seed;
  spec.sign_model = to_sign_model(sign);
  spec.extra_basis = extra_basis;
  spec.magnitude_high = magnitude;

  const rpcaf::GeneratedInstance inst = rpcaf::generate(spec);
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  rpcaf::write_matrix(inst.problem.m, dir / "m.rpf");
  rpcaf::write_matrix(inst.problem.features.x(), dir / "x.rpf");
  rpcaf::write_matrix(inst.problem.features.y(), dir / "y.rpf");
  rpcaf::write_matrix(inst.truth.l_star, dir / "l_star.rpf");
  rpcaf::write_matrix(inst.truth.s_star, dir / "s_star.rpf");

  json sidecar;
  sidecar["n1"] = spec.n1;
  sidecar["n2"] = spec.n2;
  sidecar["rank"] = spec.rank;
  sidecar["alpha"] = spec.alpha;
  sidecar["sign_model"] =
      spec.sign_model == rpcaf::SignModel::CoherentSign ? "coherent"
                                                        : "bernoulli";
  sidecar["magnitude_high"] = spec.magnitude_high.value_or(spec.rank / 40.0);
  sidecar["extra_basis"] = spec.extra_basis;
  sidecar["row_slack"] = spec.row_slack;
  sidecar["seed"] = spec.seed;
  {
    std::ofstream js(dir / "gen.json", std::ios::trunc);
    js << sidecar.dump(2) << "\n";
    if (!js) throw rpcaf::IoError("cannot write gen.json");
  }

  json out;
  out["dir"] = dir.string();
  out["files"] = {"m.rpf", "x.rpf", "y.rpf", "l_star.rpf", "s_star.rpf",
                  "gen.json"};
  std::cout << out.dump() << "\n";
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

int run_phase(const std::string& ranks, const std::string& alphas, int trials,
              std::uint64_t seed, const std::string& sign, int n,
              int extra_basis, const std::string& csv, const std::string& pgm,
              bool baseline, bool wall, const SolverFlags& flags) {
  rpcaf::PhaseGrid grid;
  grid.ranks = parse_int_list(ranks);
  grid.alphas = parse_double_list(alphas);
  grid.trials_per_cell = trials;
  grid.sign_model = to_sign_model(sign);
  grid.base_seed = seed;
  grid.identity_baseline = baseline;

  rpcaf::GenSpec base;
  base.n1 = base.n2 = n;
  base.extra_basis = extra_basis;

  grid = rpcaf::run_phase_grid(std::move(grid), to_config(flags), base);

  if (!csv.empty()) {
    rpcaf::emit_csv(grid, grid.cells, csv, wall);
    if (baseline) {
      rpcaf::emit_csv(grid, grid.baseline_cells,
                      csv + std::string(".baseline.csv"), wall);
    }
  }
  if (!pgm.empty()) {
    rpcaf::emit_heatmap(grid, grid.cells, pgm);
    if (baseline) {
      rpcaf::emit_heatmap(grid, grid.baseline_cells,
                          pgm + std::string(".baseline.pgm"));
    }
  }

  json out;
  out["cells"] = grid.cell_count();
  out["successes"] = rpcaf::PhaseGrid::success_count(grid.cells);
  if (baseline) {
    out["baseline_successes"] =
        rpcaf::PhaseGrid::success_count(grid.baseline_cells);
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int run_bench(const std::string& sizes, std::optional<int> rank,
              double rank_frac, double alpha, double feature_frac, int trials,
              std::uint64_t seed, double target, const std::string& csv,
              bool wall, const SolverFlags& flags) {
  rpcaf::TimingTemplate tpl;
  tpl.fixed_rank = rank;
  tpl.rank_frac = rank_frac;
  tpl.alpha = alpha;
  tpl.feature_frac = feature_frac;
  tpl.trials = trials;
  tpl.base_seed = seed;
  tpl.target_rel_error = target;

  const auto rows =
      rpcaf::run_timing_sweep(parse_int_list(sizes), tpl, to_config(flags));
  if (!csv.empty()) rpcaf::emit_timing_csv(rows, csv, wall);

  json out = json::array();
  for (const auto& r : rows) {
    json jr;
    jr["n"] = r.n;
    jr["rank"] = r.rank;
    jr["d"] = r.d;
    jr["mean_wall_ms"] = wall ? r.mean_wall_ms : 0.0;
    jr["mean_per_iter_ms"] = wall ? r.mean_per_iter_ms : 0.0;
    jr["mean_iterations"] = r.mean_iterations;
    jr["mean_rel_error"] = r.mean_rel_error;
    jr["timeout"] = r.timeout;
    out.push_back(jr);
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int run_project(const std::string& iters, int n, const std::string& ranks,
                double alpha, int trials, std::uint64_t seed,
                const std::string& sign, const std::string& csv, bool wall,
                const SolverFlags& flags) {
  rpcaf::ProjectionProtocol proto;
  proto.n = n;
  if (!ranks.empty()) proto.ranks = parse_int_list(ranks);
  proto.alpha = alpha;
  proto.trials = trials;
  proto.base_seed = seed;
  proto.sign_model = to_sign_model(sign);

  const auto result = rpcaf::run_projection_sweep(parse_int_list(iters), proto,
                                                  to_config(flags));
  if (!csv.empty()) rpcaf::emit_projection_csv(result, csv, wall);

  json out = json::array();
  for (const auto& column : result.columns) {
    json jc;
    jc["dykstra_iters"] = column.dykstra_iters;
    jc["successes"] = column.successes;
    jc["cells"] = column.cells.size();
    out.push_back(jc);
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int run_check(int trials, int instances, std::uint64_t seed) {
  int violations = 0;
  std::printf("instance,metric,value\n");
  try {
    const rpcaf::LemmaReport rep = rpcaf::lemma_property_checks(trials, seed);
    std::printf("lemmas,trials,%d\n", rep.trials);
    std::printf("lemmas,spectral_support_pass,%d\n", rep.spectral_support_pass);
    std::printf("lemmas,entry_svd_pass,%d\n", rep.entry_svd_pass);
    std::printf("lemmas,contraction_pass,%d\n", rep.contraction_pass);
    if (!rep.all_passed()) ++violations;
  } catch (const rpcaf::LemmaViolationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::printf("lemmas,violation,1\n");
    ++violations;
  }

  const rpcaf::TheoremCheckReport rep =
      rpcaf::theorem1_empirical_check(instances, seed);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& row = rep.rows[i];
    std::printf("init_bound_%zu,alpha,%.17g\n", i, row.alpha);
    std::printf("init_bound_%zu,distance,%.17g\n", i, row.distance);
    std::printf("init_bound_%zu,bound,%.17g\n", i, row.bound);
    std::printf("init_bound_%zu,ok,%d\n", i, row.ok ? 1 : 0);
  }
  std::printf("init_bound,passes,%d\n", rep.passes);
  std::printf("init_bound,instances,%zu\n", rep.rows.size());
  if (!rep.all_passed()) ++violations;
  return violations == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank plus sparse recovery with feature side information"};
  app.require_subcommand(1);

  // decompose
  auto* decompose = app.add_subcommand(
      "decompose", "recover L and S from an observation and features");
  std::string m_path, x_path, y_path, out_l, out_s;
  int rank = 0;
  double alpha = 0.0;
  bool strict_features = false;
  SolverFlags dec_flags;
  decompose->add_option("--m", m_path, "observation (RPF1)")->required();
  decompose->add_option("--x", x_path, "row feature dictionary")->required();
  decompose->add_option("--y", y_path, "column feature dictionary")->required();
  decompose->add_option("--rank", rank, "target rank")->required();
  decompose->add_option("--alpha", alpha, "corruption fraction")->required();
  decompose->add_option("--out-l", out_l, "write recovered L here");
  decompose->add_option("--out-s", out_s, "write recovered S here");
  decompose->add_flag("--strict-features", strict_features,
                      "reject non-orthonormal features instead of repairing");
  add_solver_flags(decompose, dec_flags);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic instance");
  int s_n1 = 200, s_n2 = 0, s_rank = 5, s_extra = 5;
  double s_alpha = 0.1;
  std::uint64_t s_seed = 0;
  std::string s_sign = "bernoulli", s_out = ".";
  std::optional<double> s_mag;
  synth->add_option("--n", s_n1, "rows (and columns unless --n2 is given)");
  synth->add_option("--n2", s_n2, "columns");
  synth->add_option("--rank", s_rank, "true rank");
  synth->add_option("--alpha", s_alpha, "per-column corruption fraction");
  synth->add_option("--seed", s_seed, "generator seed");
  synth->add_option("--sign", s_sign, "corruption sign model")
      ->check(CLI::IsMember({"bernoulli", "coherent"}));
  synth->add_option("--extra-basis", s_extra,
                    "null-space basis vectors per feature");
  synth->add_option("--magnitude", s_mag,
                    "corruption magnitude upper bound (default rank/40)");
  synth->add_option("--out", s_out, "output directory");

  // phase
  auto* phase = app.add_subcommand("phase", "phase-transition grid");
  std::string p_ranks, p_alphas, p_csv, p_pgm, p_sign = "bernoulli";
  std::string p_timing = "wall";
  int p_trials = 3, p_n = 200, p_extra = 5;
  std::uint64_t p_seed = 0;
  bool p_baseline = false;
  SolverFlags phase_flags;
  phase->add_option("--grid-ranks", p_ranks, "comma-separated ranks")
      ->required();
  phase->add_option("--grid-alphas", p_alphas, "comma-separated alphas")
      ->required();
  phase->add_option("--trials", p_trials, "trials per cell");
  phase->add_option("--seed", p_seed, "base seed");
  phase->add_option("--sign", p_sign, "corruption sign model")
      ->check(CLI::IsMember({"bernoulli", "coherent"}));
  phase->add_option("--n", p_n, "instance size");
  phase->add_option("--extra-basis", p_extra,
                    "null-space basis vectors per feature");
  phase->add_option("--csv", p_csv, "per-trial CSV output");
  phase->add_option("--pgm", p_pgm, "success heatmap output");
  phase->add_flag("--baseline", p_baseline,
                  "also run the identity-feature baseline");
  phase->add_option("--timing-mode", p_timing,
                    "wall: record times; off: zero the wall column")
      ->check(CLI::IsMember({"wall", "off"}));
  add_solver_flags(phase, phase_flags);

  // bench
  auto* bench = app.add_subcommand("bench", "running-time scaling sweep");
  std::string b_sizes, b_csv, b_timing = "wall";
  std::optional<int> b_rank;
  double b_rank_frac = 0.20, b_alpha = 0.11, b_feature_frac = 0.50;
  double b_target = 0.01;
  int b_trials = 3;
  std::uint64_t b_seed = 0;
  SolverFlags bench_flags;
  bench->add_option("--sizes", b_sizes, "comma-separated sizes")->required();
  bench->add_option("--rank", b_rank, "fixed rank (default: 20% of n)");
  bench->add_option("--rank-frac", b_rank_frac, "rank as a fraction of n");
  bench->add_option("--alpha", b_alpha, "corruption fraction");
  bench->add_option("--feature-frac", b_feature_frac,
                    "feature dimension as a fraction of n");
  bench->add_option("--trials", b_trials, "trials per size");
  bench->add_option("--seed", b_seed, "base seed");
  bench->add_option("--target", b_target,
                    "stop once L is this close to the truth (0: never)");
  bench->add_option("--csv", b_csv, "CSV output");
  bench->add_option("--timing-mode", b_timing, "wall|off")
      ->check(CLI::IsMember({"wall", "off"}));
  add_solver_flags(bench, bench_flags);

  // project
  auto* project = app.add_subcommand(
      "project", "projection-effectiveness sweep over Dykstra budgets");
  std::string pr_iters = "0,100,1000", pr_ranks, pr_csv, pr_sign = "bernoulli";
  std::string pr_timing = "wall";
  int pr_n = 200, pr_trials = 2;
  double pr_alpha = 0.10;
  std::uint64_t pr_seed = 0;
  SolverFlags project_flags;
  project->add_option("--dykstra-iters", pr_iters,
                      "comma-separated cycle budgets (must include 0)");
  project->add_option("--n", pr_n, "instance size");
  project->add_option("--grid-ranks", pr_ranks,
                      "protocol ranks (default 140,145,150,155)");
  project->add_option("--alpha", pr_alpha, "corruption fraction");
  project->add_option("--trials", pr_trials, "trials per rank");
  project->add_option("--seed", pr_seed, "base seed");
  project->add_option("--sign", pr_sign, "corruption sign model")
      ->check(CLI::IsMember({"bernoulli", "coherent"}));
  project->add_option("--csv", pr_csv, "CSV output");
  project->add_option("--timing-mode", pr_timing, "wall|off")
      ->check(CLI::IsMember({"wall", "off"}));
  add_solver_flags(project, project_flags);

  // check
  auto* check = app.add_subcommand(
      "check", "numerical lemma suite and initialization-bound validation");
  int c_trials = 1000, c_instances = 50;
  std::uint64_t c_seed = 0x5EEDu;
  check->add_option("--trials", c_trials, "random trials per lemma");
  check->add_option("--instances", c_instances,
                    "instances for the initialization bound");
  check->add_option("--seed", c_seed, "base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*decompose) {
      return run_decompose(m_path, x_path, y_path, rank, alpha, out_l, out_s,
                           strict_features, dec_flags);
    }
    if (*synth) {
      return run_synth(s_n1, s_n2, s_rank, s_alpha, s_seed, s_sign, s_extra,
                       s_mag, s_out);
    }
    if (*phase) {
      return run_phase(p_ranks, p_alphas, p_trials, p_seed, p_sign, p_n,
                       p_extra, p_csv, p_pgm, p_baseline, p_timing == "wall",
                       phase_flags);
    }
    if (*bench) {
      return run_bench(b_sizes, b_rank, b_rank_frac, b_alpha, b_feature_frac,
                       b_trials, b_seed, b_target, b_csv, b_timing == "wall",
                       bench_flags);
    }
    if (*project) {
      return run_project(pr_iters, pr_n, pr_ranks, pr_alpha, pr_trials,
                         pr_seed, pr_sign, pr_csv, pr_timing == "wall",
                         project_flags);
    }
    if (*check) {
      return run_check(c_trials, c_instances, c_seed);
    }
  } catch (const rpcaf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
