#include "pdslab/pipeline.hpp"

#include <chrono>
#include <ostream>

#include <omp.h>

#include "pdslab/kernels.hpp"
#include "pdslab/util.hpp"

namespace pdslab {

MethodId parse_method(std::string_view name) {
  if (name == "PDS") return MethodId::Pds;
  if (name == "UDS") return MethodId::Uds;
  if (name == "REWARD_PREDICT") return MethodId::RewardPredict;
  if (name == "ORACLE") return MethodId::Oracle;
  if (name == "NO_SHARE") return MethodId::NoShare;
  throw ValidationError("unknown method '" + std::string(name) + "'");
}

std::string_view method_name(MethodId m) {
  switch (m) {
    case MethodId::Pds: return "PDS";
    case MethodId::Uds: return "UDS";
    case MethodId::RewardPredict: return "REWARD_PREDICT";
    case MethodId::Oracle: return "ORACLE";
    case MethodId::NoShare: return "NO_SHARE";
  }
  return "?";
}

bool has_true_rewards(MethodId m) { return m == MethodId::Oracle; }

PeviConfig make_pevi_config(const PeviSettings& s, const LinearMdp& mdp, std::size_t n_total) {
  const double beta = s.beta_preset == BetaPreset::Theorem
                          ? theorem_beta(mdp.dim(), n_total, mdp.gamma(), mdp.r_max(), s.delta, s.c)
                          : s.beta_raw;
  PeviConfig cfg = PeviConfig::defaults(mdp.gamma(), mdp.r_max(), beta, s.lambda);
  if (s.tol > 0.0) {
    cfg.tol = s.tol;
    cfg.max_sweeps = default_max_sweeps(mdp.gamma(), s.tol);
  }
  if (s.max_sweeps > 0) cfg.max_sweeps = s.max_sweeps;
  return cfg;
}

RunResult run_method(const LinearMdp& mdp, const OfflineDataset& d0, const OfflineDataset& d1,
                     MethodId method, const RewardConfig& reward_cfg, const PeviSettings& pevi_cfg,
                     std::uint64_t seed, const OptimalSolution* optimal) {
  const auto start = std::chrono::steady_clock::now();
  if (d0.empty()) throw ContractError("run_method: labeled dataset is empty");
  if (!d0.labeled) throw ContractError("run_method: d0 must be labeled");

  OptimalSolution local;
  if (optimal == nullptr) {
    local = solve_optimal(mdp);
    optimal = &local;
  }
  const auto& features = mdp.features();

  OfflineDataset training;
  if (method == MethodId::NoShare) {
    training = d0;
  } else {
    const RewardModel model = fit_reward(d0, features, reward_cfg.nu, reward_cfg.delta, mdp.r_max(),
                                         reward_cfg.alpha_preset, reward_cfg.alpha_raw);
    RelabelMode mode = RelabelMode::Pds;
    switch (method) {
      case MethodId::Pds: mode = RelabelMode::Pds; break;
      case MethodId::Uds: mode = RelabelMode::Uds; break;
      case MethodId::RewardPredict: mode = RelabelMode::Predict; break;
      case MethodId::Oracle: mode = RelabelMode::Oracle; break;
      case MethodId::NoShare: break;
    }
    const OfflineDataset labeled =
        reward_cfg.strict ? relabel(d0, model, features, mode, &mdp, true) : d0;
    const OfflineDataset annotated = relabel(d1, model, features, mode, &mdp, reward_cfg.strict);
    training = mix_datasets(labeled, annotated);
  }

  const PeviConfig cfg = make_pevi_config(pevi_cfg, mdp, training.size());
  const PeviSolution sol = pevi_solve(training, features, cfg);
  const Vector gap = suboptimality_all(mdp, optimal->values.v, sol.policy);

  RunResult r;
  r.method = method;
  r.subopt_mean = mdp.init_dist().dot(gap);
  r.subopt_max = gap.maxCoeff();
  r.v_hat_start = mdp.init_dist().dot(sol.v_hat);
  r.c0_dagger = coverage_coefficient(d0, mdp, optimal->policy).c_dagger;
  r.c1_dagger = d1.empty() ? 0.0 : coverage_coefficient(d1, mdp, optimal->policy).c_dagger;
  r.n0 = d0.size();
  r.n1 = d1.size();
  r.seed = seed;
  r.d = mdp.dim();
  r.gamma = mdp.gamma();
  r.beta = cfg.beta;
  r.converged = sol.converged;
  r.policy = sol.policy;
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void MdpSpec::validate() const {
  if (kind != "tabular" && kind != "lowrank" && kind != "adversarial")
    throw ValidationError("mdp.kind must be tabular, lowrank or adversarial (got '" + kind + "')");
  if (num_actions < 1) throw ValidationError("mdp.num_actions must be positive");
  if (kind != "adversarial" && num_states < 1) throw ValidationError("mdp.num_states must be positive");
  if (kind == "lowrank" && (dim < 1 || dim > num_states * num_actions))
    throw ValidationError("mdp.dim must lie in [1, num_states*num_actions] for lowrank");
  if (kind == "adversarial" && (dim < 1 || num_actions <= dim))
    throw ValidationError("adversarial mdp needs 1 <= dim < num_actions");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("mdp.gamma must lie in [0,1)");
  if (!(r_max > 0.0)) throw ValidationError("mdp.r_max must be positive");
}

LinearMdp build_mdp(const MdpSpec& spec, std::uint64_t run_seed) {
  spec.validate();
  const std::uint64_t seed = spec.seed.value_or(derive_seed(run_seed, 0x4d4450));
  if (spec.kind == "tabular")
    return make_tabular_mdp(spec.num_states, spec.num_actions, spec.gamma, spec.r_max, seed);
  if (spec.kind == "lowrank")
    return make_lowrank_mdp(spec.num_states, spec.num_actions, spec.dim, spec.gamma, spec.r_max, seed);
  return make_adversarial_mdp(spec.num_actions, spec.dim, spec.gamma, spec.r_max);
}

std::size_t SweepGrid::num_runs() const {
  return labeled_qualities.size() * unlabeled_qualities.size() * n0s.size() * n1s.size() *
         seeds.size() * methods.size();
}

namespace {

struct Cell {
  Quality lq, uq;
  std::size_t n0, n1;
  std::uint64_t seed;
};

void run_cell(const SweepGrid& grid, const Cell& cell, RunResult* out) {
  const auto n_methods = grid.methods.size();
  try {
    const LinearMdp mdp = build_mdp(grid.mdp, cell.seed);
    const OptimalSolution opt = solve_optimal(mdp);
    const std::uint64_t s0 =
        derive_seed(derive_seed(cell.seed, 0xD0), cell.n0 * 8 + static_cast<std::uint64_t>(cell.lq));
    const std::uint64_t s1 =
        derive_seed(derive_seed(cell.seed, 0xD1), cell.n1 * 8 + static_cast<std::uint64_t>(cell.uq));
    if (cell.n0 == 0) throw ContractError("n0 must be positive");
    OfflineDataset d0 = sample_dataset(mdp, behavior_policy(cell.lq, opt.policy), cell.n0,
                                       grid.horizon_reset, true, s0, grid.noise);
    d0.source_tag = std::string(quality_name(cell.lq));
    OfflineDataset d1;
    d1.labeled = false;
    d1.num_states = mdp.num_states();
    d1.num_actions = mdp.num_actions();
    if (cell.n1 > 0) {
      d1 = sample_dataset(mdp, behavior_policy(cell.uq, opt.policy), cell.n1, grid.horizon_reset,
                          false, s1);
      d1.source_tag = std::string(quality_name(cell.uq));
    }
    for (std::size_t m = 0; m < n_methods; ++m) {
      try {
        out[m] = run_method(mdp, d0, d1, grid.methods[m], grid.reward, grid.pevi, cell.seed, &opt);
      } catch (const std::exception& e) {
        out[m].error = e.what();
      }
    }
  } catch (const std::exception& e) {
    for (std::size_t m = 0; m < n_methods; ++m) out[m].error = e.what();
  }
  for (std::size_t m = 0; m < n_methods; ++m) {
    out[m].method = grid.methods[m];
    out[m].seed = cell.seed;
    out[m].labeled_quality = cell.lq;
    out[m].unlabeled_quality = cell.uq;
    if (!out[m].ok()) {
      out[m].n0 = cell.n0;
      out[m].n1 = cell.n1;
    }
  }
}

}  // namespace

std::vector<RunResult> sweep(const SweepGrid& grid, int threads) {
  if (grid.num_runs() == 0) throw ParameterError("sweep: empty grid");
  std::vector<Cell> cells;
  for (auto lq : grid.labeled_qualities)
    for (auto uq : grid.unlabeled_qualities)
      for (auto n0 : grid.n0s)
        for (auto n1 : grid.n1s)
          for (auto seed : grid.seeds) cells.push_back({lq, uq, n0, n1, seed});

  const std::size_t n_methods = grid.methods.size();
  std::vector<RunResult> results(cells.size() * n_methods);
  int workers = threads;
  if (workers <= 0) workers = kernels::thread_cap();
  if (workers <= 0) workers = omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cells.size()); ++i)
    run_cell(grid, cells[static_cast<std::size_t>(i)], &results[static_cast<std::size_t>(i) * n_methods]);
  return results;
}

void write_results_csv(std::ostream& os, const std::vector<RunResult>& results) {
  os << kCsvHeader << '\n';
  for (const auto& r : results) {
    if (!r.ok()) continue;
    os << method_name(r.method) << ',' << r.n0 << ',' << r.n1 << ',' << format_double(r.c0_dagger)
       << ',' << format_double(r.c1_dagger) << ',' << format_double(r.gamma) << ',' << r.d << ','
       << r.seed << ',' << format_double(r.subopt_mean) << ',' << format_double(r.subopt_max) << ','
       << format_double(r.v_hat_start) << ',' << format_double(r.wall_ms) << '\n';
  }
}

}  // namespace pdslab
