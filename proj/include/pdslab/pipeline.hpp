#pragma once

// End-to-end data-sharing runs: reward learning, relabeling, PEVI, and exact
// suboptimality, for PDS and its baselines; plus the seeded sweep driver.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdslab/datagen.hpp"
#include "pdslab/linmdp.hpp"
#include "pdslab/pevi.hpp"
#include "pdslab/reward_conf.hpp"

namespace pdslab {

enum class MethodId { Pds, Uds, RewardPredict, Oracle, NoShare };

MethodId parse_method(std::string_view name);
std::string_view method_name(MethodId m);
bool has_true_rewards(MethodId m);

struct RewardConfig {
  double nu = 1.0;
  double delta = 0.1;
  AlphaPreset alpha_preset = AlphaPreset::Lemma;
  double alpha_raw = 0.0;
  bool strict = false;  // re-annotate labeled records too
};

enum class BetaPreset { Theorem, Raw };

struct PeviSettings {
  double lambda = 1.0;
  BetaPreset beta_preset = BetaPreset::Theorem;
  double beta_raw = 0.0;
  double c = 1.0;
  double delta = 0.1;  // confidence used in the theorem beta
  double tol = 0.0;    // 0: 1e-8 * v_max
  int max_sweeps = 0;  // 0: sized from gamma and tol
};

/// beta and the full PEVI configuration for a training set of n_total records.
PeviConfig make_pevi_config(const PeviSettings& s, const LinearMdp& mdp, std::size_t n_total);

struct RunResult {
  MethodId method = MethodId::Pds;
  double subopt_mean = 0.0;  // expectation over the initial distribution
  double subopt_max = 0.0;   // worst state
  double v_hat_start = 0.0;
  double c0_dagger = 0.0;
  double c1_dagger = 0.0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::uint64_t seed = 0;
  int d = 0;
  double gamma = 0.0;
  double beta = 0.0;
  bool converged = false;
  Quality labeled_quality = Quality::Random;
  Quality unlabeled_quality = Quality::Random;
  Policy policy;
  std::string error;  // non-empty when the cell failed
  double wall_ms = 0.0;

  bool ok() const { return error.empty(); }
};

/// PDS: pessimistic relabel of d1; UDS: zeros; REWARD_PREDICT: clamped
/// prediction; ORACLE: true rewards; NO_SHARE: d0 alone. `optimal` may carry a
/// precomputed solve_optimal(mdp) to skip recomputation.
RunResult run_method(const LinearMdp& mdp, const OfflineDataset& d0, const OfflineDataset& d1,
                     MethodId method, const RewardConfig& reward_cfg, const PeviSettings& pevi_cfg,
                     std::uint64_t seed, const OptimalSolution* optimal = nullptr);

struct MdpSpec {
  std::string kind = "tabular";  // tabular | lowrank | adversarial
  int num_states = 5;
  int num_actions = 3;
  int dim = 0;  // lowrank/adversarial only
  double gamma = 0.9;
  double r_max = 1.0;
  std::optional<std::uint64_t> seed;  // fixed MDP; otherwise one MDP per run seed

  void validate() const;
};

LinearMdp build_mdp(const MdpSpec& spec, std::uint64_t run_seed);

struct SweepGrid {
  MdpSpec mdp;
  std::vector<std::size_t> n0s{200};
  std::vector<std::size_t> n1s{0};
  std::vector<Quality> labeled_qualities{Quality::Random};
  std::vector<Quality> unlabeled_qualities{Quality::Random};
  std::vector<MethodId> methods{MethodId::Pds};
  std::vector<std::uint64_t> seeds{0};
  double noise = 0.1;
  std::size_t horizon_reset = 100;
  RewardConfig reward;
  PeviSettings pevi;

  std::size_t num_runs() const;
};

/// Runs every cell of the grid. Order is labeled quality, unlabeled quality,
/// n0, n1, seed, method (outermost first). `threads` = 1 runs serially; 0 uses
/// the PDSLAB_THREADS cap or the OpenMP default. Output is identical for any
/// thread count apart from wall_ms. A failing cell records its error and the
/// sweep continues.
std::vector<RunResult> sweep(const SweepGrid& grid, int threads = 0);

inline constexpr std::string_view kCsvHeader =
    "method,n0,n1,c0,c1,gamma,d,seed,subopt_mean,subopt_max,vhat_start,wall_ms";

/// One row per successful run, header first.
void write_results_csv(std::ostream& os, const std::vector<RunResult>& results);

}  // namespace pdslab
