#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version and a plain
// serial reference; tests hold them against each other and bench/ times them.
//
// The parallel kernels are deterministic regardless of thread count: per-pair
// kernels write independent outputs, and reductions over transitions use fixed
// chunk boundaries summed in chunk order.

#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "pdslab/datagen.hpp"
#include "pdslab/linmdp.hpp"

namespace pdslab::kernels {

inline constexpr std::size_t kReductionChunk = 4096;

/// sum_tau phi(s_tau, a_tau) phi(s_tau, a_tau)^T (no ridge term).
Matrix gram_serial(const FeatureMap& features, std::span<const Transition> data);
Matrix gram_parallel(const FeatureMap& features, std::span<const Transition> data);

/// Per-pair sufficient statistics of a labeled dataset: visit counts, reward
/// sums and next-state counts in compressed rows.
struct PairStatistics {
  int num_states = 0;
  std::vector<double> counts;       // per pair
  std::vector<double> reward_sums;  // per pair
  std::vector<std::size_t> row_offsets;  // size pairs+1
  std::vector<int> next_states;
  std::vector<double> next_counts;
};

/// Throws ContractError on a reward-free record.
PairStatistics pair_statistics(const FeatureMap& features, std::span<const Transition> data);

/// y_k = R_k + gamma * sum_{s'} C_{k,s'} v(s'); the Bellman regression right-hand
/// side aggregated per pair.
Vector bellman_targets_serial(const PairStatistics& stats, const Vector& v, double gamma);
Vector bellman_targets_parallel(const PairStatistics& stats, const Vector& v, double gamma);

/// beta * sqrt(phi^T Lambda^{-1} phi) for every pair, Lambda given by its
/// Cholesky factor.
Vector bonus_serial(const FeatureMap& features, const Eigen::LLT<Matrix>& lambda, double beta);
Vector bonus_parallel(const FeatureMap& features, const Eigen::LLT<Matrix>& lambda, double beta);

struct GreedyResult {
  Matrix q;                  // |S| x |A|
  Vector v;                  // |S|
  std::vector<int> actions;  // argmax, lowest index on ties
};

/// Q = clamp(<phi, w> - bonus, 0, v_max), then greedy V and actions.
GreedyResult pessimistic_greedy_serial(const FeatureMap& features, const Vector& w,
                                       const Vector& bonus, double v_max);
GreedyResult pessimistic_greedy_parallel(const FeatureMap& features, const Vector& w,
                                         const Vector& bonus, double v_max);

/// Worker cap from PDSLAB_THREADS (0 = OpenMP default).
int thread_cap();

}  // namespace pdslab::kernels
