#pragma once

// Pessimistic value iteration on linear features: ridge Bellman regression,
// elliptical uncertainty bonus, clamped greedy backup.

#include <json.hpp>

#include "pdslab/datagen.hpp"
#include "pdslab/linmdp.hpp"

namespace pdslab {

struct PeviConfig {
  double lambda_reg = 1.0;
  double beta = 0.0;
  double gamma = 0.9;
  double v_max = 10.0;
  double tol = 1e-7;
  int max_sweeps = 1000;
  bool parallel = true;  // OpenMP kernels vs the serial reference path

  /// v_max = r_max/(1-gamma), tol = 1e-8 v_max, sweep budget sized from the
  /// contraction rate.
  static PeviConfig defaults(double gamma, double r_max, double beta, double lambda_reg = 1.0);
  void validate() const;
};

/// 10 * ceil(1/(1-gamma)) * log(1/tol), rounded up, at least 1.
int default_max_sweeps(double gamma, double tol);

struct PeviSolution {
  Vector w_hat;
  double beta = 0.0;
  Matrix lambda_matrix;
  Matrix q_hat;
  Vector v_hat;
  Policy policy;
  int sweeps_used = 0;
  bool converged = false;
  std::vector<double> residuals;  // sup-norm change of V per sweep
  double max_w_norm = 0.0;        // largest ||w_hat|| over all sweeps
};

/// lambda I + sum phi phi^T over the dataset.
Matrix bellman_gram(const OfflineDataset& data, const FeatureMap& features, double lambda_reg);

/// Lambda^{-1} sum phi (r + gamma v(s')); requires every record to carry a reward.
Vector bellman_regress(const OfflineDataset& data, const FeatureMap& features, const Vector& v,
                       double lambda_reg, double gamma);

/// beta * sqrt(phi(s,a)^T Lambda^{-1} phi(s,a)).
double uncertainty_bonus(const Matrix& lambda_matrix, const FeatureMap& features, double beta,
                         int s, int a);

/// Starts from V = 0 and repeats regress / penalize / clamp / greedy until
/// the sup-norm change of V drops below tol or the sweep budget runs out
/// (converged = false then). Throws ContractError on reward-free records.
PeviSolution pevi_solve(const OfflineDataset& data, const FeatureMap& features,
                        const PeviConfig& config);

/// c * d * sqrt(zeta1) * r_max / (1-gamma), zeta1 = log(4 d N / ((1-gamma) delta)).
double theorem_beta(int d, std::size_t n_total, double gamma, double r_max, double delta, double c);

nlohmann::json to_json(const PeviSolution& sol);

}  // namespace pdslab
