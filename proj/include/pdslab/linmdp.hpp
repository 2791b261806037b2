#pragma once

// Finite linear MDPs with explicit feature tables and exact (oracle) solvers.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace pdslab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// phi(s,a) for every state-action pair, stored as an (|S|*|A|) x d matrix with
/// row index s*|A| + a. Every row has L2 norm at most 1.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int num_states, int num_actions, Matrix phi);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int dim() const { return static_cast<int>(phi_.cols()); }
  int num_pairs() const { return num_states_ * num_actions_; }

  int pair_index(int s, int a) const { return s * num_actions_ + a; }
  bool contains(int s, int a) const {
    return s >= 0 && s < num_states_ && a >= 0 && a < num_actions_;
  }
  auto phi(int s, int a) const { return phi_.row(pair_index(s, a)).transpose(); }
  const Matrix& matrix() const { return phi_; }

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  Matrix phi_;
};

/// P(s'|s,a) = <phi(s,a), mu(.,s')>, r(s,a) = <phi(s,a), theta>.
///
/// The constructor checks every validity condition (kernel rows sum to one,
/// rewards in [0, r_max], mu entries in [0,1], ...) and throws ParameterError
/// on violation. Transition and reward tables are materialized once.
class LinearMdp {
 public:
  LinearMdp(FeatureMap features, Matrix mu, Vector theta, double gamma, double r_max,
            Vector init_dist, std::uint64_t seed = 0, double feature_scale = 1.0);

  const FeatureMap& features() const { return features_; }
  int num_states() const { return features_.num_states(); }
  int num_actions() const { return features_.num_actions(); }
  int dim() const { return features_.dim(); }
  const Matrix& mu() const { return mu_; }
  const Vector& theta() const { return theta_; }
  double gamma() const { return gamma_; }
  double r_max() const { return r_max_; }
  double v_max() const { return r_max_ / (1.0 - gamma_); }
  const Vector& init_dist() const { return init_dist_; }
  std::uint64_t seed() const { return seed_; }
  /// Factor applied to the nominal features of a construction (1 unless the
  /// generator had to shrink them to respect the unit-norm bound).
  double feature_scale() const { return feature_scale_; }

  /// (|S|*|A|) x |S| transition table.
  const Matrix& transitions() const { return transitions_; }
  /// Reward per pair index.
  const Vector& rewards() const { return rewards_; }
  double reward(int s, int a) const { return rewards_(features_.pair_index(s, a)); }

 private:
  FeatureMap features_;
  Matrix mu_;
  Vector theta_;
  double gamma_;
  double r_max_;
  Vector init_dist_;
  std::uint64_t seed_;
  double feature_scale_;
  Matrix transitions_;
  Vector rewards_;
};

/// Row-stochastic |S| x |A| action distribution.
class Policy {
 public:
  Policy() = default;
  explicit Policy(Matrix probabilities);

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(int num_actions, const std::vector<int>& actions);
  /// (1-eps) on the greedy action plus eps spread uniformly over all actions.
  static Policy epsilon_greedy(const Policy& base, double eps);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  double prob(int s, int a) const { return probs_(s, a); }
  const Matrix& matrix() const { return probs_; }
  /// Most probable action per state, lowest index on ties.
  std::vector<int> greedy_actions() const;

  bool operator==(const Policy& other) const { return probs_ == other.probs_; }

 private:
  Matrix probs_;
};

struct ValueReport {
  Vector v;  // |S|
  Matrix q;  // |S| x |A|
};

struct OptimalSolution {
  Policy policy;
  ValueReport values;
  std::vector<double> residuals;  // sup-norm change per sweep
};

LinearMdp make_tabular_mdp(int num_states, int num_actions, double gamma, double r_max,
                           std::uint64_t seed);

/// Tabular MDP whose transition probabilities are multiples of 1/grid, so
/// that a dataset with `grid` visits per pair can reproduce the kernel exactly.
LinearMdp make_grid_tabular_mdp(int num_states, int num_actions, int grid, double gamma,
                                double r_max, std::uint64_t seed);

LinearMdp make_lowrank_mdp(int num_states, int num_actions, int dim, double gamma,
                           double r_max, std::uint64_t seed);

/// Single-state construction with `dim` orthogonal optimal actions. Features of
/// the optimal actions are the nominal sqrt(d)*e_i scaled by 1/sqrt(d); the
/// factor is recorded in feature_scale(). Remaining actions share the centroid
/// feature (1/d, ..., 1/d).
LinearMdp make_adversarial_mdp(int num_actions, int dim, double gamma, double r_max);

/// Uniform over the first `dim` actions of an adversarial MDP.
Policy adversarial_optimal_policy(int num_actions, int dim);

ValueReport evaluate_policy(const LinearMdp& mdp, const Policy& policy);
OptimalSolution solve_optimal(const LinearMdp& mdp, double tol = 1e-10);

double suboptimality(const LinearMdp& mdp, const Policy& policy, int state);
/// SubOpt against a precomputed V*, for every state.
Vector suboptimality_all(const LinearMdp& mdp, const Vector& v_star, const Policy& policy);

/// (1-gamma) (I - gamma P^pi)^{-1}; row s is the discounted state occupancy
/// started from s.
Matrix discounted_state_occupancy(const LinearMdp& mdp, const Policy& policy);

nlohmann::json to_json(const LinearMdp& mdp);
LinearMdp mdp_from_json(const nlohmann::json& j);
std::string mdp_hash(const LinearMdp& mdp);

}  // namespace pdslab
