#pragma once

// Ridge reward regression, its confidence ellipsoid, and the pessimistic
// reward used to relabel reward-free transitions.

#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "pdslab/datagen.hpp"
#include "pdslab/linmdp.hpp"

namespace pdslab {

/// How the ellipsoid radius alpha is chosen.
enum class AlphaPreset {
  Lemma,    // sqrt(nu) + r_max * sqrt(2 log(1/delta) + d log(1 + N0/(nu d)))
  Theorem,  // 2 r_max sqrt(d log(2 d N0 / delta))
  Raw,      // caller-provided value
};

AlphaPreset parse_alpha_preset(std::string_view name);

double lemma_alpha(int d, std::size_t n_labeled, double nu, double delta, double r_max);
double theorem_alpha(int d, std::size_t n_labeled, double delta, double r_max);

struct RidgeFit {
  Vector theta;
  Matrix lambda;  // nu I + sum phi phi^T
};

/// argmin sum (phi^T theta - r)^2 + nu ||theta||^2 via an SPD solve. Lambda is
/// nu I + sum phi phi^T, for the fit and the ellipsoid alike (no nu/2).
RidgeFit ridge_fit(const FeatureMap& features, std::span<const Transition> data, double nu);

/// theta_hat, Lambda and the radius alpha of {theta : ||theta - theta_hat||_Lambda <= alpha}.
class RewardModel {
 public:
  RewardModel(Vector theta_hat, Matrix lambda_matrix, double alpha, double nu, double delta,
              std::size_t n_labeled, double r_max);

  const Vector& theta_hat() const { return theta_hat_; }
  const Matrix& lambda_matrix() const { return lambda_; }
  double alpha() const { return alpha_; }
  double nu() const { return nu_; }
  double delta() const { return delta_; }
  std::size_t n_labeled() const { return n_labeled_; }
  double r_max() const { return r_max_; }

  /// sqrt(x^T Lambda^{-1} x)
  double inverse_norm(const Vector& x) const;
  /// ||theta - theta_hat||_Lambda
  double ellipsoid_distance(const Vector& theta) const;
  bool contains(const Vector& theta) const { return ellipsoid_distance(theta) <= alpha_; }

 private:
  Vector theta_hat_;
  Matrix lambda_;
  Eigen::LLT<Matrix> factor_;
  double alpha_;
  double nu_;
  double delta_;
  std::size_t n_labeled_;
  double r_max_;
};

/// Ridge fit on a fully labeled dataset; throws ContractError otherwise.
RewardModel fit_reward(const OfflineDataset& labeled, const FeatureMap& features, double nu,
                       double delta, double r_max = 1.0, AlphaPreset preset = AlphaPreset::Lemma,
                       double alpha_raw = 0.0);

/// alpha * sqrt(phi^T Lambda^{-1} phi)
double reward_deviation(const RewardModel& model, const FeatureMap& features, int s, int a);

/// clamp(<phi, theta_hat>, 0, r_max)
double predicted_reward(const RewardModel& model, const FeatureMap& features, int s, int a);

/// clamp(<phi, theta_hat> - deviation, 0, r_max)
double pessimistic_reward(const RewardModel& model, const FeatureMap& features, int s, int a);

enum class RelabelMode { Pds, Uds, Predict, Oracle };

RelabelMode parse_relabel_mode(std::string_view name);

/// Labeled copy of `data`. Records that already carry a reward keep it unless
/// `strict` is set, in which case every record is re-annotated, labeled ones
/// included. Oracle mode needs the generating MDP.
OfflineDataset relabel(const OfflineDataset& data, const RewardModel& model,
                       const FeatureMap& features, RelabelMode mode,
                       const LinearMdp* mdp = nullptr, bool strict = false);

/// Fraction of `trials` fresh uniform-behavior datasets of size n0 for which
/// the true theta lies in the fitted ellipsoid.
double confidence_coverage_trial(const LinearMdp& mdp, std::size_t n0, double noise,
                                 double delta, int trials, std::uint64_t seed, double nu = 1.0);

nlohmann::json to_json(const RewardModel& model);
RewardModel reward_model_from_json(const nlohmann::json& j);

}  // namespace pdslab
