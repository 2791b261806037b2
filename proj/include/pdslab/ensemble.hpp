#pragma once

// Bootstrap reward ensembles and the ensemble-based pessimistic relabeler for
// settings without an analytic confidence set.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdslab/datagen.hpp"
#include "pdslab/linmdp.hpp"

namespace pdslab {

enum class EnsembleEstimator {
  MinMinusKSigma,   // max{min_j f_j - k sigma, 0}
  MeanMinusKSigma,  // max{mu - k sigma, 0}
};

inline constexpr double kMaxPenaltyK = 1e6;

struct EnsembleRewardModel {
  std::vector<Vector> members;  // one linear predictor per member
  FeatureMap features;
  std::optional<double> penalty_k;  // nullopt = automatic
  double auto_a = 25.0;
  double epsilon = 1e-8;
  double labeled_mean = 0.0;  // mean ensemble prediction over the labeled inputs
  EnsembleEstimator estimator = EnsembleEstimator::MinMinusKSigma;

  int l_count() const { return static_cast<int>(members.size()); }
  void validate() const;
};

/// Each member is a ridge fit on a bootstrap resample (size N0, with
/// replacement) drawn from its own sub-seed.
EnsembleRewardModel fit_ensemble(const OfflineDataset& labeled, const FeatureMap& features, int L,
                                 double nu, std::uint64_t seed);

struct EnsembleStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation (divide by L)
  double min_member = 0.0;
};

EnsembleStats ensemble_stats(const EnsembleRewardModel& model, int s, int a);

/// Phi^{-1}((L - pi/8) / (L - pi/4 + 1)): the sigma multiplier that maps the
/// ensemble mean to the expected member minimum under a Gaussian spread.
double gaussian_min_coefficient(int L);

/// a * max(mu - mu_hat, 0) / (|mu| + eps), capped at kMaxPenaltyK.
double auto_k(const EnsembleRewardModel& model, double labeled_mean_mu, double unlabeled_pred_mean);

/// Mean ensemble prediction over the reward-free records of `data`.
double unlabeled_predicted_mean(const EnsembleRewardModel& model, const OfflineDataset& data);

/// Penalty weight for relabeling `data`: the override if given, else the
/// model's fixed k, else auto_k against `data`.
double resolve_k(const EnsembleRewardModel& model, const OfflineDataset& data,
                 std::optional<double> k_override = std::nullopt);

/// max{base(s,a) - k sigma(s,a), 0}; an infinite k yields 0.
double pessimistic_ensemble_reward(const EnsembleRewardModel& model, int s, int a, double k);

/// Fills every reward-free record; labeled records pass through.
OfflineDataset relabel_ensemble(const OfflineDataset& data, const EnsembleRewardModel& model,
                                double k);

struct RelabelSummary {
  std::size_t count = 0;        // records whose reward was written
  std::size_t passthrough = 0;  // records that already had a reward
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double k = 0.0;
};

/// Streams a JSONL file through the relabeler. Errors name the 1-based line.
RelabelSummary relabel_file(const std::string& input_path, const std::string& output_path,
                            const EnsembleRewardModel& model,
                            std::optional<double> k_override = std::nullopt);

nlohmann::json to_json(const EnsembleRewardModel& model);
EnsembleRewardModel ensemble_from_json(const nlohmann::json& j);

}  // namespace pdslab
