#pragma once

// Offline dataset sampling, the JSON-lines transition format, and exact
// coverage coefficients.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pdslab/linmdp.hpp"

namespace pdslab {

struct Transition {
  int state = 0;
  int action = 0;
  std::optional<double> reward;  // absent for reward-free records
  int next_state = 0;

  bool operator==(const Transition&) const = default;
};

struct OfflineDataset {
  std::vector<Transition> transitions;
  bool labeled = true;
  std::string source_tag;
  // Shape of the MDP the records came from; 0 when unknown.
  int num_states = 0;
  int num_actions = 0;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
};

/// Behavior-policy quality presets around the optimal policy.
enum class Quality { Expert, Medium, Random };

Quality parse_quality(std::string_view name);
std::string_view quality_name(Quality q);
/// expert: eps-greedy(0.05), medium: eps-greedy(0.3), random: uniform.
Policy behavior_policy(Quality q, const Policy& optimal);

/// Roll out `behavior` from the initial distribution, restarting every
/// `horizon_reset` steps, until `n` transitions are collected. Labeled rewards
/// are <phi, theta>, plus uniform noise in [-noise, noise] clipped to [0, r_max]
/// when noise > 0.
OfflineDataset sample_dataset(const LinearMdp& mdp, const Policy& behavior, std::size_t n,
                              std::size_t horizon_reset, bool labeled, std::uint64_t seed,
                              double noise = 0.0);

/// Every pair visited `visits_per_pair` times with next states split exactly
/// according to P(.|s,a); requires visits_per_pair * P to be integral.
OfflineDataset exhaustive_dataset(const LinearMdp& mdp, int visits_per_pair);

/// a then b; labeled iff both are.
OfflineDataset mix_datasets(const OfflineDataset& a, const OfflineDataset& b);

/// Copy with every reward removed.
OfflineDataset strip_rewards(const OfflineDataset& d);

/// Sigma_{pi,s} = (1-gamma) sum_t gamma^t E_pi[phi phi^T | s_0 = s], exact.
Matrix occupancy_second_moment(const LinearMdp& mdp, const Policy& policy, int start_state);

/// (1/N) sum phi phi^T over the dataset.
Matrix empirical_second_moment(const OfflineDataset& data, const FeatureMap& features);

struct CoverageReport {
  double c_dagger = 0.0;
  Matrix gram;                    // (1/N) sum phi phi^T
  Vector per_start_state_values;  // largest C per start state
};

/// Largest C with M - C * Sigma_{pi*,s} PSD for all s, clamped at 0. Returns
/// +inf when no start state constrains C (all Sigma are zero).
CoverageReport coverage_coefficient(const OfflineDataset& data, const LinearMdp& mdp,
                                    const Policy& optimal);

/// Largest C such that M - C * Sigma is PSD (Sigma PSD, M PSD).
double max_psd_scaling(const Matrix& m, const Matrix& sigma);

nlohmann::json to_json(const Transition& t);
Transition transition_from_json(const nlohmann::json& j);

void write_jsonl(const std::string& path, const OfflineDataset& data);
/// Throws ValidationError naming the 1-based line number on malformed input.
OfflineDataset read_jsonl(const std::string& path);

/// Sidecar header written next to a JSONL file as <path>.meta.json.
void write_dataset_header(const std::string& jsonl_path, const LinearMdp& mdp,
                          const OfflineDataset& data, std::uint64_t seed);

}  // namespace pdslab
