#include "pdslab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>

#include "pdslab/kernels.hpp"
#include "pdslab/util.hpp"

namespace pdslab {

Quality parse_quality(std::string_view name) {
  if (name == "expert") return Quality::Expert;
  if (name == "medium") return Quality::Medium;
  if (name == "random") return Quality::Random;
  throw ValidationError("unknown dataset quality '" + std::string(name) + "'");
}

std::string_view quality_name(Quality q) {
  switch (q) {
    case Quality::Expert: return "expert";
    case Quality::Medium: return "medium";
    case Quality::Random: return "random";
  }
  return "?";
}

Policy behavior_policy(Quality q, const Policy& optimal) {
  switch (q) {
    case Quality::Expert: return Policy::epsilon_greedy(optimal, 0.05);
    case Quality::Medium: return Policy::epsilon_greedy(optimal, 0.3);
    case Quality::Random: return Policy::uniform(optimal.num_states(), optimal.num_actions());
  }
  throw ParameterError("behavior_policy: bad quality");
}

OfflineDataset sample_dataset(const LinearMdp& mdp, const Policy& behavior, std::size_t n,
                              std::size_t horizon_reset, bool labeled, std::uint64_t seed,
                              double noise) {
  if (n < 1) throw ParameterError("sample_dataset: n must be at least 1");
  if (horizon_reset < 1) throw ParameterError("sample_dataset: horizon_reset must be at least 1");
  if (noise < 0.0) throw ParameterError("sample_dataset: noise must be nonnegative");
  if (behavior.num_states() != mdp.num_states() || behavior.num_actions() != mdp.num_actions())
    throw ParameterError("sample_dataset: behavior policy shape mismatch");

  Rng rng(seed);
  const auto& init = mdp.init_dist();
  const auto& kernel = mdp.transitions();
  const int S = mdp.num_states();
  std::vector<double> row(static_cast<std::size_t>(S));
  std::vector<double> act(static_cast<std::size_t>(mdp.num_actions()));

  OfflineDataset out;
  out.labeled = labeled;
  out.num_states = S;
  out.num_actions = mdp.num_actions();
  out.transitions.reserve(n);
  int state = static_cast<int>(rng.categorical({init.data(), static_cast<std::size_t>(init.size())}));
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0 && t % horizon_reset == 0)
      state = static_cast<int>(rng.categorical({init.data(), static_cast<std::size_t>(init.size())}));
    for (int a = 0; a < mdp.num_actions(); ++a) act[static_cast<std::size_t>(a)] = behavior.prob(state, a);
    const int action = static_cast<int>(rng.categorical(act));
    const int k = mdp.features().pair_index(state, action);
    for (int s = 0; s < S; ++s) row[static_cast<std::size_t>(s)] = kernel(k, s);
    const int next = static_cast<int>(rng.categorical(row));
    Transition tr{state, action, std::nullopt, next};
    if (labeled) {
      double r = mdp.rewards()(k);
      if (noise > 0.0) r = std::clamp(r + rng.uniform(-noise, noise), 0.0, mdp.r_max());
      tr.reward = r;
    }
    out.transitions.push_back(tr);
    state = next;
  }
  return out;
}

OfflineDataset exhaustive_dataset(const LinearMdp& mdp, int visits_per_pair) {
  if (visits_per_pair < 1) throw ParameterError("exhaustive_dataset: visits_per_pair must be >= 1");
  OfflineDataset out;
  out.num_states = mdp.num_states();
  out.num_actions = mdp.num_actions();
  out.source_tag = "exhaustive";
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const int k = mdp.features().pair_index(s, a);
      int placed = 0;
      for (int sp = 0; sp < mdp.num_states(); ++sp) {
        const double exact = mdp.transitions()(k, sp) * visits_per_pair;
        const double rounded = std::round(exact);
        if (std::abs(exact - rounded) > 1e-9)
          throw ParameterError("exhaustive_dataset: visits * P(s'|s,a) is not integral");
        for (int i = 0; i < static_cast<int>(rounded); ++i)
          out.transitions.push_back({s, a, mdp.rewards()(k), sp});
        placed += static_cast<int>(rounded);
      }
      if (placed != visits_per_pair) throw ParameterError("exhaustive_dataset: counts do not add up");
    }
  }
  return out;
}

OfflineDataset mix_datasets(const OfflineDataset& a, const OfflineDataset& b) {
  auto known = [](const OfflineDataset& d) { return d.num_states > 0; };
  if (known(a) && known(b) && (a.num_states != b.num_states || a.num_actions != b.num_actions))
    throw ParameterError("mix_datasets: datasets come from different MDP shapes");
  OfflineDataset out;
  out.transitions.reserve(a.size() + b.size());
  out.transitions.insert(out.transitions.end(), a.transitions.begin(), a.transitions.end());
  out.transitions.insert(out.transitions.end(), b.transitions.begin(), b.transitions.end());
  out.labeled = a.labeled && b.labeled;
  out.source_tag = a.source_tag.empty() ? b.source_tag
                   : b.source_tag.empty() ? a.source_tag
                                          : a.source_tag + "+" + b.source_tag;
  out.num_states = known(a) ? a.num_states : b.num_states;
  out.num_actions = known(a) ? a.num_actions : b.num_actions;
  return out;
}

OfflineDataset strip_rewards(const OfflineDataset& d) {
  OfflineDataset out = d;
  for (auto& t : out.transitions) t.reward.reset();
  out.labeled = false;
  return out;
}

Matrix occupancy_second_moment(const LinearMdp& mdp, const Policy& policy, int start_state) {
  if (start_state < 0 || start_state >= mdp.num_states())
    throw ParameterError("occupancy_second_moment: start state out of range");
  const Matrix occ = discounted_state_occupancy(mdp, policy);
  const int d = mdp.dim();
  Matrix sigma = Matrix::Zero(d, d);
  for (int s = 0; s < mdp.num_states(); ++s) {
    const double ws = occ(start_state, s);
    if (ws == 0.0) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double w = ws * policy.prob(s, a);
      if (w == 0.0) continue;
      const auto phi = mdp.features().phi(s, a);
      sigma.noalias() += w * (phi * phi.transpose());
    }
  }
  return sigma;
}

Matrix empirical_second_moment(const OfflineDataset& data, const FeatureMap& features) {
  if (data.empty()) throw ParameterError("empirical_second_moment: empty dataset");
  return kernels::gram_parallel(features, data.transitions) / static_cast<double>(data.size());
}

double max_psd_scaling(const Matrix& m, const Matrix& sigma) {
  constexpr double kRangeTol = 1e-10;
  Eigen::SelfAdjointEigenSolver<Matrix> sig(sigma);
  const Vector& lam = sig.eigenvalues();
  std::vector<Eigen::Index> range, null;
  for (Eigen::Index i = 0; i < lam.size(); ++i) (lam(i) > kRangeTol ? range : null).push_back(i);
  if (range.empty()) return std::numeric_limits<double>::infinity();

  Matrix ur(sigma.rows(), static_cast<Eigen::Index>(range.size()));
  Vector lr(static_cast<Eigen::Index>(range.size()));
  for (std::size_t i = 0; i < range.size(); ++i) {
    ur.col(static_cast<Eigen::Index>(i)) = sig.eigenvectors().col(range[i]);
    lr(static_cast<Eigen::Index>(i)) = lam(range[i]);
  }
  // Minimizing v^T M v over null-space components of v leaves the Schur
  // complement of M on the range of Sigma.
  Matrix schur = ur.transpose() * m * ur;
  if (!null.empty()) {
    Matrix un(sigma.rows(), static_cast<Eigen::Index>(null.size()));
    for (std::size_t i = 0; i < null.size(); ++i)
      un.col(static_cast<Eigen::Index>(i)) = sig.eigenvectors().col(null[i]);
    const Matrix mrn = ur.transpose() * m * un;
    const Matrix mnn = un.transpose() * m * un;
    Eigen::SelfAdjointEigenSolver<Matrix> nn(mnn);
    const double cutoff = 1e-12 * std::max(1.0, m.norm());
    Matrix pinv = Matrix::Zero(mnn.rows(), mnn.cols());
    for (Eigen::Index i = 0; i < mnn.rows(); ++i) {
      const double e = nn.eigenvalues()(i);
      if (e > cutoff) pinv += (1.0 / e) * nn.eigenvectors().col(i) * nn.eigenvectors().col(i).transpose();
    }
    schur -= mrn * pinv * mrn.transpose();
  }
  const Vector inv_sqrt = lr.cwiseSqrt().cwiseInverse();
  const Matrix whitened = inv_sqrt.asDiagonal() * schur * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> gen(0.5 * (whitened + whitened.transpose()),
                                            Eigen::EigenvaluesOnly);
  return gen.eigenvalues()(0);
}

CoverageReport coverage_coefficient(const OfflineDataset& data, const LinearMdp& mdp,
                                    const Policy& optimal) {
  if (data.empty()) throw ParameterError("coverage_coefficient: empty dataset");
  CoverageReport out;
  out.gram = empirical_second_moment(data, mdp.features());
  const Matrix occ = discounted_state_occupancy(mdp, optimal);
  const int d = mdp.dim();
  out.per_start_state_values.resize(mdp.num_states());
  double best = std::numeric_limits<double>::infinity();
  for (int s0 = 0; s0 < mdp.num_states(); ++s0) {
    Matrix sigma = Matrix::Zero(d, d);
    for (int s = 0; s < mdp.num_states(); ++s) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const double w = occ(s0, s) * optimal.prob(s, a);
        if (w == 0.0) continue;
        const auto phi = mdp.features().phi(s, a);
        sigma.noalias() += w * (phi * phi.transpose());
      }
    }
    const double c = max_psd_scaling(out.gram, sigma);
    out.per_start_state_values(s0) = c;
    best = std::min(best, c);
  }
  out.c_dagger = std::max(best, 0.0);
  return out;
}

nlohmann::json to_json(const Transition& t) {
  nlohmann::json j;
  j["s"] = t.state;
  j["a"] = t.action;
  j["r"] = t.reward ? nlohmann::json(*t.reward) : nlohmann::json(nullptr);
  j["sp"] = t.next_state;
  return j;
}

Transition transition_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("transition must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "s" && key != "a" && key != "r" && key != "sp")
      throw ValidationError("unknown transition field '" + key + "'");
  }
  for (const char* key : {"s", "a", "r", "sp"})
    if (!j.contains(key)) throw ValidationError(std::string("missing transition field '") + key + "'");
  if (!j["s"].is_number_integer() || !j["a"].is_number_integer() || !j["sp"].is_number_integer())
    throw ValidationError("transition ids must be integers");
  Transition t;
  t.state = j["s"].get<int>();
  t.action = j["a"].get<int>();
  t.next_state = j["sp"].get<int>();
  if (t.state < 0 || t.action < 0 || t.next_state < 0)
    throw ValidationError("transition ids must be nonnegative");
  if (!j["r"].is_null()) {
    if (!j["r"].is_number()) throw ValidationError("transition reward must be a number or null");
    t.reward = j["r"].get<double>();
  }
  return t;
}

void write_jsonl(const std::string& path, const OfflineDataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& t : data.transitions) out << to_json(t).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

OfflineDataset read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  OfflineDataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.transitions.push_back(transition_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  out.labeled = std::all_of(out.transitions.begin(), out.transitions.end(),
                            [](const Transition& t) { return t.reward.has_value(); });
  return out;
}

void write_dataset_header(const std::string& jsonl_path, const LinearMdp& mdp,
                          const OfflineDataset& data, std::uint64_t seed) {
  nlohmann::json h;
  h["mdp_hash"] = mdp_hash(mdp);
  h["seed"] = seed;
  h["behavior"] = data.source_tag;
  h["labeled"] = data.labeled;
  h["n"] = data.size();
  h["num_states"] = mdp.num_states();
  h["num_actions"] = mdp.num_actions();
  std::ofstream out(jsonl_path + ".meta.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write header for " + jsonl_path);
  out << h.dump(2) << '\n';
}

}  // namespace pdslab
