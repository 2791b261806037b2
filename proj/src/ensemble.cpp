#include "pdslab/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "pdslab/reward_conf.hpp"
#include "pdslab/util.hpp"

namespace pdslab {

void EnsembleRewardModel::validate() const {
  if (members.size() < 2) throw ParameterError("ensemble: need at least 2 members");
  if (!(auto_a > 0.0)) throw ParameterError("ensemble: a must be positive");
  if (!(epsilon > 0.0)) throw ParameterError("ensemble: epsilon must be positive");
  if (penalty_k && !(*penalty_k >= 0.0)) throw ParameterError("ensemble: k must be nonnegative");
  for (const auto& m : members)
    if (m.size() != features.dim()) throw ParameterError("ensemble: member dimension mismatch");
}

EnsembleRewardModel fit_ensemble(const OfflineDataset& labeled, const FeatureMap& features, int L,
                                 double nu, std::uint64_t seed) {
  if (L < 2) throw ParameterError("fit_ensemble: L must be at least 2");
  if (!labeled.labeled) throw ContractError("fit_ensemble: dataset is not labeled");
  if (labeled.empty()) throw ParameterError("fit_ensemble: empty dataset");
  EnsembleRewardModel model;
  model.features = features;
  const std::size_t n = labeled.size();
  std::vector<Transition> resample(n);
  for (int j = 0; j < L; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    for (auto& t : resample) t = labeled.transitions[rng.index(n)];
    model.members.push_back(ridge_fit(features, resample, nu).theta);
  }
  double total = 0.0;
  for (const auto& t : labeled.transitions) total += ensemble_stats(model, t.state, t.action).mu;
  model.labeled_mean = total / static_cast<double>(n);
  return model;
}

EnsembleStats ensemble_stats(const EnsembleRewardModel& model, int s, int a) {
  if (!model.features.contains(s, a)) throw ParameterError("ensemble_stats: (s,a) out of range");
  if (model.members.empty()) throw ParameterError("ensemble_stats: empty ensemble");
  const auto phi = model.features.phi(s, a);
  const double L = static_cast<double>(model.members.size());
  EnsembleStats st;
  st.min_member = std::numeric_limits<double>::infinity();
  std::vector<double> preds;
  preds.reserve(model.members.size());
  for (const auto& m : model.members) {
    const double p = phi.dot(m);
    preds.push_back(p);
    st.mu += p;
    st.min_member = std::min(st.min_member, p);
  }
  st.mu /= L;
  double ss = 0.0;
  for (double p : preds) ss += (p - st.mu) * (p - st.mu);
  st.sigma = std::sqrt(ss / L);
  return st;
}

double gaussian_min_coefficient(int L) {
  if (L < 1) throw ParameterError("gaussian_min_coefficient: L must be at least 1");
  constexpr double pi = std::numbers::pi;
  const double p = (L - pi / 8.0) / (L - pi / 4.0 + 1.0);
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double auto_k(const EnsembleRewardModel& model, double labeled_mean_mu, double unlabeled_pred_mean) {
  if (!(model.epsilon > 0.0)) throw ParameterError("auto_k: epsilon must be positive");
  const double gap = std::max(labeled_mean_mu - unlabeled_pred_mean, 0.0);
  const double k = model.auto_a * gap / (std::abs(labeled_mean_mu) + model.epsilon);
  return std::min(k, kMaxPenaltyK);
}

double unlabeled_predicted_mean(const EnsembleRewardModel& model, const OfflineDataset& data) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& t : data.transitions) {
    if (t.reward) continue;
    total += ensemble_stats(model, t.state, t.action).mu;
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double resolve_k(const EnsembleRewardModel& model, const OfflineDataset& data,
                 std::optional<double> k_override) {
  if (k_override) return *k_override;
  if (model.penalty_k) return *model.penalty_k;
  return auto_k(model, model.labeled_mean, unlabeled_predicted_mean(model, data));
}

double pessimistic_ensemble_reward(const EnsembleRewardModel& model, int s, int a, double k) {
  if (!(k >= 0.0)) throw ParameterError("pessimistic_ensemble_reward: k must be nonnegative");
  if (std::isinf(k)) return 0.0;
  const auto st = ensemble_stats(model, s, a);
  const double base =
      model.estimator == EnsembleEstimator::MinMinusKSigma ? st.min_member : st.mu;
  return std::max(base - k * st.sigma, 0.0);
}

OfflineDataset relabel_ensemble(const OfflineDataset& data, const EnsembleRewardModel& model,
                                double k) {
  OfflineDataset out = data;
  for (auto& t : out.transitions)
    if (!t.reward) t.reward = pessimistic_ensemble_reward(model, t.state, t.action, k);
  out.labeled = true;
  return out;
}

RelabelSummary relabel_file(const std::string& input_path, const std::string& output_path,
                            const EnsembleRewardModel& model, std::optional<double> k_override) {
  model.validate();
  // First pass: parse and validate everything, so a bad line leaves no output.
  const OfflineDataset data = read_jsonl(input_path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& t = data.transitions[i];
    if (!model.features.contains(t.state, t.action) || t.next_state < 0 ||
        t.next_state >= model.features.num_states())
      throw ValidationError(input_path + ":" + std::to_string(i + 1) +
                            ": no feature for (s,a) = (" + std::to_string(t.state) + "," +
                            std::to_string(t.action) + ")");
  }
  RelabelSummary summary;
  summary.k = resolve_k(model, data, k_override);
  const OfflineDataset out = relabel_ensemble(data, model, summary.k);

  std::ofstream os(output_path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + output_path + " for writing");
  summary.min = std::numeric_limits<double>::infinity();
  summary.max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    os << to_json(out.transitions[i]).dump() << '\n';
    if (data.transitions[i].reward) {
      ++summary.passthrough;
      continue;
    }
    const double r = *out.transitions[i].reward;
    ++summary.count;
    total += r;
    summary.min = std::min(summary.min, r);
    summary.max = std::max(summary.max, r);
  }
  if (summary.count == 0) {
    summary.min = summary.max = 0.0;
  } else {
    summary.mean = total / static_cast<double>(summary.count);
  }
  if (!os) throw std::runtime_error("write failed: " + output_path);
  return summary;
}

nlohmann::json to_json(const EnsembleRewardModel& model) {
  nlohmann::json j;
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : model.members) members.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  j["members"] = members;
  j["num_states"] = model.features.num_states();
  j["num_actions"] = model.features.num_actions();
  j["dim"] = model.features.dim();
  nlohmann::json phi = nlohmann::json::array();
  const auto& f = model.features.matrix();
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index k = 0; k < f.cols(); ++k) phi.push_back(f(i, k));
  j["phi"] = phi;
  j["penalty_k"] = model.penalty_k ? nlohmann::json(*model.penalty_k) : nlohmann::json("auto");
  j["auto_a"] = model.auto_a;
  j["epsilon"] = model.epsilon;
  j["labeled_mean"] = model.labeled_mean;
  j["estimator"] = model.estimator == EnsembleEstimator::MinMinusKSigma ? "min" : "mean";
  return j;
}

EnsembleRewardModel ensemble_from_json(const nlohmann::json& j) {
  for (const char* key : {"members", "num_states", "num_actions", "dim", "phi"})
    if (!j.contains(key)) throw ValidationError(std::string("ensemble json: missing '") + key + "'");
  EnsembleRewardModel m;
  const int S = j.at("num_states").get<int>();
  const int A = j.at("num_actions").get<int>();
  const int d = j.at("dim").get<int>();
  const auto phi = j.at("phi").get<std::vector<double>>();
  if (S < 1 || A < 1 || d < 1 || phi.size() != static_cast<std::size_t>(S) * A * d)
    throw ValidationError("ensemble json: phi has the wrong size");
  Matrix f(static_cast<Eigen::Index>(S) * A, d);
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index k = 0; k < d; ++k) f(i, k) = phi[static_cast<std::size_t>(i * d + k)];
  m.features = FeatureMap(S, A, std::move(f));
  for (const auto& member : j.at("members")) {
    const auto v = member.get<std::vector<double>>();
    m.members.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (j.contains("penalty_k") && !j["penalty_k"].is_string()) m.penalty_k = j["penalty_k"].get<double>();
  m.auto_a = j.value("auto_a", 25.0);
  m.epsilon = j.value("epsilon", 1e-8);
  m.labeled_mean = j.value("labeled_mean", 0.0);
  const std::string est = j.value("estimator", std::string("min"));
  if (est == "min") m.estimator = EnsembleEstimator::MinMinusKSigma;
  else if (est == "mean") m.estimator = EnsembleEstimator::MeanMinusKSigma;
  else throw ValidationError("ensemble json: unknown estimator '" + est + "'");
  m.validate();
  return m;
}

}  // namespace pdslab
