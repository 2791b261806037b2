#include "pdslab/reward_conf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pdslab/kernels.hpp"
#include "pdslab/util.hpp"

namespace pdslab {

AlphaPreset parse_alpha_preset(std::string_view name) {
  if (name == "lemma") return AlphaPreset::Lemma;
  if (name == "theorem") return AlphaPreset::Theorem;
  if (name == "raw") return AlphaPreset::Raw;
  throw ValidationError("unknown alpha preset '" + std::string(name) + "'");
}

double lemma_alpha(int d, std::size_t n_labeled, double nu, double delta, double r_max) {
  if (!(nu > 0.0)) throw ParameterError("lemma_alpha: nu must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("lemma_alpha: delta must lie in (0,1)");
  const double dd = d;
  const double n = static_cast<double>(n_labeled);
  return std::sqrt(nu) +
         r_max * std::sqrt(2.0 * std::log(1.0 / delta) + dd * std::log(1.0 + n / (nu * dd)));
}

double theorem_alpha(int d, std::size_t n_labeled, double delta, double r_max) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("theorem_alpha: delta must lie in (0,1)");
  if (n_labeled == 0) throw ParameterError("theorem_alpha: needs labeled data");
  const double zeta2 = std::log(2.0 * d * static_cast<double>(n_labeled) / delta);
  return 2.0 * r_max * std::sqrt(d * zeta2);
}

RidgeFit ridge_fit(const FeatureMap& features, std::span<const Transition> data, double nu) {
  if (!(nu > 0.0)) throw ParameterError("ridge_fit: nu must be positive");
  const int d = features.dim();
  RidgeFit fit;
  fit.lambda = kernels::gram_parallel(features, data);
  fit.lambda.diagonal().array() += nu;
  Vector rhs = Vector::Zero(d);
  for (const auto& t : data) {
    if (!t.reward) throw ContractError("ridge_fit: transition without a reward");
    rhs.noalias() += *t.reward * features.phi(t.state, t.action);
  }
  fit.theta = fit.lambda.llt().solve(rhs);
  return fit;
}

RewardModel::RewardModel(Vector theta_hat, Matrix lambda_matrix, double alpha, double nu,
                         double delta, std::size_t n_labeled, double r_max)
    : theta_hat_(std::move(theta_hat)),
      lambda_(std::move(lambda_matrix)),
      factor_(lambda_),
      alpha_(alpha),
      nu_(nu),
      delta_(delta),
      n_labeled_(n_labeled),
      r_max_(r_max) {
  if (lambda_.rows() != theta_hat_.size() || lambda_.cols() != theta_hat_.size())
    throw ParameterError("RewardModel: Lambda and theta_hat dimensions differ");
  if (factor_.info() != Eigen::Success) throw ParameterError("RewardModel: Lambda is not SPD");
  if (!(alpha_ >= 0.0)) throw ParameterError("RewardModel: alpha must be nonnegative");
}

double RewardModel::inverse_norm(const Vector& x) const {
  return factor_.matrixL().solve(x).norm();
}

double RewardModel::ellipsoid_distance(const Vector& theta) const {
  const Vector diff = theta - theta_hat_;
  return std::sqrt(std::max(0.0, diff.dot(lambda_ * diff)));
}

RewardModel fit_reward(const OfflineDataset& labeled, const FeatureMap& features, double nu,
                       double delta, double r_max, AlphaPreset preset, double alpha_raw) {
  if (!labeled.labeled) throw ContractError("fit_reward: dataset is not labeled");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("fit_reward: delta must lie in (0,1)");
  auto fit = ridge_fit(features, labeled.transitions, nu);
  double alpha = 0.0;
  switch (preset) {
    case AlphaPreset::Lemma:
      alpha = lemma_alpha(features.dim(), labeled.size(), nu, delta, r_max);
      break;
    case AlphaPreset::Theorem:
      alpha = theorem_alpha(features.dim(), labeled.size(), delta, r_max);
      break;
    case AlphaPreset::Raw:
      if (!(alpha_raw >= 0.0)) throw ParameterError("fit_reward: raw alpha must be nonnegative");
      alpha = alpha_raw;
      break;
  }
  return RewardModel(std::move(fit.theta), std::move(fit.lambda), alpha, nu, delta,
                     labeled.size(), r_max);
}

double reward_deviation(const RewardModel& model, const FeatureMap& features, int s, int a) {
  if (!features.contains(s, a)) throw ParameterError("reward_deviation: (s,a) out of range");
  return model.alpha() * model.inverse_norm(features.phi(s, a));
}

double predicted_reward(const RewardModel& model, const FeatureMap& features, int s, int a) {
  if (!features.contains(s, a)) throw ParameterError("predicted_reward: (s,a) out of range");
  return std::clamp(features.phi(s, a).dot(model.theta_hat()), 0.0, model.r_max());
}

double pessimistic_reward(const RewardModel& model, const FeatureMap& features, int s, int a) {
  const double mean = features.phi(s, a).dot(model.theta_hat());
  return std::clamp(mean - reward_deviation(model, features, s, a), 0.0, model.r_max());
}

RelabelMode parse_relabel_mode(std::string_view name) {
  if (name == "pds") return RelabelMode::Pds;
  if (name == "uds") return RelabelMode::Uds;
  if (name == "predict") return RelabelMode::Predict;
  if (name == "oracle") return RelabelMode::Oracle;
  throw ValidationError("unknown relabel mode '" + std::string(name) + "'");
}

OfflineDataset relabel(const OfflineDataset& data, const RewardModel& model,
                       const FeatureMap& features, RelabelMode mode, const LinearMdp* mdp,
                       bool strict) {
  if (mode == RelabelMode::Oracle && mdp == nullptr)
    throw ContractError("relabel: oracle mode needs the generating MDP");
  OfflineDataset out = data;
  for (auto& t : out.transitions) {
    if (t.reward && !strict) continue;
    if (!features.contains(t.state, t.action)) throw ParameterError("relabel: (s,a) out of range");
    switch (mode) {
      case RelabelMode::Pds: t.reward = pessimistic_reward(model, features, t.state, t.action); break;
      case RelabelMode::Uds: t.reward = 0.0; break;
      case RelabelMode::Predict: t.reward = predicted_reward(model, features, t.state, t.action); break;
      case RelabelMode::Oracle: t.reward = mdp->reward(t.state, t.action); break;
    }
  }
  out.labeled = true;
  return out;
}

double confidence_coverage_trial(const LinearMdp& mdp, std::size_t n0, double noise,
                                 double delta, int trials, std::uint64_t seed, double nu) {
  if (trials < 1) throw ParameterError("confidence_coverage_trial: trials must be >= 1");
  const Policy behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
  int covered = 0;
  for (int i = 0; i < trials; ++i) {
    const auto data = sample_dataset(mdp, behavior, n0, 100, true,
                                     derive_seed(seed, static_cast<std::uint64_t>(i)), noise);
    const auto model = fit_reward(data, mdp.features(), nu, delta, mdp.r_max());
    if (model.contains(mdp.theta())) ++covered;
  }
  return static_cast<double>(covered) / trials;
}

nlohmann::json to_json(const RewardModel& model) {
  nlohmann::json j;
  j["theta_hat"] = std::vector<double>(model.theta_hat().data(),
                                       model.theta_hat().data() + model.theta_hat().size());
  nlohmann::json lam = nlohmann::json::array();
  const auto& l = model.lambda_matrix();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    for (Eigen::Index k = 0; k < l.cols(); ++k) lam.push_back(l(i, k));
  j["lambda_matrix"] = lam;
  j["alpha"] = model.alpha();
  j["nu"] = model.nu();
  j["delta"] = model.delta();
  j["n_labeled"] = model.n_labeled();
  j["r_max"] = model.r_max();
  return j;
}

RewardModel reward_model_from_json(const nlohmann::json& j) {
  for (const char* key : {"theta_hat", "lambda_matrix", "alpha", "nu", "delta", "n_labeled"})
    if (!j.contains(key)) throw ValidationError(std::string("reward model json: missing '") + key + "'");
  const auto th = j.at("theta_hat").get<std::vector<double>>();
  const auto lam = j.at("lambda_matrix").get<std::vector<double>>();
  const auto d = static_cast<Eigen::Index>(th.size());
  if (lam.size() != th.size() * th.size())
    throw ValidationError("reward model json: lambda_matrix must be d*d");
  Vector theta = Eigen::Map<const Vector>(th.data(), d);
  Matrix lambda(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index k = 0; k < d; ++k) lambda(i, k) = lam[static_cast<std::size_t>(i * d + k)];
  return RewardModel(std::move(theta), std::move(lambda), j.at("alpha").get<double>(),
                     j.at("nu").get<double>(), j.at("delta").get<double>(),
                     j.at("n_labeled").get<std::size_t>(), j.value("r_max", 1.0));
}

}  // namespace pdslab
