#include "pdslab/pevi.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "pdslab/kernels.hpp"
#include "pdslab/util.hpp"

namespace pdslab {

int default_max_sweeps(double gamma, double tol) {
  // 1/(1-0.9) is 10.000000000000002 in floating point; don't let that round up
  const double horizon = std::ceil(1.0 / (1.0 - gamma) - 1e-9);
  const double sweeps = std::ceil(10.0 * horizon * std::log(1.0 / tol));
  return sweeps < 1.0 ? 1 : static_cast<int>(sweeps);
}

PeviConfig PeviConfig::defaults(double gamma, double r_max, double beta, double lambda_reg) {
  PeviConfig c;
  c.lambda_reg = lambda_reg;
  c.beta = beta;
  c.gamma = gamma;
  c.v_max = r_max / (1.0 - gamma);
  c.tol = 1e-8 * c.v_max;
  c.max_sweeps = default_max_sweeps(gamma, c.tol);
  return c;
}

void PeviConfig::validate() const {
  if (!(lambda_reg > 0.0)) throw ParameterError("PEVI: lambda must be positive");
  if (!(beta >= 0.0)) throw ParameterError("PEVI: beta must be nonnegative");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("PEVI: gamma must lie in [0,1)");
  if (!(v_max > 0.0)) throw ParameterError("PEVI: v_max must be positive");
  if (!(tol > 0.0)) throw ParameterError("PEVI: tol must be positive");
  if (max_sweeps < 1) throw ParameterError("PEVI: max_sweeps must be positive");
}

Matrix bellman_gram(const OfflineDataset& data, const FeatureMap& features, double lambda_reg) {
  if (data.empty()) throw ParameterError("bellman_gram: empty dataset");
  if (!(lambda_reg > 0.0)) throw ParameterError("bellman_gram: lambda must be positive");
  Matrix g = kernels::gram_parallel(features, data.transitions);
  g.diagonal().array() += lambda_reg;
  return g;
}

Vector bellman_regress(const OfflineDataset& data, const FeatureMap& features, const Vector& v,
                       double lambda_reg, double gamma) {
  if (v.size() != features.num_states()) throw ParameterError("bellman_regress: v has wrong size");
  const Matrix lambda = bellman_gram(data, features, lambda_reg);
  Vector rhs = Vector::Zero(features.dim());
  for (const auto& t : data.transitions) {
    if (!t.reward) throw ContractError("bellman_regress: transition without a reward");
    rhs.noalias() += (*t.reward + gamma * v(t.next_state)) * features.phi(t.state, t.action);
  }
  return lambda.llt().solve(rhs);
}

double uncertainty_bonus(const Matrix& lambda_matrix, const FeatureMap& features, double beta,
                         int s, int a) {
  if (!(beta >= 0.0)) throw ParameterError("uncertainty_bonus: beta must be nonnegative");
  if (!features.contains(s, a)) throw ParameterError("uncertainty_bonus: (s,a) out of range");
  Eigen::LLT<Matrix> llt(lambda_matrix);
  if (llt.info() != Eigen::Success) throw ParameterError("uncertainty_bonus: Lambda is not SPD");
  const Vector x = llt.matrixL().solve(Vector(features.phi(s, a)));
  return beta * x.norm();
}

PeviSolution pevi_solve(const OfflineDataset& data, const FeatureMap& features,
                        const PeviConfig& config) {
  config.validate();
  if (data.empty()) throw ParameterError("pevi_solve: empty dataset");
  const bool par = config.parallel;

  PeviSolution sol;
  sol.beta = config.beta;
  sol.lambda_matrix = par ? kernels::gram_parallel(features, data.transitions)
                          : kernels::gram_serial(features, data.transitions);
  sol.lambda_matrix.diagonal().array() += config.lambda_reg;
  const Eigen::LLT<Matrix> llt(sol.lambda_matrix);
  if (llt.info() != Eigen::Success) throw ParameterError("pevi_solve: Lambda is not SPD");

  const auto stats = kernels::pair_statistics(features, data.transitions);
  const Vector bonus = par ? kernels::bonus_parallel(features, llt, config.beta)
                           : kernels::bonus_serial(features, llt, config.beta);
  const Matrix& phi = features.matrix();

  Vector v = Vector::Zero(features.num_states());
  kernels::GreedyResult greedy;
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    const Vector y = par ? kernels::bellman_targets_parallel(stats, v, config.gamma)
                         : kernels::bellman_targets_serial(stats, v, config.gamma);
    sol.w_hat = llt.solve(phi.transpose() * y);
    sol.max_w_norm = std::max(sol.max_w_norm, sol.w_hat.norm());
    greedy = par ? kernels::pessimistic_greedy_parallel(features, sol.w_hat, bonus, config.v_max)
                 : kernels::pessimistic_greedy_serial(features, sol.w_hat, bonus, config.v_max);
    const double residual = (greedy.v - v).lpNorm<Eigen::Infinity>();
    sol.residuals.push_back(residual);
    v = greedy.v;
    sol.sweeps_used = sweep;
    if (residual < config.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.q_hat = std::move(greedy.q);
  sol.v_hat = std::move(v);
  sol.policy = Policy::deterministic(features.num_actions(), greedy.actions);
  return sol;
}

double theorem_beta(int d, std::size_t n_total, double gamma, double r_max, double delta,
                    double c) {
  if (d < 1 || n_total < 1) throw ParameterError("theorem_beta: d and N must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("theorem_beta: gamma must lie in [0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("theorem_beta: delta must lie in (0,1)");
  if (!(r_max > 0.0 && c > 0.0)) throw ParameterError("theorem_beta: r_max and c must be positive");
  const double zeta1 = std::log(4.0 * d * static_cast<double>(n_total) / ((1.0 - gamma) * delta));
  return c * d * std::sqrt(zeta1) * r_max / (1.0 - gamma);
}

nlohmann::json to_json(const PeviSolution& sol) {
  nlohmann::json j;
  j["w_hat"] = std::vector<double>(sol.w_hat.data(), sol.w_hat.data() + sol.w_hat.size());
  j["beta"] = sol.beta;
  const auto* raw = reinterpret_cast<const char*>(sol.lambda_matrix.data());
  j["lambda_matrix_hash"] =
      hex64(fnv1a64({raw, static_cast<std::size_t>(sol.lambda_matrix.size()) * sizeof(double)}));
  j["v_hat"] = std::vector<double>(sol.v_hat.data(), sol.v_hat.data() + sol.v_hat.size());
  j["policy"] = sol.policy.greedy_actions();
  j["sweeps_used"] = sol.sweeps_used;
  j["converged"] = sol.converged;
  return j;
}

}  // namespace pdslab
