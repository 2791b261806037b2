#include "pdslab/linmdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pdslab/util.hpp"

namespace pdslab {

namespace {

constexpr double kNormSlack = 1e-12;
constexpr double kKernelSumTol = 1e-10;
constexpr double kNegativeTol = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}

// Flat Dirichlet(1) draw.
Vector simplex_point(Rng& rng, int n) {
  Vector w(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    w(i) = -std::log(u);
  }
  return w / w.sum();
}

void check_gamma(double gamma) {
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
}

}  // namespace

FeatureMap::FeatureMap(int num_states, int num_actions, Matrix phi)
    : num_states_(num_states), num_actions_(num_actions), phi_(std::move(phi)) {
  require(num_states >= 1 && num_actions >= 1, "FeatureMap: sizes must be positive");
  require(phi_.cols() >= 1, "FeatureMap: dim must be at least 1");
  require(phi_.rows() == static_cast<Eigen::Index>(num_states) * num_actions,
          "FeatureMap: phi must have |S|*|A| rows");
  require(phi_.allFinite(), "FeatureMap: phi contains non-finite entries");
  for (Eigen::Index i = 0; i < phi_.rows(); ++i) {
    require(phi_.row(i).norm() <= 1.0 + kNormSlack,
            "FeatureMap: ||phi(s,a)|| exceeds 1 at pair " + std::to_string(i));
  }
}

LinearMdp::LinearMdp(FeatureMap features, Matrix mu, Vector theta, double gamma, double r_max,
                     Vector init_dist, std::uint64_t seed, double feature_scale)
    : features_(std::move(features)),
      mu_(std::move(mu)),
      theta_(std::move(theta)),
      gamma_(gamma),
      r_max_(r_max),
      init_dist_(std::move(init_dist)),
      seed_(seed),
      feature_scale_(feature_scale) {
  const int d = features_.dim();
  const int S = features_.num_states();
  check_gamma(gamma_);
  require(r_max_ > 0.0, "r_max must be positive");
  require(mu_.rows() == d && mu_.cols() == S, "mu must be d x |S|");
  require(theta_.size() == d, "theta must have d entries");
  require(init_dist_.size() == S, "init_dist must have |S| entries");
  require((mu_.array() >= 0.0).all() && (mu_.array() <= 1.0).all(),
          "mu entries must lie in [0, 1]");
  require(theta_.norm() <= std::sqrt(static_cast<double>(d)) * r_max_ + kNormSlack,
          "||theta|| exceeds sqrt(d) * r_max");
  require((init_dist_.array() >= 0.0).all() && std::abs(init_dist_.sum() - 1.0) <= 1e-12,
          "init_dist must be a probability vector");

  transitions_ = features_.matrix() * mu_;
  for (Eigen::Index i = 0; i < transitions_.rows(); ++i) {
    auto row = transitions_.row(i);
    require(row.minCoeff() >= -kNegativeTol,
            "transition kernel has a negative entry at pair " + std::to_string(i));
    require(std::abs(row.sum() - 1.0) <= kKernelSumTol,
            "transition row does not sum to 1 at pair " + std::to_string(i));
    if (row.minCoeff() < 0.0) {
      row = row.cwiseMax(0.0);
      row /= row.sum();
    }
  }
  rewards_ = features_.matrix() * theta_;
  for (Eigen::Index i = 0; i < rewards_.size(); ++i) {
    // Reward rounding can dip a hair outside the range; clamp, but reject real violations.
    require(rewards_(i) >= -kNormSlack && rewards_(i) <= r_max_ + kNormSlack,
            "reward outside [0, r_max] at pair " + std::to_string(i));
    rewards_(i) = std::clamp(rewards_(i), 0.0, r_max_);
  }
}

Policy::Policy(Matrix probabilities) : probs_(std::move(probabilities)) {
  require(probs_.rows() >= 1 && probs_.cols() >= 1, "Policy: empty table");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    require(probs_.row(s).minCoeff() >= 0.0, "Policy: negative probability");
    require(std::abs(probs_.row(s).sum() - 1.0) <= 1e-12, "Policy: row does not sum to 1");
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

Policy Policy::deterministic(int num_actions, const std::vector<int>& actions) {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] >= 0 && actions[s] < num_actions, "Policy: action out of range");
    p(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy(std::move(p));
}

Policy Policy::epsilon_greedy(const Policy& base, double eps) {
  require(eps >= 0.0 && eps <= 1.0, "epsilon must lie in [0, 1]");
  const auto greedy = base.greedy_actions();
  const int A = base.num_actions();
  Matrix p = Matrix::Constant(base.num_states(), A, eps / A);
  for (int s = 0; s < base.num_states(); ++s) p(s, greedy[s]) += 1.0 - eps;
  // Renormalize away rounding so the row-sum check is exact enough.
  for (int s = 0; s < base.num_states(); ++s) p.row(s) /= p.row(s).sum();
  return Policy(std::move(p));
}

std::vector<int> Policy::greedy_actions() const {
  std::vector<int> out(static_cast<std::size_t>(probs_.rows()));
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    int best = 0;
    for (Eigen::Index a = 1; a < probs_.cols(); ++a)
      if (probs_(s, a) > probs_(s, best)) best = static_cast<int>(a);
    out[static_cast<std::size_t>(s)] = best;
  }
  return out;
}

LinearMdp make_tabular_mdp(int num_states, int num_actions, double gamma, double r_max,
                           std::uint64_t seed) {
  require(num_states >= 1 && num_actions >= 1, "make_tabular_mdp: sizes must be positive");
  check_gamma(gamma);
  require(r_max > 0.0, "r_max must be positive");
  const int pairs = num_states * num_actions;
  Rng rng(seed);
  Matrix mu(pairs, num_states);
  for (int k = 0; k < pairs; ++k) mu.row(k) = simplex_point(rng, num_states).transpose();
  Vector theta(pairs);
  for (int k = 0; k < pairs; ++k) theta(k) = rng.uniform(0.0, r_max);
  FeatureMap features(num_states, num_actions, Matrix::Identity(pairs, pairs));
  return LinearMdp(std::move(features), std::move(mu), std::move(theta), gamma, r_max,
                   Vector::Constant(num_states, 1.0 / num_states), seed);
}

LinearMdp make_grid_tabular_mdp(int num_states, int num_actions, int grid, double gamma,
                                double r_max, std::uint64_t seed) {
  require(grid >= 1, "make_grid_tabular_mdp: grid must be positive");
  require(num_states >= 1 && num_actions >= 1, "make_grid_tabular_mdp: sizes must be positive");
  check_gamma(gamma);
  require(r_max > 0.0, "r_max must be positive");
  const int pairs = num_states * num_actions;
  Rng rng(seed);
  Matrix mu(pairs, num_states);
  for (int k = 0; k < pairs; ++k) {
    // Largest-remainder rounding of a Dirichlet draw onto multiples of 1/grid.
    const Vector p = simplex_point(rng, num_states) * grid;
    std::vector<int> counts(static_cast<std::size_t>(num_states));
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int s = 0; s < num_states; ++s) {
      counts[s] = static_cast<int>(std::floor(p(s)));
      assigned += counts[s];
      remainders.emplace_back(p(s) - counts[s], s);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (int i = 0; assigned < grid; ++i, ++assigned) ++counts[remainders[i].second];
    for (int s = 0; s < num_states; ++s) mu(k, s) = static_cast<double>(counts[s]) / grid;
  }
  Vector theta(pairs);
  for (int k = 0; k < pairs; ++k) theta(k) = rng.uniform(0.0, r_max);
  FeatureMap features(num_states, num_actions, Matrix::Identity(pairs, pairs));
  return LinearMdp(std::move(features), std::move(mu), std::move(theta), gamma, r_max,
                   Vector::Constant(num_states, 1.0 / num_states), seed);
}

LinearMdp make_lowrank_mdp(int num_states, int num_actions, int dim, double gamma, double r_max,
                           std::uint64_t seed) {
  require(num_states >= 1 && num_actions >= 1, "make_lowrank_mdp: sizes must be positive");
  require(dim >= 1 && dim <= num_states * num_actions,
          "make_lowrank_mdp: dim must lie in [1, |S|*|A|]");
  check_gamma(gamma);
  require(r_max > 0.0, "r_max must be positive");
  const int pairs = num_states * num_actions;
  Rng rng(seed);
  Matrix phi(pairs, dim);
  for (int k = 0; k < pairs; ++k) phi.row(k) = simplex_point(rng, dim).transpose();
  Matrix mu(dim, num_states);
  for (int j = 0; j < dim; ++j) mu.row(j) = simplex_point(rng, num_states).transpose();
  Vector theta(dim);
  for (int j = 0; j < dim; ++j) theta(j) = rng.uniform(0.0, r_max);
  FeatureMap features(num_states, num_actions, std::move(phi));
  return LinearMdp(std::move(features), std::move(mu), std::move(theta), gamma, r_max,
                   Vector::Constant(num_states, 1.0 / num_states), seed);
}

LinearMdp make_adversarial_mdp(int num_actions, int dim, double gamma, double r_max) {
  require(dim >= 1, "make_adversarial_mdp: dim must be positive");
  require(num_actions > dim, "make_adversarial_mdp: need more actions than dimensions");
  check_gamma(gamma);
  require(r_max > 0.0, "r_max must be positive");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  Matrix phi = Matrix::Zero(num_actions, dim);
  for (int i = 0; i < dim; ++i) phi(i, i) = std::sqrt(static_cast<double>(dim)) * scale;
  for (int a = dim; a < num_actions; ++a) phi.row(a).setConstant(1.0 / dim);
  // Self-loop: <phi(a), mu> = 1 for every action forces mu = (1, ..., 1).
  Matrix mu = Matrix::Ones(dim, 1);
  Vector theta = Vector::Constant(dim, r_max);
  return LinearMdp(FeatureMap(1, num_actions, std::move(phi)), std::move(mu), std::move(theta),
                   gamma, r_max, Vector::Ones(1), 0, scale);
}

Policy adversarial_optimal_policy(int num_actions, int dim) {
  require(num_actions > dim && dim >= 1, "adversarial_optimal_policy: need num_actions > dim");
  Matrix p = Matrix::Zero(1, num_actions);
  p.leftCols(dim).setConstant(1.0 / dim);
  return Policy(std::move(p));
}

namespace {

void check_policy_shape(const LinearMdp& mdp, const Policy& policy) {
  require(policy.num_states() == mdp.num_states() && policy.num_actions() == mdp.num_actions(),
          "policy shape does not match the MDP");
}

// P^pi (|S| x |S|) and r^pi.
std::pair<Matrix, Vector> policy_dynamics(const LinearMdp& mdp, const Policy& policy) {
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  Matrix p_pi = Matrix::Zero(S, S);
  Vector r_pi = Vector::Zero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double w = policy.prob(s, a);
      if (w == 0.0) continue;
      const int k = mdp.features().pair_index(s, a);
      p_pi.row(s) += w * mdp.transitions().row(k);
      r_pi(s) += w * mdp.rewards()(k);
    }
  }
  return {std::move(p_pi), std::move(r_pi)};
}

Matrix q_from_v(const LinearMdp& mdp, const Vector& v) {
  const Vector q_flat = mdp.rewards() + mdp.gamma() * (mdp.transitions() * v);
  Matrix q(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < mdp.num_actions(); ++a) q(s, a) = q_flat(mdp.features().pair_index(s, a));
  return q;
}

}  // namespace

ValueReport evaluate_policy(const LinearMdp& mdp, const Policy& policy) {
  check_policy_shape(mdp, policy);
  auto [p_pi, r_pi] = policy_dynamics(mdp, policy);
  const int S = mdp.num_states();
  const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * p_pi;
  Vector v = system.partialPivLu().solve(r_pi);
  return {v, q_from_v(mdp, v)};
}

OptimalSolution solve_optimal(const LinearMdp& mdp, double tol) {
  require(tol > 0.0, "solve_optimal: tol must be positive");
  const int S = mdp.num_states();
  const double gamma = mdp.gamma();
  // ||V_{k+1} - V*|| <= gamma/(1-gamma) ||V_{k+1} - V_k|| < tol/2.
  const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / (2.0 * gamma) : 0.0;
  OptimalSolution out;
  Vector v = Vector::Zero(S);
  for (;;) {
    const Matrix q = q_from_v(mdp, v);
    const Vector next = q.rowwise().maxCoeff();
    const double residual = (next - v).lpNorm<Eigen::Infinity>();
    out.residuals.push_back(residual);
    v = next;
    if (residual <= stop || gamma == 0.0) break;
  }
  out.values.v = v;
  out.values.q = q_from_v(mdp, v);
  std::vector<int> greedy(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    int best = 0;
    for (int a = 1; a < mdp.num_actions(); ++a)
      if (out.values.q(s, a) > out.values.q(s, best)) best = a;
    greedy[static_cast<std::size_t>(s)] = best;
  }
  out.policy = Policy::deterministic(mdp.num_actions(), greedy);
  return out;
}

Vector suboptimality_all(const LinearMdp& mdp, const Vector& v_star, const Policy& policy) {
  return v_star - evaluate_policy(mdp, policy).v;
}

double suboptimality(const LinearMdp& mdp, const Policy& policy, int state) {
  require(state >= 0 && state < mdp.num_states(), "suboptimality: state out of range");
  const auto opt = solve_optimal(mdp);
  return opt.values.v(state) - evaluate_policy(mdp, policy).v(state);
}

Matrix discounted_state_occupancy(const LinearMdp& mdp, const Policy& policy) {
  check_policy_shape(mdp, policy);
  const auto [p_pi, r_pi] = policy_dynamics(mdp, policy);
  const int S = mdp.num_states();
  const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * p_pi;
  return (1.0 - mdp.gamma()) * system.partialPivLu().solve(Matrix::Identity(S, S));
}

namespace {

nlohmann::json flat(const Matrix& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  return arr;
}

Matrix unflat(const nlohmann::json& arr, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols))
    throw ValidationError(std::string("mdp json: field '") + name + "' has the wrong length");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = arr[k++].get<double>();
  return m;
}

}  // namespace

nlohmann::json to_json(const LinearMdp& mdp) {
  nlohmann::json j;
  j["num_states"] = mdp.num_states();
  j["num_actions"] = mdp.num_actions();
  j["dim"] = mdp.dim();
  j["gamma"] = mdp.gamma();
  j["r_max"] = mdp.r_max();
  j["phi"] = flat(mdp.features().matrix());
  j["mu"] = flat(mdp.mu());
  j["theta"] = flat(mdp.theta());
  j["init_dist"] = flat(mdp.init_dist());
  j["seed"] = mdp.seed();
  j["feature_scale"] = mdp.feature_scale();
  return j;
}

LinearMdp mdp_from_json(const nlohmann::json& j) {
  for (const char* key : {"num_states", "num_actions", "dim", "gamma", "r_max", "phi", "mu",
                          "theta", "init_dist"}) {
    if (!j.contains(key)) throw ValidationError(std::string("mdp json: missing field '") + key + "'");
  }
  const int S = j.at("num_states").get<int>();
  const int A = j.at("num_actions").get<int>();
  const int d = j.at("dim").get<int>();
  if (S < 1 || A < 1 || d < 1) throw ValidationError("mdp json: sizes must be positive");
  FeatureMap features(S, A, unflat(j.at("phi"), static_cast<Eigen::Index>(S) * A, d, "phi"));
  return LinearMdp(std::move(features), unflat(j.at("mu"), d, S, "mu"),
                   unflat(j.at("theta"), d, 1, "theta"), j.at("gamma").get<double>(),
                   j.at("r_max").get<double>(), unflat(j.at("init_dist"), S, 1, "init_dist"),
                   j.value("seed", std::uint64_t{0}), j.value("feature_scale", 1.0));
}

std::string mdp_hash(const LinearMdp& mdp) { return hex64(fnv1a64(to_json(mdp).dump())); }

}  // namespace pdslab
