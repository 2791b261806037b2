#include <doctest.h>

#include <limits>

#include <Eigen/SVD>

#include "pdslab/datagen.hpp"
#include "pdslab/linmdp.hpp"
#include "pdslab/util.hpp"
#include "support.hpp"

using namespace pdslab;

namespace {

void check_invariants(const LinearMdp& mdp) {
  const auto& P = mdp.transitions();
  for (Eigen::Index k = 0; k < P.rows(); ++k) {
    CHECK(P.row(k).sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(P.row(k).minCoeff() >= -1e-12);
  }
  CHECK(mdp.rewards().minCoeff() >= 0.0);
  CHECK(mdp.rewards().maxCoeff() <= mdp.r_max());
  CHECK(mdp.theta().norm() <= std::sqrt(double(mdp.dim())) * mdp.r_max() + 1e-12);
  CHECK(mdp.mu().minCoeff() >= 0.0);
  CHECK(mdp.mu().maxCoeff() <= 1.0);
  for (Eigen::Index k = 0; k < mdp.features().matrix().rows(); ++k)
    CHECK(mdp.features().matrix().row(k).norm() <= 1.0 + 1e-12);
}

// Brute-force value iteration, independent of solve_optimal.
Vector brute_force_v_star(const LinearMdp& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  Vector v = Vector::Zero(S);
  for (int it = 0; it < 100000; ++it) {
    Vector next(S);
    for (int s = 0; s < S; ++s) {
      double best = -1.0;
      for (int a = 0; a < A; ++a) {
        const int k = s * A + a;
        best = std::max(best, mdp.rewards()(k) + mdp.gamma() * mdp.transitions().row(k).dot(v));
      }
      next(s) = best;
    }
    const double diff = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (diff < 1e-13) break;
  }
  return v;
}

Policy random_policy(int S, int A, std::uint64_t seed) {
  Rng rng(seed);
  Matrix p(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) p(s, a) = rng.uniform() + 1e-3;
    p.row(s) /= p.row(s).sum();
  }
  return Policy(p);
}

}  // namespace

TEST_SUITE("linmdp") {

TEST_CASE("single state single action: self loop, V* = r/(1-gamma)") {
  const LinearMdp mdp = make_tabular_mdp(1, 1, 0.9, 1.0, 0);
  CHECK(mdp.transitions()(0, 0) == doctest::Approx(1.0));
  const auto opt = solve_optimal(mdp);
  CHECK(opt.values.v(0) == doctest::Approx(10.0 * mdp.reward(0, 0)).epsilon(1e-9));
}

TEST_CASE("tabular generator satisfies every invariant") {
  const LinearMdp mdp = make_tabular_mdp(2, 2, 0.99, 1.0, 7);
  check_invariants(mdp);
  // one-hot features, norm exactly 1
  for (int k = 0; k < 4; ++k) {
    CHECK(mdp.features().matrix().row(k).norm() == 1.0);
    CHECK(mdp.features().matrix()(k, k) == 1.0);
  }
}

TEST_CASE("V* on (5,3,0.95,seed 42) matches brute-force value iteration") {
  const LinearMdp mdp = make_tabular_mdp(5, 3, 0.95, 1.0, 42);
  const auto opt = solve_optimal(mdp, 1e-12);
  CHECK((opt.values.v - brute_force_v_star(mdp)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lowrank generator: valid kernel, simplex features, exact rank") {
  const LinearMdp a = make_lowrank_mdp(4, 2, 3, 0.9, 1.0, 1);
  check_invariants(a);
  for (Eigen::Index k = 0; k < a.features().matrix().rows(); ++k) {
    CHECK(a.features().matrix().row(k).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.features().matrix().row(k).minCoeff() >= 0.0);
  }
  const LinearMdp b = make_lowrank_mdp(6, 3, 2, 0.9, 1.0, 2);
  Eigen::JacobiSVD<Matrix> svd(b.features().matrix());
  const Vector sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  CHECK(rank == 2);
}

TEST_CASE("one-hot simplex features reproduce a tabular construction") {
  // A lowrank MDP whose features are the simplex vertices is a tabular MDP:
  // P(.|s,a) is then exactly the mu row of that pair.
  const int S = 3, A = 2;
  const LinearMdp tab = make_tabular_mdp(S, A, 0.9, 1.0, 5);
  const LinearMdp copy(FeatureMap(S, A, Matrix::Identity(S * A, S * A)), tab.mu(), tab.theta(), 0.9,
                       1.0, tab.init_dist());
  CHECK((copy.transitions() - tab.mu()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((solve_optimal(copy).values.v - solve_optimal(tab).values.v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("adversarial construction") {
  SUBCASE("d = 1: every feature is 1 and Sigma* = 1") {
    const LinearMdp mdp = make_adversarial_mdp(3, 1, 0.9, 1.0);
    for (int a = 0; a < 3; ++a) CHECK(mdp.features().phi(0, a)(0) == doctest::Approx(1.0));
    const Matrix sigma = occupancy_second_moment(mdp, adversarial_optimal_policy(3, 1), 0);
    CHECK(sigma(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("d = 2: occupancy second moment proportional to identity") {
    const LinearMdp mdp = make_adversarial_mdp(5, 2, 0.9, 1.0);
    CHECK(mdp.feature_scale() == doctest::Approx(1.0 / std::sqrt(2.0)));
    const Matrix sigma = occupancy_second_moment(mdp, adversarial_optimal_policy(5, 2), 0);
    CHECK(std::abs(sigma(0, 1)) < 1e-14);
    CHECK(sigma(0, 0) == doctest::Approx(sigma(1, 1)));
    CHECK(sigma(0, 0) > 0.0);
  }
  SUBCASE("gamma = 0 collapses SubOpt to the one-step reward gap") {
    const LinearMdp mdp = make_adversarial_mdp(2, 1, 0.0, 1.0);
    const Vector v_star = solve_optimal(mdp).values.v;
    for (int a = 0; a < 2; ++a) {
      const Policy pi = Policy::deterministic(2, {a});
      CHECK(suboptimality(mdp, pi, 0) ==
            doctest::Approx(v_star(0) - mdp.reward(0, a)).epsilon(1e-12));
    }
  }
  SUBCASE("all optimal actions share Q*") {
    const LinearMdp mdp = make_adversarial_mdp(6, 3, 0.9, 1.0);
    const auto opt = solve_optimal(mdp);
    CHECK(opt.values.q(0, 0) == doctest::Approx(opt.values.q(0, 1)));
    CHECK(opt.values.q(0, 1) == doctest::Approx(opt.values.q(0, 2)));
  }
  CHECK_THROWS_AS(make_adversarial_mdp(2, 2, 0.9, 1.0), ParameterError);
}

TEST_CASE("evaluate_policy") {
  SUBCASE("single-state self loop, r = 0.5, gamma = 0.9") {
    const LinearMdp mdp = testing::bandit({0.5}, 0.9);
    CHECK(evaluate_policy(mdp, Policy::uniform(1, 1)).v(0) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("uniform policy on (5,3,0.95,42) matches fixed-point iteration") {
    const LinearMdp mdp = make_tabular_mdp(5, 3, 0.95, 1.0, 42);
    const Policy pi = Policy::uniform(5, 3);
    const auto rep = evaluate_policy(mdp, pi);
    CHECK((rep.v - testing::iterate_policy_values(mdp, pi)).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("100 random (mdp, policy) pairs agree with iteration and stay in range") {
    for (std::uint64_t i = 0; i < 100; ++i) {
      const int S = 2 + int(i % 6), A = 1 + int(i % 4);
      const LinearMdp mdp = i % 2 ? make_tabular_mdp(S, A, 0.9, 1.0, i)
                                  : make_lowrank_mdp(S, A, std::min(3, S * A), 0.9, 1.0, i);
      const Policy pi = random_policy(S, A, 1000 + i);
      const auto rep = evaluate_policy(mdp, pi);
      CHECK((rep.v - testing::iterate_policy_values(mdp, pi)).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(rep.v.minCoeff() >= 0.0);
      CHECK(rep.v.maxCoeff() <= mdp.v_max() + 1e-9);
      CHECK(rep.q.minCoeff() >= 0.0);
      CHECK(rep.q.maxCoeff() <= mdp.v_max() + 1e-9);
    }
  }
  SUBCASE("shape mismatch") {
    const LinearMdp mdp = make_tabular_mdp(3, 2, 0.9, 1.0, 1);
    CHECK_THROWS_AS(evaluate_policy(mdp, Policy::uniform(2, 2)), ParameterError);
  }
}

TEST_CASE("solve_optimal") {
  SUBCASE("single state picks the best reward") {
    const LinearMdp mdp = testing::bandit({0.2, 0.7, 0.4}, 0.9);
    const auto opt = solve_optimal(mdp);
    CHECK(opt.policy.greedy_actions()[0] == 1);
    CHECK(opt.values.v(0) == doctest::Approx(7.0).epsilon(1e-9));
  }
  SUBCASE("stable across tolerances") {
    const LinearMdp mdp = make_tabular_mdp(5, 3, 0.95, 1.0, 42);
    const auto a = solve_optimal(mdp, 1e-8);
    const auto b = solve_optimal(mdp, 1e-10);
    CHECK((a.values.v - b.values.v).cwiseAbs().maxCoeff() < 1e-7);
  }
  SUBCASE("returned V is a Bellman fixed point within tol") {
    const LinearMdp mdp = make_lowrank_mdp(8, 3, 4, 0.9, 1.0, 9);
    const double tol = 1e-9;
    const auto opt = solve_optimal(mdp, tol);
    for (int s = 0; s < 8; ++s) CHECK(std::abs(opt.values.q.row(s).maxCoeff() - opt.values.v(s)) < tol);
  }
  SUBCASE("residuals contract by gamma after the first sweep") {
    const LinearMdp mdp = make_tabular_mdp(6, 3, 0.9, 1.0, 3);
    const auto opt = solve_optimal(mdp);
    REQUIRE(opt.residuals.size() > 2);
    // exact in real arithmetic; allow a few ulps of the value scale
    const double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t k = 1; k + 1 < opt.residuals.size(); ++k)
      CHECK(opt.residuals[k + 1] <= 0.9 * opt.residuals[k] + 8 * eps * mdp.v_max());
  }
  SUBCASE("ties resolve to the lowest action index") {
    const LinearMdp mdp = testing::bandit({0.5, 0.5}, 0.9);
    CHECK(solve_optimal(mdp).policy.greedy_actions()[0] == 0);
  }
  CHECK_THROWS_AS(solve_optimal(make_tabular_mdp(2, 2, 0.9, 1.0, 0), 0.0), ParameterError);
}

TEST_CASE("suboptimality") {
  SUBCASE("the optimal policy has zero gap") {
    const LinearMdp mdp = make_tabular_mdp(5, 3, 0.9, 1.0, 11);
    const auto opt = solve_optimal(mdp);
    for (int s = 0; s < 5; ++s) CHECK(std::abs(suboptimality(mdp, opt.policy, s)) < 1e-8);
  }
  SUBCASE("uniform policy on a {0,1} bandit with gamma 0.9 -> 5") {
    const LinearMdp mdp = testing::bandit({0.0, 1.0}, 0.9);
    CHECK(suboptimality(mdp, Policy::uniform(1, 2), 0) == doctest::Approx(5.0).epsilon(1e-9));
  }
  SUBCASE("any policy stays in [0, v_max]") {
    const LinearMdp mdp = make_lowrank_mdp(6, 4, 3, 0.95, 1.0, 4);
    for (std::uint64_t i = 0; i < 10; ++i) {
      const Policy pi = random_policy(6, 4, i);
      for (int s = 0; s < 6; ++s) {
        const double g = suboptimality(mdp, pi, s);
        CHECK(g >= -1e-8);
        CHECK(g <= mdp.v_max() + 1e-9);
      }
    }
  }
}

TEST_CASE("policies") {
  const Policy base = Policy::deterministic(3, {2, 0});
  const Policy eps = Policy::epsilon_greedy(base, 0.3);
  CHECK(eps.prob(0, 2) == doctest::Approx(0.7 + 0.1));
  CHECK(eps.prob(0, 0) == doctest::Approx(0.1));
  CHECK(eps.greedy_actions() == std::vector<int>{2, 0});
  Matrix bad(1, 2);
  bad << 0.7, 0.4;
  CHECK_THROWS_AS(Policy{bad}, ParameterError);
}

TEST_CASE("construction rejects invalid MDPs") {
  CHECK_THROWS_AS(make_tabular_mdp(0, 2, 0.9, 1.0, 0), ParameterError);
  CHECK_THROWS_AS(make_tabular_mdp(2, 2, 1.0, 1.0, 0), ParameterError);
  CHECK_THROWS_AS(make_tabular_mdp(2, 2, -0.1, 1.0, 0), ParameterError);
  CHECK_THROWS_AS(make_lowrank_mdp(2, 2, 5, 0.9, 1.0, 0), ParameterError);
  // feature norm above 1
  CHECK_THROWS_AS(FeatureMap(1, 1, Matrix::Constant(1, 2, 0.8)), ParameterError);
  // kernel rows that do not sum to one
  FeatureMap f(1, 1, Matrix::Identity(1, 1));
  CHECK_THROWS_AS(LinearMdp(f, Matrix::Constant(1, 1, 0.5), Vector::Constant(1, 0.5), 0.9, 1.0,
                            Vector::Ones(1)),
                  ParameterError);
  // reward above r_max
  CHECK_THROWS_AS(LinearMdp(f, Matrix::Ones(1, 1), Vector::Constant(1, 2.0), 0.9, 1.0, Vector::Ones(1)),
                  ParameterError);
}

TEST_CASE("determinism and JSON round trip") {
  const LinearMdp a = make_lowrank_mdp(7, 3, 4, 0.9, 1.0, 123);
  const LinearMdp b = make_lowrank_mdp(7, 3, 4, 0.9, 1.0, 123);
  CHECK(a.features().matrix() == b.features().matrix());
  CHECK(a.mu() == b.mu());
  CHECK(a.theta() == b.theta());
  CHECK(mdp_hash(a) == mdp_hash(b));
  CHECK(mdp_hash(a) != mdp_hash(make_lowrank_mdp(7, 3, 4, 0.9, 1.0, 124)));

  const LinearMdp c = mdp_from_json(nlohmann::json::parse(to_json(a).dump()));
  CHECK(c.features().matrix() == a.features().matrix());
  CHECK(c.mu() == a.mu());
  CHECK(c.theta() == a.theta());
  CHECK(c.gamma() == a.gamma());
  CHECK(mdp_hash(c) == mdp_hash(a));
}

}  // TEST_SUITE
