#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <fstream>

#include "pdslab/datagen.hpp"
#include "pdslab/util.hpp"
#include "support.hpp"

using namespace pdslab;

namespace {

// Average state distribution over the first H steps from init (the sampler
// restarts every H steps, so this is the exact per-step target).
Vector reset_averaged_states(const LinearMdp& mdp, const Policy& pi, int H) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  Matrix p_pi = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) p_pi.row(s) += pi.prob(s, a) * mdp.transitions().row(s * A + a);
  Vector dist = mdp.init_dist();
  Vector acc = Vector::Zero(S);
  for (int t = 0; t < H; ++t) {
    acc += dist;
    dist = (dist.transpose() * p_pi).transpose();
  }
  return acc / H;
}

// Largest C with M - C*Sigma PSD, by bisection on the smallest eigenvalue.
double bisect_scaling(const Matrix& m, const Matrix& sigma) {
  auto ok = [&](double c) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m - c * sigma);
    return es.eigenvalues().minCoeff() >= -1e-12;
  };
  double lo = 0.0, hi = 1.0;
  while (ok(hi) && hi < 1e6) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

OfflineDataset visits(const LinearMdp& mdp, const std::vector<std::pair<int, int>>& pairs_counts) {
  OfflineDataset d;
  d.num_states = mdp.num_states();
  d.num_actions = mdp.num_actions();
  for (auto [a, n] : pairs_counts)
    for (int i = 0; i < n; ++i) d.transitions.push_back({0, a, mdp.reward(0, a), 0});
  return d;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("sample_dataset basics") {
  SUBCASE("n = 1 on a single-state MDP") {
    const LinearMdp mdp = make_tabular_mdp(1, 2, 0.9, 1.0, 0);
    const auto d = sample_dataset(mdp, Policy::uniform(1, 2), 1, 100, true, 3);
    REQUIRE(d.size() == 1);
    CHECK(d.transitions[0].next_state == d.transitions[0].state);
  }
  SUBCASE("unlabeled -> no rewards at all") {
    const LinearMdp mdp = make_tabular_mdp(4, 2, 0.9, 1.0, 1);
    const auto d = sample_dataset(mdp, Policy::uniform(4, 2), 500, 100, false, 3);
    CHECK_FALSE(d.labeled);
    for (const auto& t : d.transitions) CHECK_FALSE(t.reward.has_value());
  }
  SUBCASE("labeled, noise 0 -> rewards are exactly <phi, theta>") {
    const LinearMdp mdp = make_lowrank_mdp(6, 3, 3, 0.9, 1.0, 2);
    const auto d = sample_dataset(mdp, Policy::uniform(6, 3), 500, 100, true, 4);
    for (const auto& t : d.transitions) CHECK(*t.reward == mdp.reward(t.state, t.action));
  }
  SUBCASE("noisy rewards stay in [0, r_max]") {
    const LinearMdp mdp = make_lowrank_mdp(6, 3, 3, 0.9, 1.0, 2);
    const auto d = sample_dataset(mdp, Policy::uniform(6, 3), 2000, 100, true, 4, 0.3);
    int differs = 0;
    for (const auto& t : d.transitions) {
      CHECK(*t.reward >= 0.0);
      CHECK(*t.reward <= 1.0);
      differs += *t.reward != mdp.reward(t.state, t.action);
    }
    CHECK(differs > 1900);
  }
  SUBCASE("deterministic given seed") {
    const LinearMdp mdp = make_tabular_mdp(4, 2, 0.9, 1.0, 1);
    const auto a = sample_dataset(mdp, Policy::uniform(4, 2), 300, 50, true, 9, 0.1);
    const auto b = sample_dataset(mdp, Policy::uniform(4, 2), 300, 50, true, 9, 0.1);
    CHECK(a.transitions == b.transitions);
    const auto c = sample_dataset(mdp, Policy::uniform(4, 2), 300, 50, true, 10, 0.1);
    CHECK_FALSE(a.transitions == c.transitions);
  }
  SUBCASE("parameter validation") {
    const LinearMdp mdp = make_tabular_mdp(2, 2, 0.9, 1.0, 1);
    CHECK_THROWS_AS(sample_dataset(mdp, Policy::uniform(2, 2), 0, 100, true, 0), ParameterError);
    CHECK_THROWS_AS(sample_dataset(mdp, Policy::uniform(2, 2), 10, 0, true, 0), ParameterError);
  }
}

TEST_CASE("pair frequencies match the behavior occupancy within 3 standard errors") {
  const LinearMdp mdp = make_tabular_mdp(5, 3, 0.9, 1.0, 17);
  const Policy pi = Policy::uniform(5, 3);
  const int H = 100, episodes = 100;
  const auto d = sample_dataset(mdp, pi, std::size_t(H) * episodes, H, false, 5);
  const Vector states = reset_averaged_states(mdp, pi, H);
  // Episodes are independent, so per-episode frequencies give an honest SE
  // despite the Markov correlation inside an episode.
  Matrix per_episode = Matrix::Zero(episodes, 15);
  for (int e = 0; e < episodes; ++e)
    for (int t = 0; t < H; ++t) {
      const auto& tr = d.transitions[std::size_t(e) * H + t];
      per_episode(e, tr.state * 3 + tr.action) += 1.0 / H;
    }
  for (int k = 0; k < 15; ++k) {
    const double expected = states(k / 3) * pi.prob(k / 3, k % 3);
    const double mean = per_episode.col(k).mean();
    const double sd = std::sqrt((per_episode.col(k).array() - mean).square().sum() / (episodes - 1));
    const double se = sd / std::sqrt(double(episodes));
    CHECK(std::abs(mean - expected) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("mix_datasets") {
  const LinearMdp mdp = make_tabular_mdp(3, 2, 0.9, 1.0, 1);
  const auto a = sample_dataset(mdp, Policy::uniform(3, 2), 50, 100, true, 1, 0.1);
  const auto b = sample_dataset(mdp, Policy::uniform(3, 2), 40, 100, false, 2);
  const auto aa = mix_datasets(a, a);
  CHECK(aa.size() == 100);
  CHECK(aa.labeled);
  const auto ab = mix_datasets(a, b);
  CHECK_FALSE(ab.labeled);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(ab.transitions[i] == a.transitions[i]);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(ab.transitions[a.size() + i] == b.transitions[i]);
  const LinearMdp other = make_tabular_mdp(4, 2, 0.9, 1.0, 1);
  const auto c = sample_dataset(other, Policy::uniform(4, 2), 10, 100, true, 3);
  CHECK_THROWS_AS(mix_datasets(a, c), ParameterError);
}

TEST_CASE("strip_rewards") {
  const LinearMdp mdp = make_tabular_mdp(3, 2, 0.9, 1.0, 1);
  const auto a = sample_dataset(mdp, Policy::uniform(3, 2), 30, 100, true, 1);
  const auto s = strip_rewards(a);
  CHECK_FALSE(s.labeled);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK_FALSE(s.transitions[i].reward.has_value());
    CHECK(s.transitions[i].state == a.transitions[i].state);
  }
}

TEST_CASE("occupancy_second_moment") {
  SUBCASE("single state single action -> phi phi^T") {
    FeatureMap f(1, 1, (Matrix(1, 2) << 0.6, 0.8).finished());
    // 0.6 m + 0.8 m = 1
    const LinearMdp mdp(f, Matrix::Constant(2, 1, 1.0 / 1.4), Vector::Constant(2, 0.5), 0.9, 1.0,
                        Vector::Ones(1));
    const Matrix sigma = occupancy_second_moment(mdp, Policy::uniform(1, 1), 0);
    const Vector phi = f.phi(0, 0);
    CHECK((sigma - phi * phi.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("adversarial MDP under the optimal policy -> proportional to identity") {
    const LinearMdp mdp = make_adversarial_mdp(7, 4, 0.9, 1.0);
    const Matrix sigma = occupancy_second_moment(mdp, adversarial_optimal_policy(7, 4), 0);
    CHECK((sigma - 0.25 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("eigenvalues in [0, 1] and trace <= 1 for random inputs") {
    for (std::uint64_t i = 0; i < 20; ++i) {
      const LinearMdp mdp = make_lowrank_mdp(6, 3, 4, 0.95, 1.0, i);
      const Policy pi = Policy::epsilon_greedy(solve_optimal(mdp).policy, 0.2);
      for (int s = 0; s < 6; ++s) {
        const Matrix sigma = occupancy_second_moment(mdp, pi, s);
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-9);
        CHECK(sigma.trace() <= 1.0 + 1e-12);
      }
    }
  }
  SUBCASE("matches a truncated discounted sum") {
    const LinearMdp mdp = make_tabular_mdp(3, 2, 0.7, 1.0, 8);
    const Policy pi = Policy::uniform(3, 2);
    Matrix p_pi = Matrix::Zero(3, 3);
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) p_pi.row(s) += 0.5 * mdp.transitions().row(s * 2 + a);
    Vector dist = Vector::Unit(3, 1);
    Matrix acc = Matrix::Zero(6, 6);
    double w = 0.3;
    for (int t = 0; t < 200; ++t) {
      for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) {
          const Vector phi = mdp.features().phi(s, a);
          acc += w * dist(s) * 0.5 * phi * phi.transpose();
        }
      dist = (dist.transpose() * p_pi).transpose();
      w *= 0.7;
    }
    CHECK((occupancy_second_moment(mdp, pi, 1) - acc).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("max_psd_scaling agrees with bisection") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 4;
    Matrix g(d, d), h(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        g(i, j) = rng.normal();
        h(i, j) = rng.normal();
      }
    const Matrix m = g * g.transpose() + 0.1 * Matrix::Identity(d, d);
    // rank-deficient Sigma on odd trials
    if (trial % 2) h.col(0).setZero();
    const Matrix sigma = h * h.transpose();
    CHECK(max_psd_scaling(m, sigma) == doctest::Approx(bisect_scaling(m, sigma)).epsilon(1e-7));
  }
}

TEST_CASE("coverage_coefficient") {
  const LinearMdp mdp = make_adversarial_mdp(5, 2, 0.9, 1.0);
  const Policy opt = adversarial_optimal_policy(5, 2);
  SUBCASE("Gram = Sigma* -> C = 1; adding centroid visits scales it down exactly") {
    CHECK(coverage_coefficient(visits(mdp, {{0, 10}, {1, 10}}), mdp, opt).c_dagger ==
          doctest::Approx(1.0).epsilon(1e-10));
    // M = 0.5 * Sigma* + 0.5 * (centroid part), and the centroid adds mass only
    // along (1,1), so the binding direction (1,-1) gives C = 0.5.
    CHECK(coverage_coefficient(visits(mdp, {{0, 10}, {1, 10}, {3, 20}}), mdp, opt).c_dagger ==
          doctest::Approx(0.5).epsilon(1e-10));
  }
  SUBCASE("Gram = alpha * Sigma* -> C = alpha") {
    const Matrix sigma = occupancy_second_moment(mdp, opt, 0);
    CHECK(max_psd_scaling(0.37 * sigma, sigma) == doctest::Approx(0.37).epsilon(1e-10));
  }
  SUBCASE("missing an optimal action in a one-hot MDP -> C = 0") {
    const LinearMdp tab = make_tabular_mdp(3, 2, 0.9, 1.0, 6);
    const auto sol = solve_optimal(tab);
    const auto acts = sol.policy.greedy_actions();
    OfflineDataset d;
    d.num_states = 3;
    d.num_actions = 2;
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) {
        if (s == 1 && a == acts[1]) continue;
        d.transitions.push_back({s, a, tab.reward(s, a), 0});
      }
    CHECK(coverage_coefficient(d, tab, sol.policy).c_dagger == 0.0);
  }
  SUBCASE("data drawn from pi* approaches C = 1") {
    const auto d = sample_dataset(mdp, opt, 40000, 100, true, 8);
    CHECK(coverage_coefficient(d, mdp, opt).c_dagger == doctest::Approx(1.0).epsilon(0.03));
  }
  SUBCASE("duplicating every transition leaves C unchanged") {
    const LinearMdp lr = make_lowrank_mdp(6, 3, 3, 0.9, 1.0, 2);
    const auto sol = solve_optimal(lr);
    const auto d = sample_dataset(lr, Policy::uniform(6, 3), 300, 100, true, 3);
    const double c1 = coverage_coefficient(d, lr, sol.policy).c_dagger;
    const double c2 = coverage_coefficient(mix_datasets(d, d), lr, sol.policy).c_dagger;
    CHECK(c2 == doctest::Approx(c1).epsilon(1e-12));
  }
  SUBCASE("c_dagger is the minimum of the per-start-state values and never negative") {
    const LinearMdp lr = make_lowrank_mdp(6, 3, 3, 0.9, 1.0, 12);
    const auto sol = solve_optimal(lr);
    const auto d = sample_dataset(lr, Policy::uniform(6, 3), 200, 100, true, 3);
    const auto rep = coverage_coefficient(d, lr, sol.policy);
    CHECK(rep.c_dagger == doctest::Approx(std::max(0.0, rep.per_start_state_values.minCoeff())));
    CHECK(rep.c_dagger >= 0.0);
    CHECK((rep.gram - empirical_second_moment(d, lr.features())).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("extra pi*-distributed data does not lower C in 95% of trials") {
    int ok = 0;
    for (std::uint64_t i = 0; i < 40; ++i) {
      const LinearMdp lr = make_lowrank_mdp(5, 3, 3, 0.9, 1.0, 100 + i);
      const auto sol = solve_optimal(lr);
      const auto base = sample_dataset(lr, Policy::uniform(5, 3), 200, 100, true, i);
      const auto extra = sample_dataset(lr, sol.policy, 200, 100, true, 1000 + i);
      const double before = coverage_coefficient(base, lr, sol.policy).c_dagger;
      const double after = coverage_coefficient(mix_datasets(base, extra), lr, sol.policy).c_dagger;
      ok += after >= before - 1e-12;
    }
    CHECK(ok >= 38);
  }
}

TEST_CASE("JSON-lines I/O") {
  testing::TempDir tmp("datagen");
  const LinearMdp mdp = make_tabular_mdp(4, 2, 0.9, 1.0, 1);
  SUBCASE("round trip, labeled and unlabeled, with sidecar") {
    const auto d = sample_dataset(mdp, Policy::uniform(4, 2), 100, 100, true, 1, 0.1);
    write_jsonl(tmp.file("a.jsonl"), d);
    write_dataset_header(tmp.file("a.jsonl"), mdp, d, 1);
    const auto back = read_jsonl(tmp.file("a.jsonl"));
    CHECK(back.transitions == d.transitions);
    CHECK(back.labeled);
    const auto meta = nlohmann::json::parse(testing::slurp(tmp.file("a.jsonl.meta.json")));
    CHECK(meta.at("mdp_hash") == mdp_hash(mdp));
    CHECK(meta.at("n") == 100);
    CHECK(meta.at("labeled") == true);

    const auto u = strip_rewards(d);
    write_jsonl(tmp.file("u.jsonl"), u);
    const auto ub = read_jsonl(tmp.file("u.jsonl"));
    CHECK_FALSE(ub.labeled);
    CHECK(testing::slurp(tmp.file("u.jsonl")).find("\"r\":null") != std::string::npos);
  }
  SUBCASE("malformed lines name the line number") {
    testing::spit(tmp.file("bad.jsonl"),
                  "{\"s\":0,\"a\":1,\"r\":0.5,\"sp\":2}\n{\"s\":0,\"a\":1,\"r\":0.5,\"sp\":2}\n{\"s\":0,\"a\":\n");
    try {
      read_jsonl(tmp.file("bad.jsonl"));
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    testing::spit(tmp.file("extra.jsonl"), "{\"s\":0,\"a\":1,\"r\":0.5,\"sp\":2,\"x\":1}\n");
    CHECK_THROWS_AS(read_jsonl(tmp.file("extra.jsonl")), ValidationError);
    testing::spit(tmp.file("neg.jsonl"), "{\"s\":-1,\"a\":1,\"r\":0.5,\"sp\":2}\n");
    CHECK_THROWS_AS(read_jsonl(tmp.file("neg.jsonl")), ValidationError);
  }
}

TEST_CASE("exhaustive_dataset reproduces the kernel") {
  const LinearMdp mdp = make_grid_tabular_mdp(4, 3, 50, 0.9, 1.0, 2);
  const auto d = exhaustive_dataset(mdp, 50);
  CHECK(d.size() == 4u * 3u * 50u);
  Matrix counts = Matrix::Zero(12, 4);
  for (const auto& t : d.transitions) counts(t.state * 3 + t.action, t.next_state) += 1.0;
  CHECK((counts / 50.0 - mdp.transitions()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(exhaustive_dataset(make_tabular_mdp(3, 2, 0.9, 1.0, 1), 7), ParameterError);
}

}  // TEST_SUITE
