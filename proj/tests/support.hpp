#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pdslab/linmdp.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pdslab_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

// One state, actions with one-hot features and the given rewards (all < 1).
inline pdslab::LinearMdp bandit(const std::vector<double>& rewards, double gamma) {
  const int a = static_cast<int>(rewards.size());
  pdslab::FeatureMap f(1, a, pdslab::Matrix::Identity(a, a));
  pdslab::Matrix mu = pdslab::Matrix::Ones(a, 1);
  pdslab::Vector theta = Eigen::Map<const pdslab::Vector>(rewards.data(), a);
  return pdslab::LinearMdp(std::move(f), std::move(mu), std::move(theta), gamma, 1.0,
                           pdslab::Vector::Ones(1));
}

// Plain fixed-point policy evaluation run to a 1e-13 residual.
inline pdslab::Vector iterate_policy_values(const pdslab::LinearMdp& mdp, const pdslab::Policy& pi) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  pdslab::Vector v = pdslab::Vector::Zero(S);
  for (int it = 0; it < 200000; ++it) {
    pdslab::Vector next(S);
    for (int s = 0; s < S; ++s) {
      double acc = 0.0;
      for (int a = 0; a < A; ++a) {
        const int k = s * A + a;
        acc += pi.prob(s, a) * (mdp.rewards()(k) + mdp.gamma() * mdp.transitions().row(k).dot(v));
      }
      next(s) = acc;
    }
    const double diff = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (diff < 1e-13) break;
  }
  return v;
}

}  // namespace testing
