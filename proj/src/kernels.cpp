#include "pdslab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "pdslab/util.hpp"

namespace pdslab::kernels {

namespace {

void accumulate_chunk(const FeatureMap& features, std::span<const Transition> data, Matrix& out) {
  for (const auto& t : data) {
    const auto phi = features.phi(t.state, t.action);
    out.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  }
}

Matrix symmetrize_lower(Matrix m) {
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose().triangularView<Eigen::StrictlyUpper>();
  return m;
}

void check_pairs(const FeatureMap& features, std::span<const Transition> data) {
  for (const auto& t : data) {
    if (!features.contains(t.state, t.action))
      throw ParameterError("transition (" + std::to_string(t.state) + "," +
                           std::to_string(t.action) + ") outside the feature table");
    if (t.next_state < 0 || t.next_state >= features.num_states())
      throw ParameterError("next_state out of range: " + std::to_string(t.next_state));
  }
}

}  // namespace

int thread_cap() {
  if (const char* env = std::getenv("PDSLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;
}

Matrix gram_serial(const FeatureMap& features, std::span<const Transition> data) {
  check_pairs(features, data);
  const int d = features.dim();
  Matrix g = Matrix::Zero(d, d);
  accumulate_chunk(features, data, g);
  return symmetrize_lower(std::move(g));
}

Matrix gram_parallel(const FeatureMap& features, std::span<const Transition> data) {
  check_pairs(features, data);
  const int d = features.dim();
  const std::size_t chunks = (data.size() + kReductionChunk - 1) / kReductionChunk;
  std::vector<Matrix> partial(chunks, Matrix::Zero(d, d));
  const int cap = thread_cap();
#pragma omp parallel for schedule(static) num_threads(cap > 0 ? cap : omp_get_max_threads())
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReductionChunk;
    const std::size_t len = std::min(kReductionChunk, data.size() - begin);
    accumulate_chunk(features, data.subspan(begin, len), partial[static_cast<std::size_t>(c)]);
  }
  Matrix g = Matrix::Zero(d, d);
  for (const auto& p : partial) g += p;
  return symmetrize_lower(std::move(g));
}

PairStatistics pair_statistics(const FeatureMap& features, std::span<const Transition> data) {
  check_pairs(features, data);
  const int pairs = features.num_pairs();
  PairStatistics st;
  st.num_states = features.num_states();
  st.counts.assign(static_cast<std::size_t>(pairs), 0.0);
  st.reward_sums.assign(static_cast<std::size_t>(pairs), 0.0);
  // Bucket next states per pair, then compress; order within a row is by state id.
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(pairs));
  for (const auto& t : data) {
    if (!t.reward) throw ContractError("pair_statistics: transition without a reward");
    const auto k = static_cast<std::size_t>(features.pair_index(t.state, t.action));
    st.counts[k] += 1.0;
    st.reward_sums[k] += *t.reward;
    rows[k].emplace_back(t.next_state, 1.0);
  }
  st.row_offsets.assign(1, 0);
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t i = 0; i < row.size();) {
      std::size_t j = i;
      double c = 0.0;
      while (j < row.size() && row[j].first == row[i].first) c += row[j++].second;
      st.next_states.push_back(row[i].first);
      st.next_counts.push_back(c);
      i = j;
    }
    st.row_offsets.push_back(st.next_states.size());
  }
  return st;
}

namespace {

inline double pair_target(const PairStatistics& st, std::size_t k, const Vector& v, double gamma) {
  double next = 0.0;
  for (std::size_t i = st.row_offsets[k]; i < st.row_offsets[k + 1]; ++i)
    next += st.next_counts[i] * v(st.next_states[i]);
  return st.reward_sums[k] + gamma * next;
}

inline double pair_bonus(const FeatureMap& features, const Eigen::LLT<Matrix>& lambda,
                         double beta, Eigen::Index k) {
  const Vector phi = features.matrix().row(k).transpose();
  const Vector x = lambda.matrixL().solve(phi);
  return beta * x.norm();
}

inline void greedy_state(const FeatureMap& features, const Vector& w, const Vector& bonus,
                         double v_max, int s, GreedyResult& out) {
  const int A = features.num_actions();
  int best = 0;
  for (int a = 0; a < A; ++a) {
    const int k = features.pair_index(s, a);
    const double raw = features.matrix().row(k).dot(w) - bonus(k);
    out.q(s, a) = std::clamp(raw, 0.0, v_max);
    if (out.q(s, a) > out.q(s, best)) best = a;
  }
  out.v(s) = out.q(s, best);
  out.actions[static_cast<std::size_t>(s)] = best;
}

GreedyResult make_greedy(const FeatureMap& features) {
  GreedyResult out;
  out.q = Matrix::Zero(features.num_states(), features.num_actions());
  out.v = Vector::Zero(features.num_states());
  out.actions.assign(static_cast<std::size_t>(features.num_states()), 0);
  return out;
}

}  // namespace

Vector bellman_targets_serial(const PairStatistics& stats, const Vector& v, double gamma) {
  const std::size_t pairs = stats.counts.size();
  Vector y(static_cast<Eigen::Index>(pairs));
  for (std::size_t k = 0; k < pairs; ++k) y(static_cast<Eigen::Index>(k)) = pair_target(stats, k, v, gamma);
  return y;
}

Vector bellman_targets_parallel(const PairStatistics& stats, const Vector& v, double gamma) {
  const auto pairs = static_cast<std::ptrdiff_t>(stats.counts.size());
  Vector y(pairs);
  const int cap = thread_cap();
#pragma omp parallel for schedule(static) num_threads(cap > 0 ? cap : omp_get_max_threads())
  for (std::ptrdiff_t k = 0; k < pairs; ++k)
    y(k) = pair_target(stats, static_cast<std::size_t>(k), v, gamma);
  return y;
}

Vector bonus_serial(const FeatureMap& features, const Eigen::LLT<Matrix>& lambda, double beta) {
  Vector out(features.num_pairs());
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = pair_bonus(features, lambda, beta, k);
  return out;
}

Vector bonus_parallel(const FeatureMap& features, const Eigen::LLT<Matrix>& lambda, double beta) {
  Vector out(features.num_pairs());
  const int cap = thread_cap();
#pragma omp parallel for schedule(static) num_threads(cap > 0 ? cap : omp_get_max_threads())
  for (Eigen::Index k = 0; k < out.size(); ++k) out(k) = pair_bonus(features, lambda, beta, k);
  return out;
}

GreedyResult pessimistic_greedy_serial(const FeatureMap& features, const Vector& w,
                                       const Vector& bonus, double v_max) {
  GreedyResult out = make_greedy(features);
  for (int s = 0; s < features.num_states(); ++s) greedy_state(features, w, bonus, v_max, s, out);
  return out;
}

GreedyResult pessimistic_greedy_parallel(const FeatureMap& features, const Vector& w,
                                         const Vector& bonus, double v_max) {
  GreedyResult out = make_greedy(features);
  const int cap = thread_cap();
#pragma omp parallel for schedule(static) num_threads(cap > 0 ? cap : omp_get_max_threads())
  for (int s = 0; s < features.num_states(); ++s) greedy_state(features, w, bonus, v_max, s, out);
  return out;
}

}  // namespace pdslab::kernels
