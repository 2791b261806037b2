#include "pdslab/theory.hpp"

#include <cmath>
#include <limits>

#include "pdslab/util.hpp"

namespace pdslab {

void BoundInputs::validate() const {
  if (d < 1) throw ParameterError("bound: d must be positive");
  if (n0 < 1) throw ParameterError("bound: n0 must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("bound: delta must lie in (0,1)");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("bound: gamma must lie in [0,1)");
  if (!(c0_dagger >= 0.0 && c1_dagger >= 0.0)) throw ParameterError("bound: coverage must be >= 0");
  if (!(r_max > 0.0 && c > 0.0)) throw ParameterError("bound: r_max and c must be positive");
}

double zeta1(const BoundInputs& in) {
  const double n = static_cast<double>(in.n0 + in.n1);
  return std::log(4.0 * in.d * n / ((1.0 - in.gamma) * in.delta));
}

double zeta2(const BoundInputs& in) {
  return std::log(2.0 * in.d * static_cast<double>(in.n0) / in.delta);
}

BoundTerms pds_bound(const BoundInputs& in) {
  in.validate();
  BoundTerms out;
  const double d = in.d;
  const double labeled_mass = static_cast<double>(in.n0) * in.c0_dagger;
  const double total_mass = labeled_mass + static_cast<double>(in.n1) * in.c1_dagger;
  const double one_minus = 1.0 - in.gamma;
  if (!(labeled_mass > 0.0)) {
    const double inf = std::numeric_limits<double>::infinity();
    out.reward_term = inf;
    out.offline_term = total_mass > 0.0
                           ? 2.0 * in.c * in.r_max / (one_minus * one_minus) *
                                 std::sqrt(d * d * d * zeta1(in) / total_mass)
                           : inf;
    out.total = inf;
    out.finite = false;
    out.note = "N0 * C0 = 0: the labeled data does not cover the optimal policy";
    return out;
  }
  out.offline_term = 2.0 * in.c * in.r_max / (one_minus * one_minus) *
                     std::sqrt(d * d * d * zeta1(in) / total_mass);
  out.reward_term = 4.0 * in.r_max / one_minus * std::sqrt(d * d * zeta2(in) / labeled_mass);
  out.total = out.offline_term + out.reward_term;
  return out;
}

SbrValue sbr(const BoundInputs& in) {
  in.validate();
  SbrValue out;
  const double labeled_mass = static_cast<double>(in.n0) * in.c0_dagger;
  const double total_mass = labeled_mass + static_cast<double>(in.n1) * in.c1_dagger;
  out.finite_sample_term = in.n1 == 0 ? 1.0 : std::sqrt(labeled_mass / total_mass);
  out.asymptotic_term = 2.0 * (1.0 - in.gamma) / (in.c * std::sqrt(static_cast<double>(in.d)));
  out.approx = out.finite_sample_term + out.asymptotic_term;
  BoundInputs alone = in;
  alone.n1 = 0;
  out.exact = pds_bound(in).total / pds_bound(alone).total;
  return out;
}

double uds_bias(const OfflineDataset& d1_true_rewards, std::size_t n0) {
  const std::size_t n1 = d1_true_rewards.size();
  if (n1 == 0) return 0.0;
  double total = 0.0;
  for (const auto& t : d1_true_rewards.transitions) {
    if (!t.reward) throw ContractError("uds_bias: the unlabeled set needs its true rewards");
    total += std::abs(*t.reward);
  }
  const double mean_abs = total / static_cast<double>(n1);
  return static_cast<double>(n1) / static_cast<double>(n0 + n1) * mean_abs;
}

BoundInputs bound_inputs_for(const RunResult& run, double r_max, double delta, double c) {
  BoundInputs in;
  in.d = run.d;
  in.n0 = run.n0;
  in.n1 = run.n1;
  in.c0_dagger = run.c0_dagger;
  in.c1_dagger = run.c1_dagger;
  in.gamma = run.gamma;
  in.r_max = r_max;
  in.delta = delta;
  in.c = c;
  return in;
}

double bound_holds_rate(std::span<const RunResult> runs, std::span<const BoundInputs> inputs) {
  if (runs.size() != inputs.size()) throw ParameterError("bound_holds_rate: size mismatch");
  if (runs.empty()) throw ParameterError("bound_holds_rate: no runs");
  std::size_t held = 0;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i].subopt_max <= pds_bound(inputs[i]).total) ++held;
  return static_cast<double>(held) / static_cast<double>(runs.size());
}

}  // namespace pdslab
