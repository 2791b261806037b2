#pragma once

// Closed-form suboptimality bound for pessimistic data sharing, the bound
// ratio against no sharing, and the reward bias of zero-relabeling.

#include <span>
#include <string>

#include "pdslab/datagen.hpp"
#include "pdslab/pipeline.hpp"

namespace pdslab {

struct BoundInputs {
  int d = 1;
  std::size_t n0 = 1;
  std::size_t n1 = 0;
  double c0_dagger = 1.0;
  double c1_dagger = 0.0;
  double gamma = 0.9;
  double r_max = 1.0;
  double delta = 0.1;
  double c = 1.0;

  void validate() const;
};

/// log(4 d (N0+N1) / ((1-gamma) delta))
double zeta1(const BoundInputs& in);
/// log(2 d N0 / delta)
double zeta2(const BoundInputs& in);

struct BoundTerms {
  double total = 0.0;
  double offline_term = 0.0;  // 2c r_max/(1-gamma)^2 sqrt(d^3 zeta1/(N0C0+N1C1))
  double reward_term = 0.0;   // 4 r_max/(1-gamma) sqrt(d^2 zeta2/(N0C0))
  bool finite = true;
  std::string note;  // set when the bound is vacuous
};

/// Infinite terms (finite = false) when N0*C0 = 0.
BoundTerms pds_bound(const BoundInputs& in);

struct SbrValue {
  double finite_sample_term = 0.0;  // sqrt(N0C0 / (N0C0 + N1C1))
  double asymptotic_term = 0.0;     // 2(1-gamma)/(c sqrt(d))
  double approx = 0.0;              // sum of the two
  double exact = 0.0;               // pds_bound(in) / pds_bound(in with N1 = 0)
};

SbrValue sbr(const BoundInputs& in);

/// N1/(N0+N1) * mean |r| over d1, where d1 carries its true rewards.
double uds_bias(const OfflineDataset& d1_true_rewards, std::size_t n0);

/// Bound inputs matching a finished run (its measured coverage and sizes).
BoundInputs bound_inputs_for(const RunResult& run, double r_max, double delta, double c);

/// Fraction of runs with subopt_max <= pds_bound(inputs).total.
double bound_holds_rate(std::span<const RunResult> runs, std::span<const BoundInputs> inputs);

}  // namespace pdslab
