// Serial reference kernels vs their OpenMP counterparts, plus a full PEVI solve.
// Sizes are chosen so the parallel path has something to split.

#include <benchmark/benchmark.h>

#include "pdslab/datagen.hpp"
#include "pdslab/kernels.hpp"
#include "pdslab/pevi.hpp"
#include "pdslab/util.hpp"

using namespace pdslab;
namespace k = pdslab::kernels;

namespace {

struct Fixture {
  LinearMdp mdp;
  OfflineDataset data;
  Eigen::LLT<Matrix> llt;
  k::PairStatistics stats;
  Vector v, w, bonus;

  Fixture(int states, int actions, int dim, std::size_t n)
      : mdp(make_lowrank_mdp(states, actions, dim, 0.9, 1.0, 7)),
        data(sample_dataset(mdp, Policy::uniform(states, actions), n, 100, true, 11, 0.1)) {
    llt.compute(k::gram_serial(mdp.features(), data.transitions) + Matrix::Identity(dim, dim));
    stats = k::pair_statistics(mdp.features(), data.transitions);
    Rng rng(3);
    v.resize(states);
    for (int s = 0; s < states; ++s) v(s) = rng.uniform(0.0, 10.0);
    w.resize(dim);
    for (int i = 0; i < dim; ++i) w(i) = rng.uniform(-1.0, 5.0);
    bonus = k::bonus_serial(mdp.features(), llt, 1.0);
  }
};

const Fixture& fixture() {
  static const Fixture f(2000, 8, 16, 200000);
  return f;
}

void BM_GramSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::gram_serial(f.mdp.features(), f.data.transitions));
}
void BM_GramParallel(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::gram_parallel(f.mdp.features(), f.data.transitions));
}

void BM_TargetsSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::bellman_targets_serial(f.stats, f.v, 0.9));
}
void BM_TargetsParallel(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::bellman_targets_parallel(f.stats, f.v, 0.9));
}

void BM_BonusSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::bonus_serial(f.mdp.features(), f.llt, 1.0));
}
void BM_BonusParallel(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::bonus_parallel(f.mdp.features(), f.llt, 1.0));
}

void BM_GreedySerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::pessimistic_greedy_serial(f.mdp.features(), f.w, f.bonus, 10.0));
}
void BM_GreedyParallel(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(k::pessimistic_greedy_parallel(f.mdp.features(), f.w, f.bonus, 10.0));
}

void BM_Pevi(benchmark::State& st) {
  const auto& f = fixture();
  auto cfg = PeviConfig::defaults(0.9, 1.0, 0.5);
  cfg.parallel = st.range(0) != 0;
  for (auto _ : st) benchmark::DoNotOptimize(pevi_solve(f.data, f.mdp.features(), cfg));
}

}  // namespace

BENCHMARK(BM_GramSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TargetsSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TargetsParallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_BonusSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BonusParallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_GreedySerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GreedyParallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_Pevi)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
