// Serial vs OpenMP restarts for the multistart searches and paired runs.

#include <benchmark/benchmark.h>

#include <random>

#include "cubic_observer/cert.hpp"
#include "cubic_observer/design_uio.hpp"
#include "cubic_observer/model.hpp"
#include "cubic_observer/sim.hpp"

using namespace cubic_observer;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::Serial : ExecPolicy::Parallel;
}

void BM_SearchP(benchmark::State& state) {
  const auto ex = example_system();
  cert::SearchOptions opts;
  opts.policy = policy_of(state);
  for (auto _ : state) {
    auto c = cert::search_P(ex.lipschitz, ex.observer.G, ex.observer.E, ex.nominal.C, opts);
    benchmark::DoNotOptimize(c.P.data());
  }
}

void BM_StabilizeL(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Mat A(4, 4);
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    A.data()[i] = normal(rng);
  }
  A += 2.0 * Mat::Identity(4, 4);
  Mat C(2, 4);
  for (Eigen::Index i = 0; i < C.size(); ++i) {
    C.data()[i] = normal(rng);
  }
  design::StabilizeOptions opts;
  opts.policy = policy_of(state);
  for (auto _ : state) {
    Mat L = design::stabilize_L(Mat::Identity(4, 4), A, C, 1.0, opts);
    benchmark::DoNotOptimize(L.data());
  }
}

void BM_Equilibrium(benchmark::State& state) {
  const auto ex = example_system();
  cert::EquilibriumOptions opts;
  opts.policy = policy_of(state);
  for (auto _ : state) {
    auto v = cert::check_equilibrium_uniqueness(ex.observer.G, ex.observer.N, ex.nominal.C,
                                                ex.observer.theta, opts);
    benchmark::DoNotOptimize(v);
  }
}

void BM_PairedSims(benchmark::State& state) {
  for (auto _ : state) {
    auto rep = sim::reproduce_example({}, policy_of(state));
    benchmark::DoNotOptimize(rep.uncertain.ratio);
  }
}

}  // namespace

BENCHMARK(BM_SearchP)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StabilizeL)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Equilibrium)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PairedSims)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
