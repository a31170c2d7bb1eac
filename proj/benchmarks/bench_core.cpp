#include <benchmark/benchmark.h>

#include "rcmps/energy.hpp"
#include "rcmps/gradient.hpp"
#include "rcmps/state.hpp"
#include "rcmps/transfer.hpp"

namespace {

void BM_apply_T(benchmark::State& st) {
  const int D = static_cast<int>(st.range(0));
  rcmps::Rcmps s = rcmps::random_init(D, 0.4, 5);
  rcmps::CMat M = rcmps::CMat::Identity(D, D);
  for (auto _ : st) benchmark::DoNotOptimize(rcmps::apply_T(s, M));
}
BENCHMARK(BM_apply_T)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_fixed_point(benchmark::State& st) {
  const int D = static_cast<int>(st.range(0));
  rcmps::Rcmps s = rcmps::random_init(D, 0.4, 5);
  for (auto _ : st) benchmark::DoNotOptimize(rcmps::right_fixed_point(s));
}
BENCHMARK(BM_fixed_point)->Arg(2)->Arg(4)->Arg(8)->Arg(12);

void BM_energy(benchmark::State& st) {
  const int D = static_cast<int>(st.range(0));
  rcmps::Rcmps s = rcmps::random_init(D, 0.4, 5);
  rcmps::ModelParams p{1.0, 1.0};
  for (auto _ : st)
    benchmark::DoNotOptimize(rcmps::energy_density(s, p).total);
}
BENCHMARK(BM_energy)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_gradient(benchmark::State& st) {
  const int D = static_cast<int>(st.range(0));
  rcmps::Rcmps s = rcmps::random_init(D, 0.4, 5);
  rcmps::ModelParams p{1.0, 1.0};
  for (auto _ : st) {
    rcmps::Gradient grad = rcmps::energy_gradient(s, p);
    benchmark::DoNotOptimize(grad.dR);
  }
}
BENCHMARK(BM_gradient)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
