#include <benchmark/benchmark.h>

#include "sddectl/car_following.hpp"
#include "sddectl/controllers.hpp"
#include "sddectl/simulate.hpp"
#include "sddectl/verification.hpp"

using namespace sddectl;

namespace {

CarFollowingScenario bench_scenario() {
  return preset(PresetFamily::Fig1InitialStates, 4);
}

void BM_EmStep(benchmark::State& state) {
  const CarFollowingScenario scenario = bench_scenario();
  HistorySegment buffer = HistorySegment::constant(
      scenario.params.delay, scenario.params.dt, scenario.params.initial_state);
  const Vec u = Vec::Zero(1);
  const Vec dw = Vec::Zero(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        em_step(scenario.model, buffer, u, scenario.params.dt, dw));
  }
}
BENCHMARK(BM_EmStep);

void BM_LyapunovEval(benchmark::State& state) {
  const CarFollowingScenario scenario = bench_scenario();
  const HistorySegment buffer = HistorySegment::constant(
      scenario.params.delay, scenario.params.dt, scenario.params.initial_state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scenario.sclkf.functional->value(buffer));
  }
}
BENCHMARK(BM_LyapunovEval);

void BM_SlidingControl(benchmark::State& state) {
  const CarFollowingScenario scenario = bench_scenario();
  const HistorySegment buffer = HistorySegment::constant(
      scenario.params.delay, scenario.params.dt, scenario.params.initial_state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sliding_control(scenario.controller, buffer));
  }
}
BENCHMARK(BM_SlidingControl);

void BM_SimulateSecond(benchmark::State& state) {
  const CarFollowingScenario scenario = bench_scenario();
  const Controller controller = [&](const HistorySegment& phi) {
    return sliding_control(scenario.controller, phi);
  };
  for (auto _ : state) {
    SimulationTrace trace =
        simulate(scenario.model, controller, scenario.initializer(),
                 scenario.params.delay, 1.0, scenario.params.dt, 42);
    benchmark::DoNotOptimize(trace.states.back());
  }
}
BENCHMARK(BM_SimulateSecond)->Unit(benchmark::kMillisecond);

void BM_IdentitySuite100(benchmark::State& state) {
  const CarFollowingScenario scenario = bench_scenario();
  IdentityBundle bundle{scenario.model, scenario.sclkf,
                        scenario.params.sontag_lambda, 1e-12, scenario.controller};
  const auto sampler = interior_buffer_sampler(scenario, 99);
  for (auto _ : state) {
    benchmark::DoNotOptimize(identity_suite(bundle, sampler, 100));
  }
}
BENCHMARK(BM_IdentitySuite100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
