#include <benchmark/benchmark.h>

#include <random>

#include "formation/estimator.hpp"
#include "formation/fisher.hpp"
#include "formation/formation_opt.hpp"
#include "formation/presets.hpp"

using namespace formation;

namespace {

Vector tangent(GroupMode mode) {
  return Vector::LinSpaced(tangent_dim(mode), 0.3, -0.9);
}

void BM_ExpLog(benchmark::State& state) {
  const auto mode = static_cast<GroupMode>(state.range(0));
  const Vector xi = tangent(mode);
  for (auto _ : state) benchmark::DoNotOptimize(log_map(mode, exp_map(mode, xi)));
  state.SetLabel(to_string(mode));
}
BENCHMARK(BM_ExpLog)->Arg(static_cast<int>(GroupMode::SE2))->Arg(static_cast<int>(GroupMode::SE3))
    ->Arg(static_cast<int>(GroupMode::SE3Heading));

void BM_StackJacobian(benchmark::State& state, const char* preset) {
  const Scenario s = make_preset(preset);
  const MeasurementModel model(s);
  for (auto _ : state) benchmark::DoNotOptimize(model.stack_jacobian(s.initial_state));
}
BENCHMARK_CAPTURE(BM_StackJacobian, triangle3, "triangle3");
BENCHMARK_CAPTURE(BM_StackJacobian, ten, "ten");

void BM_EstimationCost(benchmark::State& state, const char* preset) {
  const Scenario s = make_preset(preset);
  const MeasurementModel model(s);
  for (auto _ : state) benchmark::DoNotOptimize(j_est(s.initial_state, model));
}
BENCHMARK_CAPTURE(BM_EstimationCost, triangle3, "triangle3");
BENCHMARK_CAPTURE(BM_EstimationCost, ten, "ten");

void BM_Gradient(benchmark::State& state, const char* preset) {
  const Scenario s = make_preset(preset);
  for (auto _ : state) benchmark::DoNotOptimize(gradient(s.initial_state, s));
}
BENCHMARK_CAPTURE(BM_Gradient, triangle3, "triangle3");
BENCHMARK_CAPTURE(BM_Gradient, ten, "ten")->Unit(benchmark::kMillisecond);

void BM_GaussNewton(benchmark::State& state) {
  const Scenario s = make_preset("triangle3");
  const MeasurementModel model(s);
  std::mt19937_64 rng(1);
  for (auto _ : state) {
    state.PauseTiming();
    const TrialInput in = draw_trial(s.initial_state, model, 0.08, 0.5, rng);
    state.ResumeTiming();
    try {
      benchmark::DoNotOptimize(gauss_newton(in.measurements, model, in.prior, in.initial));
    } catch (const Error&) {
    }
  }
}
BENCHMARK(BM_GaussNewton)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
