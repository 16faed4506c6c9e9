#include <benchmark/benchmark.h>

#include "drate/kernel.hpp"
#include "drate/parametric.hpp"
#include "drate/simulation.hpp"

using namespace drate;

namespace {

const Scenario& scenario() {
  static const Scenario s([] {
    ScenarioConfig c;
    c.ps_misspec.kind = MisspecKind::Global;
    c.or_misspec.kind = MisspecKind::Global;
    return c;
  }());
  return s;
}

void BM_LogisticFit(benchmark::State& state) {
  const auto draw = scenario().draw(0, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_logistic(draw.data).beta_hat);
}
BENCHMARK(BM_LogisticFit)->Arg(1000)->Arg(10000);

void BM_NonparInSample(benchmark::State& state) {
  const auto draw = scenario().draw(0, state.range(0));
  const double h = resolve_bandwidth(KernelConfig{KernelRole::RegressionMultivariate},
                                     multivariate_scale(draw.data.covariates()), draw.data.size(),
                                     draw.data.dimension());
  const auto fit = NonparFit::regression(draw.data, Arm::Treated, h);
  for (auto _ : state) {
    const auto k = InSampleKernel::multivariate(draw.data.covariates(), h);
    benchmark::DoNotOptimize(fit.predict_in_sample(k));
  }
}
BENCHMARK(BM_NonparInSample)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Replicate(benchmark::State& state) {
  const auto& s = scenario();
  const auto estimators = s.estimators();
  const auto options = s.estimation_options();
  Index rep = 0;
  for (auto _ : state) {
    const auto draw = s.draw(rep++);
    benchmark::DoNotOptimize(dr_estimate_sweep(draw.data, estimators, options));
  }
}
BENCHMARK(BM_Replicate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
