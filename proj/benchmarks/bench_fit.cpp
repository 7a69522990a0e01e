#include <benchmark/benchmark.h>

#include <cmath>

#include "semprobe/machine_observer.hpp"
#include "semprobe/pipeline.hpp"
#include "semprobe/psychometric.hpp"
#include "semprobe/softmax_io.hpp"

using namespace semprobe;

namespace {

ResponseCurve analytic_curve(std::uint64_t n) {
  ResponseCurve curve{"b", ObserverKind::machine, "duck-rabbit", 7.5, {}};
  for (double alpha : {0.3, 0.4, 0.5, 0.6, 0.7}) {
    double p = logistic_p(alpha, 0.47, 6.0);
    curve.points.push_back({alpha, static_cast<std::uint64_t>(std::llround(p * n)), n});
  }
  return curve;
}

std::vector<machine::SoftmaxRecord> synthetic_records(int n_seeds) {
  std::vector<machine::SoftmaxRecord> out;
  for (double gs : {2.5, 5.0, 7.5, 10.0, 12.5, 15.0}) {
    for (double alpha : {0.3, 0.4, 0.5, 0.6, 0.7}) {
      for (int seed = 0; seed < n_seeds; ++seed) {
        double p = logistic_p(alpha, 0.55, 5.0);
        out.push_back({machine::image_ref_for("duck-rabbit", gs, alpha, seed), "m",
                       {{97, 1 - p}, {98, 1 - p}, {330, p}, {331, p}, {332, p}}});
      }
    }
  }
  return out;
}

}  // namespace

static void BM_FitFixedLambda(benchmark::State& state) {
  auto curve = analytic_curve(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_psychometric(curve));
}
BENCHMARK(BM_FitFixedLambda)->Arg(10)->Arg(10000);

static void BM_FitFreeLambda(benchmark::State& state) {
  auto curve = analytic_curve(100);
  FitConfig config;
  config.lambda_mode = LambdaMode::free;
  for (auto _ : state) benchmark::DoNotOptimize(fit_psychometric(curve, config));
}
BENCHMARK(BM_FitFreeLambda);

static void BM_CategoryProbability(benchmark::State& state) {
  auto labels = machine::LabelMap::imagenet_animals();
  machine::SoftmaxRecord record{"x.png", "m", {{97, 0.05}, {98, 0.15}, {330, 0.3}, {331, 0.2}, {332, 0.1}}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(machine::category_probability(record, labels, {"duck", "rabbit"}));
  }
}
BENCHMARK(BM_CategoryProbability);

static void BM_SimulateAndFit(benchmark::State& state) {
  auto records = synthetic_records(10);
  auto labels = machine::LabelMap::imagenet_animals();
  analysis::SimulateOptions sim;
  sim.pair = {"duck", "rabbit"};
  sim.trials = {1, 1};
  analysis::FitOptions fit;
  fit.threads = static_cast<int>(state.range(0));
  sim.threads = fit.threads;
  for (auto _ : state) {
    auto log = analysis::simulate(records, labels, sim).log;
    benchmark::DoNotOptimize(analysis::fit_log(log, fit));
  }
}
BENCHMARK(BM_SimulateAndFit)->Arg(1)->Arg(4);
BENCHMARK_MAIN();
