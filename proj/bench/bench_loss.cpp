#include "softrod/experiment.hpp"
#include "softrod/shooting.hpp"
#include "softrod/training.hpp"

#include <benchmark/benchmark.h>

using namespace softrod;

namespace {

struct Fixture {
  Dataset data;
  RodParams knowledge;
  MlpModel model;
  TrainConfig cfg;

  Fixture() {
    const ExperimentConfig e = default_experiment(Imperfection::NoSelfWeight);
    RolloutOptions opt;
    opt.solver = e.solver;
    std::vector<Trajectory> trajs;
    for (const ControlSchedule& c : e.train_controls) trajs.push_back(rollout(e.truth, c, 30, opt));
    data = make_dataset(trajs);
    knowledge = make_imperfect(e.truth, e.variant);
    model = MlpModel::initialized(29, kHiddenDim, kResidualDim, true, 0);
    cfg.weight_decay = 1e-4;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_LossGradBatched(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(f.model, f.data, f.knowledge, f.cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.samples.size()));
}

void BM_LossGradSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(loss_and_grad_serial(f.model, f.data, f.knowledge, f.cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.samples.size()));
}

void BM_Rollout(benchmark::State& state) {
  const RodParams P = RodParams::defaults();
  const ControlSchedule c = sine_controls(6.0, 1.0, 1.5, 20, P.dt, 4);
  RolloutOptions opt;
  opt.solver.integrator = state.range(0) ? SpatialIntegrator::Rk4 : SpatialIntegrator::Euler;
  for (auto _ : state) benchmark::DoNotOptimize(rollout(P, c, 20, opt));
}

}  // namespace

BENCHMARK(BM_LossGradBatched)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rollout)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
