#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hlgp/checkpoint.hpp"
#include "hlgp/sparsity.hpp"
#include "hlgp/train.hpp"

using namespace hlgp;

namespace {

CellSpec bench_spec(CellKind kind, std::size_t width, std::size_t hidden) {
  CellSpec s;
  s.kind = kind;
  s.input_width = 8;
  s.cell_width = width;
  if (hidden > 0) s.hidden_layer_widths = {hidden};
  s.io_dropout = 0.0;
  s.hidden_dropout = 0.0;
  return s;
}

std::vector<Vector> sequence(std::size_t steps, std::size_t width) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vector> xs(steps, Vector(width));
  for (auto& x : xs) {
    for (double& v : x) v = n(rng);
  }
  return xs;
}

Sample regression(std::size_t steps) {
  Sample s;
  s.inputs = sequence(steps, 8);
  s.targets.push_back(Target{steps - 1, {0.5}, 0});
  return s;
}

void BM_Forward(benchmark::State& state) {
  const auto kind = static_cast<CellKind>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  const Model m = Model::build(bench_spec(kind, width, kind == CellKind::kHlstm ? width : 0), 1, rng);
  const auto xs = sequence(30, 8);
  for (auto _ : state) benchmark::DoNotOptimize(predict(m, xs));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Forward)
    ->ArgsProduct({{static_cast<long>(CellKind::kHlstm), static_cast<long>(CellKind::kLstm),
                    static_cast<long>(CellKind::kGru)},
                   {16, 32, 64}})
    ->Unit(benchmark::kMicrosecond);

void BM_SampleGradients(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Model m = Model::build(bench_spec(CellKind::kHlstm, width, width), 1, rng);
  const Sample s = regression(30);
  for (auto _ : state) benchmark::DoNotOptimize(sample_gradients(m, s, MetricKind::kMse));
}
BENCHMARK(BM_SampleGradients)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_TrainEpochAdding(benchmark::State& state) {
  TaskConfig tc;
  tc.length = 30;
  tc.train_size = 64;
  tc.eval_size = 8;
  const TaskData data = make_task(tc);
  PipelineConfig pc;
  pc.cell = bench_spec(CellKind::kHlstm, 32, 32);
  pc.cell.input_width = 2;
  pc.schedule.seed_sparsity = 0.5;
  TrainingState st = initialize(pc, 2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(st, data.train, pc.train));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(data.train.samples.size()));
}
BENCHMARK(BM_TrainEpochAdding)->Unit(benchmark::kMillisecond);

void BM_Grow(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix grad(n, n);
  for (double& v : grad.data()) v = g(rng);
  const SeedMask seed = seed_mask(n, n, 0.5, rng);
  for (auto _ : state) {
    MaskedMatrix m(Matrix(n, n), seed.mask);
    benchmark::DoNotOptimize(grow(m, grad, 0.9));
  }
}
BENCHMARK(BM_Grow)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_PruneStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix w(n, n);
  for (double& v : w.data()) v = g(rng);
  for (auto _ : state) {
    MaskedMatrix m(w);
    benchmark::DoNotOptimize(prune_step(m, 0.2));
  }
}
BENCHMARK(BM_PruneStep)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_CheckpointEncode(benchmark::State& state) {
  PipelineConfig pc;
  pc.cell = bench_spec(CellKind::kHlstm, 64, 64);
  pc.schedule.seed_sparsity = static_cast<double>(state.range(0)) / 100.0;
  const Checkpoint c{initialize(pc, 8, 1), pc.schedule, ""};
  std::size_t bytes = 0;
  for (auto _ : state) {
    const std::string enc = encode_checkpoint(c);
    bytes = enc.size();
    benchmark::DoNotOptimize(enc.data());
  }
  state.counters["bytes"] = static_cast<double>(bytes);
}
BENCHMARK(BM_CheckpointEncode)->Arg(0)->Arg(50)->Arg(94)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
