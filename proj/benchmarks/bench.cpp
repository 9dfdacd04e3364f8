#include <benchmark/benchmark.h>

#include "dmrf/harness.hpp"

using namespace dmrf;

namespace {

void BM_ShortestDelay(benchmark::State& state) {
  const auto t = deploy(static_cast<std::size_t>(state.range(0)), Region{}, DeployMode::UniformGrid,
                        1, 1.5, 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(shortest_delay(t, t.source(), 1.28));
}
BENCHMARK(BM_ShortestDelay)->Arg(100)->Arg(400)->Arg(1600);

void BM_DisjointPaths(benchmark::State& state) {
  const auto t = deploy(static_cast<std::size_t>(state.range(0)), Region{}, DeployMode::UniformGrid,
                        1, 1.5, 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(disjoint_paths(t, 4, 1.28));
}
BENCHMARK(BM_DisjointPaths)->Arg(100)->Arg(400);

void BM_JumpProbabilities(benchmark::State& state) {
  std::vector<CandidateEntry> e(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < e.size(); ++i) e[i].suc = 1.0 / static_cast<double>(i + 1);
  for (auto _ : state) {
    jump_probabilities(e);
    benchmark::DoNotOptimize(e.data());
  }
}
BENCHMARK(BM_JumpProbabilities)->Arg(8)->Arg(64);

void BM_RunScenario(benchmark::State& state) {
  auto cfg = table2();
  cfg.protocol = static_cast<ProtocolKind>(state.range(0));
  cfg.void_radius = 5.0;
  const auto built = build(cfg, cfg.seed);
  for (auto _ : state) benchmark::DoNotOptimize(run(built.topology, built.scenario, cfg.seed));
  state.SetLabel(std::string(to_string(cfg.protocol)));
}
BENCHMARK(BM_RunScenario)
    ->Arg(static_cast<int>(ProtocolKind::Dmrf))
    ->Arg(static_cast<int>(ProtocolKind::GreedyMinDelay))
    ->Arg(static_cast<int>(ProtocolKind::Bypass))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
