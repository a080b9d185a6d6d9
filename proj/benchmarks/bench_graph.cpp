#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "termrel/graph.hpp"
#include "termrel/index.hpp"

using namespace termrel;

static void BM_BuildGraph(benchmark::State& state) {
  const auto& data = bench_dataset();
  static CoreIndex index = build_index(data.records);
  for (auto _ : state) {
    CoreFringeGraph graph = build_graph(data.records, index, 5);
    benchmark::DoNotOptimize(graph.edges.size());
  }
}
BENCHMARK(BM_BuildGraph)->Unit(benchmark::kMillisecond);

static void BM_AttachFringe(benchmark::State& state) {
  const auto& data = bench_dataset();
  static CoreIndex index = build_index(data.records);
  static CoreFringeGraph base = build_graph(data.records, index, 5);
  std::size_t q = 0;
  for (auto _ : state) {
    CoreFringeGraph graph = base;
    auto records = data.records;
    int id = attach_fringe(graph, records, index,
                           "novel query " + std::to_string(q++));
    benchmark::DoNotOptimize(id);
  }
}
BENCHMARK(BM_AttachFringe)->Unit(benchmark::kMillisecond);

static void BM_NormalizeAdjacency(benchmark::State& state) {
  const auto& data = bench_dataset();
  static CoreIndex index = build_index(data.records);
  static CoreFringeGraph graph = build_graph(data.records, index, 5);
  for (auto _ : state) {
    NormAdjacency adj = normalize_adjacency(graph);
    benchmark::DoNotOptimize(adj.nnz());
  }
}
BENCHMARK(BM_NormalizeAdjacency)->Unit(benchmark::kMillisecond);
