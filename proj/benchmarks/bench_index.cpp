#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "termrel/index.hpp"

using namespace termrel;

static void BM_BuildIndex(benchmark::State& state) {
  const auto& data = bench_dataset();
  for (auto _ : state) {
    CoreIndex index = build_index(data.records);
    benchmark::DoNotOptimize(index.doc_count());
  }
}
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);

static void BM_SearchExact(benchmark::State& state) {
  const auto& data = bench_dataset();
  static CoreIndex index = build_index(data.records);
  std::size_t q = 0;
  for (auto _ : state) {
    const auto& surface = data.records[q % data.records.size()].surface;
    auto hits = index.search(surface, true, 10);
    benchmark::DoNotOptimize(hits.size());
    ++q;
  }
}
BENCHMARK(BM_SearchExact);

static void BM_SearchPlain(benchmark::State& state) {
  const auto& data = bench_dataset();
  static CoreIndex index = build_index(data.records);
  std::size_t q = 0;
  for (auto _ : state) {
    const auto& surface = data.records[q % data.records.size()].surface;
    auto hits = index.search(surface, false, 10);
    benchmark::DoNotOptimize(hits.size());
    ++q;
  }
}
BENCHMARK(BM_SearchPlain);
