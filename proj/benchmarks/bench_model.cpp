#include <benchmark/benchmark.h>

#include <numeric>

#include "bench_common.hpp"
#include "termrel/features.hpp"
#include "termrel/graph.hpp"
#include "termrel/index.hpp"
#include "termrel/model.hpp"

using namespace termrel;

namespace {

struct ModelFixture {
  NormAdjacency adj;
  Mat x;
  Supervision sup;
  ModelParams params;

  explicit ModelFixture(ModelMode mode) {
    const auto& data = bench_dataset();
    CoreIndex index = build_index(data.records);
    CoreFringeGraph graph = build_graph(data.records, index, 5);
    adj = normalize_adjacency(graph);
    x = build_feature_matrix(data.records, data.vectors).x;

    LabelMatrix matrix = data.core_truth();
    std::vector<int> mask;
    for (const auto& rec : data.records) {
      if (rec.is_core) mask.push_back(rec.id);
    }
    sup = mode == ModelMode::HiCFL ? hicfl_supervision(matrix, mask)
                                   : cfl_supervision(matrix, 2, mask);
    TrainConfig config;
    config.mode = mode;
    config.hidden = 64;
    config.seed = 1;
    params = init_params(config, static_cast<int>(x.cols()),
                         mode == ModelMode::HiCFL ? matrix.depth() : 0);
  }
};

}  // namespace

static void BM_ForwardInference(benchmark::State& state) {
  static ModelFixture fx(ModelMode::HiCFL);
  ForwardOptions opts;
  for (auto _ : state) {
    ModelOutputs out = model_forward(fx.params, fx.adj, fx.x, 0.0, opts);
    benchmark::DoNotOptimize(out.s.sum());
  }
}
BENCHMARK(BM_ForwardInference)->Unit(benchmark::kMillisecond);

static void BM_TrainEpochFlat(benchmark::State& state) {
  static ModelFixture fx(ModelMode::CFL);
  Rng rng(3);
  ForwardOptions opts;
  opts.training = true;
  opts.update_running = true;
  opts.dropout_rng = &rng;
  for (auto _ : state) {
    ModelParams grads = fx.params;  // same shapes; overwritten below
    for (TensorRef ref : parameter_refs(grads)) {
      std::fill(ref.data, ref.data + ref.size, 0.0);
    }
    double loss = loss_and_gradients(fx.params, fx.adj, fx.x, fx.sup, 0.5,
                                     opts, &grads);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_TrainEpochFlat)->Unit(benchmark::kMillisecond);

static void BM_TrainEpochHierarchical(benchmark::State& state) {
  static ModelFixture fx(ModelMode::HiCFL);
  Rng rng(3);
  ForwardOptions opts;
  opts.training = true;
  opts.update_running = true;
  opts.dropout_rng = &rng;
  for (auto _ : state) {
    ModelParams grads = fx.params;
    for (TensorRef ref : parameter_refs(grads)) {
      std::fill(ref.data, ref.data + ref.size, 0.0);
    }
    double loss = loss_and_gradients(fx.params, fx.adj, fx.x, fx.sup, 0.5,
                                     opts, &grads);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_TrainEpochHierarchical)->Unit(benchmark::kMillisecond);

static void BM_ScoreSingleTerm(benchmark::State& state) {
  static ModelFixture fx(ModelMode::HiCFL);
  int id = 0;
  for (auto _ : state) {
    auto s = score_terms(fx.params, fx.adj, fx.x, {id});
    benchmark::DoNotOptimize(s[0]);
    id = (id + 1) % fx.adj.n;
  }
}
BENCHMARK(BM_ScoreSingleTerm);
