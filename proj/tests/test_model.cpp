#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "termrel/error.hpp"
#include "termrel/eval.hpp"
#include "termrel/features.hpp"
#include "termrel/graph.hpp"
#include "termrel/model.hpp"
#include "termrel/rng.hpp"
#include "termrel/synthetic.hpp"
#include "test_support.hpp"

using namespace termrel;

namespace {

NormAdjacency pair_graph() {
  CoreFringeGraph graph;
  graph.n = 2;
  graph.k = 5;
  graph.backfill = {0, 0};
  graph.edges = {{0, 1}};
  return normalize_adjacency(graph);
}

// Random instance for numerical tests: ring-with-chords graph, seeded
// features and labels.
struct RandomInstance {
  NormAdjacency adj;
  Mat x;
  std::vector<std::vector<signed char>> labels;
  std::vector<int> mask;
};

RandomInstance make_instance(int n, int d, int levels, std::uint64_t seed) {
  Rng rng(seed);
  CoreFringeGraph graph;
  graph.n = n;
  graph.backfill.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    graph.edges.emplace_back(i, (i + 1) % n);
    if (rng.bernoulli(0.4)) {
      int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      if (j != i) graph.edges.emplace_back(i, j);
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end());
  graph.edges.erase(std::unique(graph.edges.begin(), graph.edges.end()),
                    graph.edges.end());
  RandomInstance inst;
  inst.adj = normalize_adjacency(graph);
  inst.x = Mat(n, d);
  for (Eigen::Index i = 0; i < inst.x.size(); ++i) {
    inst.x.data()[i] = rng.uniform(-1.0, 1.0);
  }
  inst.labels.resize(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    auto& level = inst.labels[static_cast<std::size_t>(l)];
    level.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      signed char y = rng.bernoulli(0.5) ? 1 : 0;
      if (l > 0 && inst.labels[static_cast<std::size_t>(l - 1)]
                       [static_cast<std::size_t>(i)] == 0) {
        y = 0;  // keep levels monotone
      }
      level[static_cast<std::size_t>(i)] = y;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (i % 4 != 3) inst.mask.push_back(i);  // leave some nodes unsupervised
  }
  return inst;
}

Supervision make_supervision(const RandomInstance& inst, bool hierarchical) {
  Supervision sup;
  if (hierarchical) {
    for (const auto& level : inst.labels) {
      sup.level_labels.push_back(level);
      sup.level_masks.push_back(inst.mask);
    }
  } else {
    sup.level_labels.push_back(inst.labels.back());
    sup.level_masks.push_back(inst.mask);
  }
  return sup;
}

double max_grad_error(ModelParams& params, const NormAdjacency& adj,
                      const Mat& x, const Supervision& sup) {
  ForwardOptions opts;
  opts.training = true;  // deterministic batch statistics, no dropout
  ModelParams grads = [&] {
    TrainConfig c;
    c.mode = params.mode;
    c.hidden = params.hidden;
    c.gcn_layers = params.gcn_layer_count();
    c.seed = 1;
    ModelParams g = init_params(c, params.input_dim,
                                params.mode == ModelMode::HiCFL ? params.levels
                                                                : 0);
    for (TensorRef ref : parameter_refs(g)) {
      std::memset(ref.data, 0, ref.size * sizeof(double));
    }
    return g;
  }();
  loss_and_gradients(params, adj, x, sup, 0.0, opts, &grads);

  auto refs = parameter_refs(params);
  auto grad_refs = parameter_refs(grads);
  const double h = 1e-3;
  double worst = 0.0;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    for (std::size_t i = 0; i < refs[r].size; ++i) {
      const double saved = refs[r].data[i];
      refs[r].data[i] = saved + h;
      const double up = loss_and_gradients(params, adj, x, sup, 0.0, opts,
                                           nullptr);
      refs[r].data[i] = saved - h;
      const double down = loss_and_gradients(params, adj, x, sup, 0.0, opts,
                                             nullptr);
      refs[r].data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad_refs[r].data[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("shipped defaults") {
  TrainConfig config;
  CHECK(config.learning_rate == 0.01);
  CHECK(config.hidden == 256);
  CHECK(config.dropout == 0.5);
  CHECK(config.gcn_layers == 2);
  CHECK(config.alpha == 0.5);
  CHECK(config.epochs == 300);
  CHECK(kDefaultMaxLinks == 5);
}

TEST_CASE("an isolated node passes through a conv layer") {
  CoreFringeGraph graph;
  graph.n = 1;
  graph.backfill = {1};
  NormAdjacency adj = normalize_adjacency(graph);
  Mat x(1, 3);
  x << 0.5, -1.0, 2.0;

  TrainConfig config;
  config.mode = ModelMode::HiCFL;
  config.hidden = 3;
  config.gcn_layers = 2;
  config.seed = 7;
  ModelParams params = init_params(config, 3, 1);
  params.gcn[0].w = Mat::Identity(3, 3);
  params.gcn[0].b.setZero();

  // Inference batch norm starts at identity statistics (mean 0, var 1), so
  // the first layer reduces to relu(x / sqrt(1 + eps)).
  ForwardOptions opts;
  auto hs = gcn_forward(params, adj, x, 0.0, opts);
  const double scale = 1.0 / std::sqrt(1.0 + BatchNormState::kEps);
  CHECK(hs[0](0, 0) == doctest::Approx(0.5 * scale));
  CHECK(hs[0](0, 1) == 0.0);  // relu clips
  CHECK(hs[0](0, 2) == doctest::Approx(2.0 * scale));
}

TEST_CASE("two-node path matches the hand-computed aggregation") {
  NormAdjacency adj = pair_graph();
  Mat x(2, 2);
  x << 1.0, 2.0, -3.0, 4.0;

  TrainConfig config;
  config.hidden = 2;
  config.gcn_layers = 1;  // single linear output layer, no batch norm
  config.seed = 5;
  ModelParams params = init_params(config, 2, 0);
  ForwardOptions opts;
  auto hs = gcn_forward(params, adj, x, 0.0, opts);

  // every normalization entry is 1/2
  for (int i = 0; i < 2; ++i) {
    const double expected =
        0.5 * (params.gcn[0].w * x.row(0).transpose())(0) +
        0.5 * (params.gcn[0].w * x.row(1).transpose())(0) +
        params.gcn[0].b[0];
    CHECK(hs[0](i, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("masked cross-entropy values") {
  Vec z(3);
  z << 0.5, 0.9, 0.1;
  std::vector<signed char> y = {1, 1, 0};
  SUBCASE("matching predictions cost almost nothing") {
    Vec exact(2);
    exact << 1.0, 0.0;
    CHECK(masked_bce(exact, {1, 0}, {0, 1}) ==
          doctest::Approx(0.0).epsilon(1e-5));
  }
  SUBCASE("a 0.5 prediction contributes ln 2") {
    CHECK(masked_bce(z, y, {0}) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("empty mask is an error") {
    CHECK_THROWS_AS(masked_bce(z, y, {}), Error);
  }
  SUBCASE("unlabeled node inside the mask is an error") {
    CHECK_THROWS_AS(masked_bce(z, {1, -1, 0}, {1}), Error);
  }
}

TEST_CASE("hierarchy head algebra") {
  RandomInstance inst = make_instance(8, 4, 2, 42);
  TrainConfig config;
  config.mode = ModelMode::HiCFL;
  config.hidden = 6;
  config.seed = 9;

  SUBCASE("all-zero parameters give 0.5 everywhere") {
    ModelParams params = init_params(config, 4, 2);
    for (TensorRef ref : parameter_refs(params)) {
      std::memset(ref.data, 0, ref.size * sizeof(double));
    }
    ForwardOptions opts;
    ModelOutputs out = model_forward(params, inst.adj, inst.x, 0.0, opts);
    for (int i = 0; i < 8; ++i) {
      CHECK(out.z_global[i] == 0.5);
      CHECK(out.z_local[0][i] == 0.5);
      CHECK(out.z_local[1][i] == 0.5);
      CHECK(out.s[i] == 0.5);
    }
  }
  SUBCASE("concatenation widths") {
    ModelParams params = init_params(config, 4, 3);
    CHECK(params.global[0].w.cols() == 6);       // h only
    CHECK(params.global[1].w.cols() == 12);      // [a; h]
    CHECK(params.global[2].w.cols() == 12);
    CHECK(params.global_out.w.rows() == 1);
  }
  SUBCASE("a single-level hierarchy blends global with one local head") {
    ModelParams params = init_params(config, 4, 1);
    ForwardOptions opts;
    ModelOutputs out = model_forward(params, inst.adj, inst.x, 0.0, opts);
    REQUIRE(out.z_local.size() == 1);
    for (int i = 0; i < 8; ++i) {
      CHECK(out.s[i] ==
            doctest::Approx(0.5 * out.z_global[i] + 0.5 * out.z_local[0][i]));
    }
    // loss doubles when both heads see the same labels and outputs agree
    Supervision sup;
    sup.level_labels.push_back(inst.labels[0]);
    sup.level_masks.push_back(inst.mask);
    ModelOutputs fake = out;
    fake.z_local[0] = fake.z_global;
    const double eps_term = masked_bce(fake.z_global, inst.labels[0], inst.mask);
    CHECK(hicfl_loss(fake, sup) == doctest::Approx(2.0 * eps_term));
  }
}

TEST_CASE("score blending") {
  ModelOutputs out;
  out.z_global = Vec(2);
  out.z_global << 0.9, 0.3;
  out.z_local = {Vec(2), Vec(2)};
  out.z_local[0] << 0.8, 0.5;
  out.z_local[1] << 0.5, 0.5;
  SUBCASE("alpha 1 is the global head") {
    Vec s = hicfl_score(out, 1.0);
    CHECK(s[0] == 0.9);
    CHECK(s[1] == 0.3);
  }
  SUBCASE("alpha 0 is the product of local heads") {
    Vec s = hicfl_score(out, 0.0);
    CHECK(s[0] == doctest::Approx(0.4));
    CHECK(s[1] == doctest::Approx(0.25));
  }
}

TEST_CASE("analytic gradients match finite differences (spot check)") {
  SUBCASE("flat model") {
    RandomInstance inst = make_instance(10, 3, 1, 77);
    TrainConfig config;
    config.hidden = 4;
    config.seed = 13;
    ModelParams params = init_params(config, 3, 0);
    CHECK(max_grad_error(params, inst.adj, inst.x,
                         make_supervision(inst, false)) < 1e-4);
  }
  SUBCASE("hierarchical model") {
    RandomInstance inst = make_instance(10, 3, 2, 78);
    TrainConfig config;
    config.mode = ModelMode::HiCFL;
    config.hidden = 4;
    config.seed = 14;
    ModelParams params = init_params(config, 3, 2);
    CHECK(max_grad_error(params, inst.adj, inst.x,
                         make_supervision(inst, true)) < 1e-4);
  }
}

TEST_CASE("hierarchical training loss decreases over the first epochs") {
  RandomInstance inst = make_instance(40, 6, 2, 11);
  TrainConfig config;
  config.mode = ModelMode::HiCFL;
  config.hidden = 16;
  config.epochs = 10;
  config.dropout = 0.0;
  config.seed = 4;
  TrainResult result = train_model(config, inst.adj, inst.x,
                                   make_supervision(inst, true), {}, {});
  REQUIRE(result.log.size() == 10);
  CHECK(result.log.back().loss < result.log.front().loss);
}

TEST_CASE("permuting node ids permutes scores identically") {
  RandomInstance inst = make_instance(12, 5, 1, 101);
  TrainConfig config;
  config.hidden = 8;
  config.seed = 21;
  ModelParams params = init_params(config, 5, 0);
  ForwardOptions opts;
  ModelOutputs base = model_forward(params, inst.adj, inst.x, 0.0, opts);

  // permutation p: new id = (old id * 5 + 3) mod 12 (a bijection)
  std::vector<int> perm(12);
  for (int i = 0; i < 12; ++i) perm[static_cast<std::size_t>(i)] = (i * 5 + 3) % 12;
  CoreFringeGraph pg;
  pg.n = 12;
  pg.backfill.assign(12, 0);
  // rebuild edges from the normalized structure is lossy; rebuild from the
  // same generator instead
  Rng rng(101);
  CoreFringeGraph graph;
  graph.n = 12;
  graph.backfill.assign(12, 0);
  for (int i = 0; i < 12; ++i) {
    graph.edges.emplace_back(i, (i + 1) % 12);
    if (rng.bernoulli(0.4)) {
      int j = static_cast<int>(rng.below(12));
      if (j != i) graph.edges.emplace_back(i, j);
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end());
  graph.edges.erase(std::unique(graph.edges.begin(), graph.edges.end()),
                    graph.edges.end());
  CoreFringeGraph permuted;
  permuted.n = 12;
  permuted.backfill.assign(12, 0);
  for (auto [src, dst] : graph.edges) {
    permuted.edges.emplace_back(perm[static_cast<std::size_t>(src)],
                                perm[static_cast<std::size_t>(dst)]);
  }
  std::sort(permuted.edges.begin(), permuted.edges.end());
  NormAdjacency padj = normalize_adjacency(permuted);
  Mat px(12, 5);
  for (int i = 0; i < 12; ++i) {
    px.row(perm[static_cast<std::size_t>(i)]) = inst.x.row(i);
  }
  ModelOutputs moved = model_forward(params, padj, px, 0.0, opts);
  for (int i = 0; i < 12; ++i) {
    CHECK(moved.s[perm[static_cast<std::size_t>(i)]] ==
          doctest::Approx(base.s[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero training epochs return the initialization unchanged") {
  RandomInstance inst = make_instance(10, 3, 1, 55);
  TrainConfig config;
  config.hidden = 4;
  config.epochs = 0;
  config.seed = 31;
  TrainResult result = train_model(config, inst.adj, inst.x,
                                   make_supervision(inst, false), {}, {});
  ModelParams fresh = init_params(config, 3, 0);
  auto a = parameter_refs(result.params);
  auto b = parameter_refs(fresh);
  REQUIRE(a.size() == b.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    CHECK(std::memcmp(a[r].data, b[r].data, a[r].size * sizeof(double)) == 0);
  }
  CHECK(result.best_epoch == 0);
  CHECK(result.log.empty());
}

TEST_CASE("training rejects supervision without positives") {
  RandomInstance inst = make_instance(10, 3, 1, 56);
  Supervision sup = make_supervision(inst, false);
  for (int id : sup.level_masks[0]) {
    sup.level_labels[0][static_cast<std::size_t>(id)] = 0;
  }
  TrainConfig config;
  config.hidden = 4;
  CHECK_THROWS_WITH_AS(
      train_model(config, inst.adj, inst.x, sup, {}, {}),
      doctest::Contains("zero positive"), Error);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  RandomInstance inst = make_instance(24, 5, 2, 91);
  TrainConfig config;
  config.mode = ModelMode::HiCFL;
  config.hidden = 12;
  config.epochs = 15;
  config.seed = 1234;
  Supervision sup = make_supervision(inst, true);
  std::vector<int> val_ids = {3, 7, 11, 15, 19, 23};
  TrainResult a = train_model(config, inst.adj, inst.x, sup, val_ids,
                              inst.labels.back());
  TrainResult b = train_model(config, inst.adj, inst.x, sup, val_ids,
                              inst.labels.back());
  auto ra = parameter_refs(a.params);
  auto rb = parameter_refs(b.params);
  for (std::size_t r = 0; r < ra.size(); ++r) {
    CHECK(std::memcmp(ra[r].data, rb[r].data, ra[r].size * sizeof(double)) ==
          0);
  }
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].loss == b.log[e].loss);
    CHECK(a.log[e].val_pr_auc == b.log[e].val_pr_auc);
  }
}

TEST_CASE("flat model separates noise-free synthetic data") {
  SyntheticSpec spec;
  spec.level_names = {"cs", "ai"};
  spec.level_counts = {100, 40};
  spec.background_terms = 100;
  spec.core_ratio = 0.6;
  spec.feature_dim = 12;
  spec.vocab_size = 600;
  spec.noise = 0.0;
  auto data = generate_synthetic_dataset(spec, 9);
  CoreIndex index = build_index(data.records);
  CoreFringeGraph graph = build_graph(data.records, index, 5);
  NormAdjacency adj = normalize_adjacency(graph);
  FeatureMatrix features = build_feature_matrix(data.records, data.vectors);

  LabelMatrix matrix = data.core_truth();
  std::vector<int> train_ids;
  for (const auto& rec : data.records) {
    if (rec.is_core) train_ids.push_back(rec.id);
  }
  TrainConfig config;
  config.hidden = 32;
  config.epochs = 200;
  config.dropout = 0.5;
  config.seed = 2;
  Supervision sup = cfl_supervision(matrix, 0, train_ids);
  TrainResult result = train_model(config, adj, features.x, sup, {}, {});

  ForwardOptions opts;
  ModelOutputs out =
      model_forward(result.params, adj, features.x, 0.0, opts);
  std::vector<double> scores;
  std::vector<signed char> labels;
  for (int id : train_ids) {
    scores.push_back(out.s[id]);
    labels.push_back(matrix.y[0][static_cast<std::size_t>(id)]);
  }
  CHECK(roc_auc(scores, labels) > 0.99);
}

TEST_CASE("scoring one node equals scoring all nodes") {
  RandomInstance inst = make_instance(14, 4, 2, 65);
  TrainConfig config;
  config.mode = ModelMode::HiCFL;
  config.hidden = 8;
  config.epochs = 5;
  config.seed = 3;
  TrainResult result = train_model(config, inst.adj, inst.x,
                                   make_supervision(inst, true), {}, {});
  std::vector<int> all(14);
  std::iota(all.begin(), all.end(), 0);
  auto full = score_terms(result.params, inst.adj, inst.x, all);
  for (int id : {0, 5, 13}) {
    auto single = score_terms(result.params, inst.adj, inst.x, {id});
    CHECK(single[0] == full[static_cast<std::size_t>(id)]);
  }
  CHECK_THROWS_AS(score_terms(result.params, inst.adj, inst.x, {99}), Error);
  for (double s : full) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("featureless isolated nodes all score the same") {
  CoreFringeGraph graph;
  graph.n = 4;
  graph.backfill.assign(4, 1);
  graph.edges = {{0, 1}};  // nodes 2 and 3 stay isolated
  NormAdjacency adj = normalize_adjacency(graph);
  Mat x = Mat::Zero(4, 3);
  x.row(0) << 1.0, 2.0, 3.0;

  TrainConfig config;
  config.hidden = 4;
  config.seed = 17;
  ModelParams params = init_params(config, 3, 0);
  auto scores = score_terms(params, adj, x, {2, 3});
  CHECK(scores[0] == scores[1]);
}

TEST_CASE("checkpoint round trip") {
  RandomInstance inst = make_instance(16, 4, 2, 31);
  TrainConfig config;
  config.mode = ModelMode::HiCFL;
  config.hidden = 8;
  config.epochs = 8;
  config.seed = 77;
  TrainResult result = train_model(config, inst.adj, inst.x,
                                   make_supervision(inst, true), {}, {});
  CoreFringeGraph graph;  // shape-only stand-in for the hash
  graph.n = 16;
  graph.k = 5;
  graph.backfill.assign(16, 0);

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.config = config;
  ckpt.input_hash = input_signature(graph, inst.x);
  ckpt.best_epoch = result.best_epoch;

  testsup::TempDir dir;
  save_checkpoint(ckpt, dir / "m.ck");
  Checkpoint loaded = load_checkpoint(dir / "m.ck");
  save_checkpoint(loaded, dir / "m2.ck");
  CHECK(testsup::read_file(dir / "m.ck") == testsup::read_file(dir / "m2.ck"));

  // identical scores after reload
  std::vector<int> all(16);
  std::iota(all.begin(), all.end(), 0);
  auto before = score_terms(ckpt.params, inst.adj, inst.x, all);
  auto after = score_terms(loaded.params, inst.adj, inst.x, all);
  CHECK(before == after);

  // truncation is detected
  std::string bytes = testsup::read_file(dir / "m.ck");
  testsup::write_file(dir / "bad.ck", bytes.substr(0, bytes.size() - 40));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "bad.ck"),
                       doctest::Contains("corrupt"), Error);
}
