#include <doctest.h>

#include "termrel/error.hpp"
#include "termrel/features.hpp"
#include "termrel/graph.hpp"
#include "termrel/model.hpp"

using namespace termrel;

namespace {

WordVectorTable tiny_table() {
  WordVectorTable table;
  table.dim = 2;
  table.vectors["deep"] = {1.0, 0.0};
  table.vectors["learning"] = {0.0, 2.0};
  return table;
}

}  // namespace

TEST_CASE("compositional embedding adds token vectors") {
  auto table = tiny_table();
  Vec v = compositional_embedding("deep learning", table);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 2.0);

  SUBCASE("unknown tokens contribute nothing") {
    Vec w = compositional_embedding("deep unknown learning", table);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 2.0);
    Vec z = compositional_embedding("totally unknown", table);
    CHECK(z.isZero(0.0));
  }
  SUBCASE("token order does not matter") {
    Vec w = compositional_embedding("learning deep", table);
    CHECK(w == v);
  }
}

TEST_CASE("feature matrix has one row per record") {
  WordVectorTable table;
  table.dim = 4;
  table.vectors["a"] = {1, 0, 0, 0};
  table.vectors["b"] = {0, 1, 0, 0};
  std::vector<TermRecord> records = {
      {0, "a", false, "", {}},
      {1, "a b", false, "", {}},
      {2, "zz", false, "", {}},
  };
  FeatureMatrix fm = build_feature_matrix(records, table);
  CHECK(fm.rows() == 3);
  CHECK(fm.dim() == 4);
  CHECK(fm.x(1, 0) == 1.0);
  CHECK(fm.x(1, 1) == 1.0);
  CHECK(fm.missing == 1);  // the all-unknown surface
  CHECK(fm.provenance == FeatureProvenance::Compositional);

  SUBCASE("optional row normalization") {
    FeatureMatrix norm = build_feature_matrix(records, table, true);
    CHECK(norm.x.row(1).norm() == doctest::Approx(1.0));
    CHECK(norm.x.row(2).norm() == 0.0);  // zero rows stay zero
  }
}

TEST_CASE("direct mode reads term vectors and falls back per missing term") {
  WordVectorTable words = tiny_table();
  WordVectorTable terms;
  terms.dim = 2;
  terms.vectors["deep_learning"] = {5.0, 5.0};
  std::vector<TermRecord> records = {
      {0, "deep learning", false, "", {}},
      {1, "learning", false, "", {}},
  };
  FeatureMatrix fm = build_feature_matrix_direct(records, terms, &words);
  CHECK(fm.provenance == FeatureProvenance::Direct);
  CHECK(fm.x(0, 0) == 5.0);
  CHECK(fm.x(1, 1) == 2.0);  // compositional fallback

  SUBCASE("without a word table the fallback is the zero vector") {
    FeatureMatrix zero_fb = build_feature_matrix_direct(records, terms);
    CHECK(zero_fb.x.row(1).isZero(0.0));
    CHECK(zero_fb.missing == 1);
  }
  SUBCASE("dimension mismatch between sources is an error") {
    WordVectorTable wrong;
    wrong.dim = 3;
    wrong.vectors["x"] = {1, 2, 3};
    CHECK_THROWS_AS(build_feature_matrix_direct(records, terms, &wrong),
                    Error);
  }
}

TEST_CASE("a zero-feature node aggregates only its neighbors plus bias") {
  // Two nodes, one edge; node 1 has zero features. With a single linear
  // graph-conv layer, node 1's state must equal the normalized neighbor
  // contribution plus the bias.
  CoreFringeGraph graph;
  graph.n = 2;
  graph.k = 5;
  graph.backfill = {0, 0};
  graph.edges = {{0, 1}};
  NormAdjacency adj = normalize_adjacency(graph);

  Mat x(2, 3);
  x << 1.0, -2.0, 0.5, 0.0, 0.0, 0.0;

  TrainConfig config;
  config.mode = ModelMode::HiCFL;  // keeps the single conv layer at width 4
  config.hidden = 4;
  config.gcn_layers = 1;
  config.seed = 3;
  ModelParams params = init_params(config, 3, 1);
  ForwardOptions opts;
  auto hs = gcn_forward(params, adj, x, 0.0, opts);
  REQUIRE(hs.size() == 1);

  Vec expected = 0.5 * (params.gcn[0].w * x.row(0).transpose()) +
                 params.gcn[0].b;
  for (int j = 0; j < 4; ++j) {
    CHECK(hs[0](1, j) == doctest::Approx(expected[j]).epsilon(1e-12));
  }
}
