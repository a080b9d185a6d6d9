#include <doctest.h>

#include "termrel/error.hpp"
#include "termrel/eval.hpp"
#include "termrel/features.hpp"
#include "termrel/synthetic.hpp"
#include "test_support.hpp"

using namespace termrel;
using testsup::TempDir;

namespace {

SyntheticSpec small_spec(double noise) {
  SyntheticSpec spec;
  spec.level_names = {"cs", "ai", "ml"};
  spec.level_counts = {120, 50, 20};
  spec.background_terms = 120;
  spec.core_ratio = 0.5;
  spec.feature_dim = 16;
  spec.vocab_size = 800;
  spec.noise = noise;
  return spec;
}

}  // namespace

TEST_CASE("generator is deterministic: identical (spec, seed) pairs give "
          "byte-identical datasets") {
  TempDir a, b;
  auto da = generate_synthetic_dataset(small_spec(0.05), 7);
  auto db = generate_synthetic_dataset(small_spec(0.05), 7);
  write_synthetic_dataset(da, a.path());
  write_synthetic_dataset(db, b.path());
  for (const char* name :
       {"terms.tsv", "vectors.txt", "tree.tsv", "hierarchy.cfg",
        "truth_labels.tsv"}) {
    CHECK(testsup::read_file(a / name) == testsup::read_file(b / name));
  }
  // and a different seed changes the data
  auto dc = generate_synthetic_dataset(small_spec(0.05), 8);
  CHECK(dc.records[0].surface != da.records[0].surface);
}

TEST_CASE("truth labels are monotone down the hierarchy") {
  auto data = generate_synthetic_dataset(small_spec(0.1), 3);
  REQUIRE(data.truth.size() == 3);
  int level2 = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    if (data.truth[2][i] == 1) {
      ++level2;
      CHECK(data.truth[1][i] == 1);
      CHECK(data.truth[0][i] == 1);
    }
    if (data.truth[1][i] == 1) CHECK(data.truth[0][i] == 1);
  }
  CHECK(level2 == 20);
}

TEST_CASE("noise-free planted features are linearly separable at level 0") {
  auto data = generate_synthetic_dataset(small_spec(0.0), 11);
  FeatureMatrix features = build_feature_matrix(data.records, data.vectors);
  std::vector<int> ids;
  for (const auto& rec : data.records) ids.push_back(rec.id);

  TrainConfig config;
  config.epochs = 300;
  config.hidden = 16;
  config.seed = 11;
  BaselineResult lr =
      train_baseline(BaselineKind::LogisticRegression, features.x,
                     data.truth[0], ids, {}, data.truth[0], config);
  std::vector<signed char> labels(data.truth[0].begin(), data.truth[0].end());
  CHECK(roc_auc(lr.scores, labels) == doctest::Approx(1.0));
}

TEST_CASE("generator validates its spec") {
  auto spec = small_spec(0.1);
  spec.core_ratio = 0.0;
  CHECK_THROWS_AS(generate_synthetic_dataset(spec, 1), Error);
  spec = small_spec(0.1);
  spec.core_ratio = 1.5;
  CHECK_THROWS_AS(generate_synthetic_dataset(spec, 1), Error);
  spec = small_spec(0.1);
  spec.level_counts.clear();
  spec.level_names.clear();
  CHECK_THROWS_AS(generate_synthetic_dataset(spec, 1), Error);
  spec = small_spec(0.1);
  spec.level_counts = {50, 80, 20};  // not nested
  CHECK_THROWS_AS(generate_synthetic_dataset(spec, 1), Error);
}

TEST_CASE("synthetic spec config round trip") {
  TempDir dir;
  testsup::write_file(dir / "s.cfg",
                      "levels=cs:100,ai:40\n"
                      "background=80\n"
                      "core_ratio=0.6\n"
                      "dim=12\n"
                      "vocab=600\n"
                      "noise=0.02\n"
                      "seed=42\n");
  std::uint64_t seed = 0;
  SyntheticSpec spec = load_synthetic_spec(dir / "s.cfg", &seed);
  CHECK(seed == 42);
  CHECK(spec.level_names == std::vector<std::string>{"cs", "ai"});
  CHECK(spec.level_counts == std::vector<int>{100, 40});
  CHECK(spec.background_terms == 80);
  CHECK(spec.core_ratio == doctest::Approx(0.6));
  CHECK(spec.feature_dim == 12);
  CHECK(spec.noise == doctest::Approx(0.02));

  testsup::write_file(dir / "bad.cfg", "nonsense=1\n");
  CHECK_THROWS_AS(load_synthetic_spec(dir / "bad.cfg"), Error);
}

TEST_CASE("core_truth restricts truth to core terms") {
  auto data = generate_synthetic_dataset(small_spec(0.1), 5);
  LabelMatrix matrix = data.core_truth();
  for (const auto& rec : data.records) {
    auto idx = static_cast<std::size_t>(rec.id);
    if (rec.is_core) {
      CHECK(matrix.y[0][idx] == data.truth[0][idx]);
    } else {
      CHECK(matrix.y[0][idx] == -1);
    }
  }
}

TEST_CASE("annotation over synthetic categories recovers noise-free truth") {
  auto data = generate_synthetic_dataset(small_spec(0.0), 19);
  DomainHierarchy hierarchy =
      build_domain_hierarchy(data.tree, data.hierarchy);
  LabelMatrix matrix = annotate_hierarchy(data.records, hierarchy);
  REQUIRE(matrix.depth() == 3);
  for (const auto& rec : data.records) {
    if (!rec.is_core) continue;
    auto idx = static_cast<std::size_t>(rec.id);
    for (int l = 0; l < 3; ++l) {
      CHECK(matrix.y[static_cast<std::size_t>(l)][idx] ==
            data.truth[static_cast<std::size_t>(l)][idx]);
    }
  }
}
