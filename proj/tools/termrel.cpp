// termrel: measure the fine-grained domain relevance of terms.
//
// Pipeline stages communicate through files: synth (optional test data) ->
// index -> graph -> annotate -> train -> eval / score / rank. Every stage is
// deterministic for a fixed --seed.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "termrel/annotation.hpp"
#include "termrel/error.hpp"
#include "termrel/eval.hpp"
#include "termrel/features.hpp"
#include "termrel/graph.hpp"
#include "termrel/index.hpp"
#include "termrel/log.hpp"
#include "termrel/model.hpp"
#include "termrel/records.hpp"
#include "termrel/synthetic.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace termrel;

namespace {

/// A required input file is absent: exit code 2, naming the stage that
/// produces it.
struct MissingArtifact {
  std::string message;
};

void require_artifact(const fs::path& path, const std::string& what,
                      const std::string& producing_stage) {
  if (fs::exists(path)) return;
  throw MissingArtifact{what + " not found: " + path.string() +
                        " (produce it with `termrel " + producing_stage +
                        "` first)"};
}

ModelMode parse_mode(const std::string& mode, bool* pu) {
  *pu = false;
  if (mode == "cfl") return ModelMode::CFL;
  if (mode == "hicfl") return ModelMode::HiCFL;
  if (mode == "pu") {
    *pu = true;
    return ModelMode::HiCFL;
  }
  throw_config("unknown mode '" + mode + "' (expected cfl|hicfl|pu)");
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_train_log(const std::vector<EpochRecord>& log,
                     const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write training log: " + path.string());
  char buf[160];
  for (const EpochRecord& rec : log) {
    std::snprintf(buf, sizeof(buf),
                  "epoch=%d loss=%.9f val_roc_auc=%.9f val_pr_auc=%.9f\n",
                  rec.epoch, rec.loss, rec.val_roc_auc, rec.val_pr_auc);
    out << buf;
  }
}

struct CommonOpts {
  std::string terms, vectors, tree, hierarchy, graph_file, index_file;
  std::string labels, positives, ckpt, out, log_file, scores_file;
  std::string mode = "cfl";
  std::string bands = "";
  std::string baselines = "";
  std::string spec_file;
  int k = kDefaultMaxLinks;
  double alpha = 0.5;
  double lr = 0.01;
  int epochs = 300;
  double dropout = 0.5;
  int hidden = 256;
  std::uint64_t seed = 0;
  int target_level = -1;
  double val_ratio = 0.1;
  int pu_count = 20;
};

TrainConfig make_train_config(const CommonOpts& opt, ModelMode mode) {
  TrainConfig config;
  config.mode = mode;
  config.learning_rate = opt.lr;
  config.epochs = opt.epochs;
  config.dropout = opt.dropout;
  config.hidden = opt.hidden;
  config.alpha = opt.alpha;
  config.seed = opt.seed;
  return config;
}

// --- subcommands -------------------------------------------------------------

int cmd_synth(const CommonOpts& opt, bool seed_given) {
  require_artifact(opt.spec_file, "synthetic spec", "synth --spec <file>");
  std::uint64_t seed = opt.seed;
  std::uint64_t file_seed = 0;
  SyntheticSpec spec = load_synthetic_spec(opt.spec_file, &file_seed);
  if (!seed_given && file_seed != 0) seed = file_seed;
  SyntheticDataset data = generate_synthetic_dataset(spec, seed);
  write_synthetic_dataset(data, opt.out);
  log_info("synth: wrote " + std::to_string(data.records.size()) +
           " terms to " + opt.out);
  return 0;
}

int cmd_index(const CommonOpts& opt) {
  require_artifact(opt.terms, "term inventory", "synth");
  auto records = load_term_records(opt.terms);
  CoreIndex index = build_index(records);
  index.save(opt.out);
  log_info("index: " + std::to_string(index.doc_count()) +
           " core descriptions, avg length " +
           std::to_string(index.avg_doc_length()));
  return 0;
}

int cmd_graph(const CommonOpts& opt) {
  require_artifact(opt.terms, "term inventory", "synth");
  require_artifact(opt.index_file, "core index", "index");
  auto records = load_term_records(opt.terms);
  CoreIndex index = CoreIndex::load(opt.index_file);
  CoreFringeGraph graph = build_graph(records, index, opt.k);
  save_graph(graph, opt.out);
  log_info("graph: " + std::to_string(graph.n) + " nodes, " +
           std::to_string(graph.edges.size()) + " edges (k=" +
           std::to_string(opt.k) + ")");
  return 0;
}

int cmd_annotate(const CommonOpts& opt) {
  require_artifact(opt.terms, "term inventory", "synth");
  require_artifact(opt.tree, "category tree", "synth");
  require_artifact(opt.hierarchy, "hierarchy config", "synth");
  auto records = load_term_records(opt.terms);
  auto tree = load_category_tree(opt.tree);
  auto levels = load_hierarchy_config(opt.hierarchy);
  DomainHierarchy hierarchy = build_domain_hierarchy(tree, levels);
  LabelMatrix matrix = annotate_hierarchy(records, hierarchy);
  write_labels(matrix, opt.out);
  for (int l = 0; l < matrix.depth(); ++l) {
    long positives = std::count(matrix.y[static_cast<std::size_t>(l)].begin(),
                                matrix.y[static_cast<std::size_t>(l)].end(),
                                static_cast<signed char>(1));
    log_info("annotate: level " + std::to_string(l) + " (" +
             levels[static_cast<std::size_t>(l)].name + "): " +
             std::to_string(positives) + " positives");
  }
  return 0;
}

int cmd_train(const CommonOpts& opt) {
  require_artifact(opt.terms, "term inventory", "synth");
  require_artifact(opt.vectors, "word vectors", "synth");
  require_artifact(opt.graph_file, "term graph", "graph");
  require_artifact(opt.labels, "label file", "annotate");
  bool pu = false;
  ModelMode mode = parse_mode(opt.mode, &pu);

  auto records = load_term_records(opt.terms);
  auto table = load_word_vectors(opt.vectors);
  CoreFringeGraph graph = load_graph(opt.graph_file);
  if (graph.n != static_cast<int>(records.size())) {
    throw_validation("graph has " + std::to_string(graph.n) +
                     " nodes but the inventory has " +
                     std::to_string(records.size()));
  }
  LabelMatrix matrix = load_labels(opt.labels, graph.n);
  NormAdjacency adj = normalize_adjacency(graph);
  FeatureMatrix features = build_feature_matrix(records, table);

  const int target = opt.target_level < 0 ? matrix.depth() - 1
                                          : opt.target_level;
  std::vector<int> labeled;
  for (const TermRecord& rec : records) {
    if (rec.is_core &&
        matrix.y[static_cast<std::size_t>(pu ? matrix.depth() - 1 : target)]
                [static_cast<std::size_t>(rec.id)] >= 0) {
      labeled.push_back(rec.id);
    }
  }

  Supervision sup;
  PULabelSet pu_set;
  std::vector<signed char> val_labels;
  std::vector<int> train_ids = labeled, val_ids;
  if (pu) {
    require_artifact(opt.positives, "positive term list", "train --positives");
    pu_set = build_pu_labels(matrix, read_lines(opt.positives), records);
    // Selection runs on the supervision we actually have: the positives
    // plus the reliable negatives, split off a validation share.
    std::vector<signed char> pu_labels(records.size(), -1);
    for (int id : pu_set.positives) {
      pu_labels[static_cast<std::size_t>(id)] = 1;
    }
    for (int id : pu_set.reliable_negatives) {
      pu_labels[static_cast<std::size_t>(id)] = 0;
    }
    std::vector<int> pu_ids;
    for (std::size_t i = 0; i < pu_labels.size(); ++i) {
      if (pu_labels[i] >= 0) pu_ids.push_back(static_cast<int>(i));
    }
    if (opt.val_ratio > 0.0) {
      SplitPlan split = make_splits(pu_ids, pu_labels, 1.0 - opt.val_ratio,
                                    opt.val_ratio, 0.0, opt.seed);
      train_ids = split.train;
      val_ids = split.validation;
    } else {
      train_ids = pu_ids;
    }
    val_labels = pu_labels;
    sup = pu_supervision(matrix, pu_set, train_ids);
  } else {
    val_labels = matrix.y[static_cast<std::size_t>(target)];
    if (opt.val_ratio > 0.0) {
      SplitPlan split = make_splits(labeled, val_labels, 1.0 - opt.val_ratio,
                                    opt.val_ratio, 0.0, opt.seed);
      train_ids = split.train;
      val_ids = split.validation;
    }
    sup = mode == ModelMode::HiCFL ? hicfl_supervision(matrix, train_ids)
                                   : cfl_supervision(matrix, target, train_ids);
  }

  TrainConfig config = make_train_config(opt, mode);
  TrainResult result =
      train_model(config, adj, features.x, sup, val_ids, val_labels);

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.config = config;
  ckpt.input_hash = input_signature(graph, features.x);
  ckpt.best_epoch = result.best_epoch;
  save_checkpoint(ckpt, opt.ckpt);
  fs::path log_path =
      opt.log_file.empty() ? fs::path(opt.ckpt + ".log") : fs::path(opt.log_file);
  write_train_log(result.log, log_path);
  log_info("train: best epoch " + std::to_string(result.best_epoch) +
           ", checkpoint at " + opt.ckpt);
  return 0;
}

int cmd_eval(const CommonOpts& opt) {
  require_artifact(opt.terms, "term inventory", "synth");
  require_artifact(opt.vectors, "word vectors", "synth");
  require_artifact(opt.tree, "category tree", "synth");
  require_artifact(opt.hierarchy, "hierarchy config", "synth");
  bool pu = false;
  ModelMode mode = parse_mode(opt.mode, &pu);

  auto records = load_term_records(opt.terms);
  auto table = load_word_vectors(opt.vectors);
  auto tree = load_category_tree(opt.tree);
  auto levels = load_hierarchy_config(opt.hierarchy);
  LabelMatrix matrix =
      annotate_hierarchy(records, build_domain_hierarchy(tree, levels));

  ProtocolConfig config;
  config.train = make_train_config(opt, mode);
  config.k = opt.k;
  config.target_level = opt.target_level;
  config.pu = pu;
  config.pu_positive_count = opt.pu_count;
  if (pu && !opt.positives.empty()) {
    require_artifact(opt.positives, "positive term list", "eval --positives");
    config.pu_positive_surfaces = read_lines(opt.positives);
  }
  for (const std::string& name : {std::string("lr"), std::string("mlp")}) {
    if (opt.baselines.find(name) != std::string::npos) {
      (name == "lr" ? config.run_lr : config.run_mlp) = true;
    }
  }

  ProtocolResult result = run_protocol(records, table, matrix, config);

  char buf[128];
  auto emit = [&buf](const std::string& key, double value) {
    std::snprintf(buf, sizeof(buf), "%s=%.6f", key.c_str(), value);
    std::cout << buf << '\n';
  };
  emit("val_roc_auc", result.val_roc_auc);
  emit("val_pr_auc", result.val_pr_auc);
  emit("test_roc_auc", result.test_roc_auc);
  emit("test_pr_auc", result.test_pr_auc);
  for (const auto& [key, value] : result.extra) emit(key, value);

  if (!opt.out.empty()) {
    json summary;
    summary["mode"] = opt.mode;
    summary["seed"] = opt.seed;
    summary["target_level"] = result.target_level;
    summary["k"] = opt.k;
    summary["train_size"] = result.split.train.size();
    summary["validation_size"] = result.split.validation.size();
    summary["test_size"] = result.split.test.size();
    summary["best_epoch"] = result.train.best_epoch;
    summary["val_roc_auc"] = result.val_roc_auc;
    summary["val_pr_auc"] = result.val_pr_auc;
    summary["test_roc_auc"] = result.test_roc_auc;
    summary["test_pr_auc"] = result.test_pr_auc;
    for (const auto& [key, value] : result.extra) summary[key] = value;
    std::ofstream out(opt.out, std::ios::binary);
    if (!out) throw_io("cannot write summary: " + opt.out);
    out << summary.dump(2) << '\n';
  }
  if (!opt.scores_file.empty()) {
    std::ofstream out(opt.scores_file, std::ios::binary);
    if (!out) throw_io("cannot write scores: " + opt.scores_file);
    for (const TermRecord& rec : records) {
      std::snprintf(buf, sizeof(buf), "%.9f",
                    result.scores[static_cast<std::size_t>(rec.id)]);
      out << rec.id << '\t' << rec.surface << '\t' << buf << '\n';
    }
  }
  return 0;
}

int cmd_score(const CommonOpts& opt) {
  require_artifact(opt.ckpt, "checkpoint", "train");
  require_artifact(opt.terms, "term inventory", "synth");
  require_artifact(opt.vectors, "word vectors", "synth");
  require_artifact(opt.index_file, "core index", "index");
  require_artifact(opt.graph_file, "term graph", "graph");

  Checkpoint ckpt = load_checkpoint(opt.ckpt);
  auto records = load_term_records(opt.terms);
  auto table = load_word_vectors(opt.vectors);
  CoreIndex index = CoreIndex::load(opt.index_file);
  CoreFringeGraph graph = load_graph(opt.graph_file);
  FeatureMatrix features = build_feature_matrix(records, table);
  if (input_signature(graph, features.x) != ckpt.input_hash) {
    log_error("warning: graph/features differ from the training inputs; "
              "scores may not match the trained model's world");
  }

  Mat x = features.x;
  NormAdjacency adj = normalize_adjacency(graph);
  auto surfaces = surface_index(records);

  std::string line;
  char buf[64];
  while (std::getline(std::cin, line)) {
    std::string surface = normalize_surface(line);
    if (surface.empty()) continue;
    int id;
    auto it = surfaces.find(surface);
    if (it != surfaces.end()) {
      id = it->second;
    } else {
      id = attach_fringe(graph, records, index, surface);
      surfaces.emplace(surface, id);
      Vec row = feature_row(surface, table);
      x.conservativeResize(x.rows() + 1, Eigen::NoChange);
      x.row(x.rows() - 1) = row.transpose();
      adj = normalize_adjacency(graph);
    }
    double score = score_terms(ckpt.params, adj, x, {id})[0];
    std::snprintf(buf, sizeof(buf), "%.9f", score);
    std::cout << surface << '\t' << buf << '\n';
  }
  return 0;
}

int cmd_rank(const CommonOpts& opt) {
  require_artifact(opt.ckpt, "checkpoint", "train");
  require_artifact(opt.terms, "term inventory", "synth");
  require_artifact(opt.vectors, "word vectors", "synth");
  require_artifact(opt.graph_file, "term graph", "graph");

  Checkpoint ckpt = load_checkpoint(opt.ckpt);
  auto records = load_term_records(opt.terms);
  auto table = load_word_vectors(opt.vectors);
  CoreFringeGraph graph = load_graph(opt.graph_file);
  FeatureMatrix features = build_feature_matrix(records, table);
  if (input_signature(graph, features.x) != ckpt.input_hash) {
    log_error("warning: graph/features differ from the training inputs");
  }
  NormAdjacency adj = normalize_adjacency(graph);
  std::vector<int> all_ids(records.size());
  std::iota(all_ids.begin(), all_ids.end(), 0);
  std::vector<double> scores =
      score_terms(ckpt.params, adj, features.x, all_ids);
  std::vector<RankEntry> entries =
      rank_report(scores, parse_bands(opt.bands));
  write_rank_report(entries, records, opt.out);
  log_info("rank: wrote " + std::to_string(entries.size()) + " rows to " +
           opt.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"termrel: fine-grained domain relevance of terms"};
  app.require_subcommand(1);
  CommonOpts opt;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", opt.spec_file, "key=value generator spec")
      ->required();
  auto* synth_seed = synth->add_option("--seed", opt.seed, "random seed");
  synth->add_option("--out", opt.out, "output directory")->required();

  auto* index = app.add_subcommand("index", "build the core description index");
  index->add_option("--terms", opt.terms)->required();
  index->add_option("--out", opt.out)->required();

  auto* graph = app.add_subcommand("graph", "build the core-anchored term graph");
  graph->add_option("--terms", opt.terms)->required();
  graph->add_option("--index", opt.index_file)->required();
  graph->add_option("--k", opt.k, "max links per term (default 5)");
  graph->add_option("--out", opt.out)->required();

  auto* annotate = app.add_subcommand("annotate", "label core terms per level");
  annotate->add_option("--terms", opt.terms)->required();
  annotate->add_option("--tree", opt.tree)->required();
  annotate->add_option("--hierarchy", opt.hierarchy)->required();
  annotate->add_option("--out", opt.out)->required();

  auto add_hyper = [&opt](CLI::App* cmd) {
    cmd->add_option("--mode", opt.mode, "cfl|hicfl|pu");
    cmd->add_option("--alpha", opt.alpha, "global/local blend (default 0.5)");
    cmd->add_option("--lr", opt.lr, "learning rate (default 0.01)");
    cmd->add_option("--epochs", opt.epochs, "training epochs (default 300)");
    cmd->add_option("--dropout", opt.dropout, "dropout ratio (default 0.5)");
    cmd->add_option("--hidden", opt.hidden, "hidden width (default 256)");
    cmd->add_option("--seed", opt.seed, "random seed");
    cmd->add_option("--target-level", opt.target_level,
                    "supervised level (default: deepest)");
    cmd->add_option("--positives", opt.positives,
                    "positive surfaces, one per line (pu mode)");
  };

  auto* train = app.add_subcommand("train", "train a relevance model");
  train->add_option("--terms", opt.terms)->required();
  train->add_option("--vectors", opt.vectors)->required();
  train->add_option("--graph", opt.graph_file)->required();
  train->add_option("--labels", opt.labels)->required();
  train->add_option("--ckpt", opt.ckpt, "checkpoint output")->required();
  train->add_option("--log", opt.log_file, "training log (default <ckpt>.log)");
  train->add_option("--val-ratio", opt.val_ratio,
                    "held-out share for epoch selection (default 0.1)");
  add_hyper(train);

  auto* eval = app.add_subcommand("eval", "run the held-out evaluation protocol");
  eval->add_option("--terms", opt.terms)->required();
  eval->add_option("--vectors", opt.vectors)->required();
  eval->add_option("--tree", opt.tree)->required();
  eval->add_option("--hierarchy", opt.hierarchy)->required();
  eval->add_option("--k", opt.k);
  eval->add_option("--baselines", opt.baselines, "comma list of lr,mlp");
  eval->add_option("--pu-count", opt.pu_count,
                   "sampled positives in pu mode (default 20)");
  eval->add_option("--out", opt.out, "JSON summary path");
  eval->add_option("--scores", opt.scores_file, "per-term score TSV");
  add_hyper(eval);

  auto* score = app.add_subcommand("score", "score query terms from stdin");
  score->add_option("--ckpt", opt.ckpt)->required();
  score->add_option("--terms", opt.terms)->required();
  score->add_option("--vectors", opt.vectors)->required();
  score->add_option("--index", opt.index_file)->required();
  score->add_option("--graph", opt.graph_file)->required();

  auto* rank = app.add_subcommand("rank", "write a ranked term listing");
  rank->add_option("--ckpt", opt.ckpt)->required();
  rank->add_option("--terms", opt.terms)->required();
  rank->add_option("--vectors", opt.vectors)->required();
  rank->add_option("--graph", opt.graph_file)->required();
  rank->add_option("--bands", opt.bands, "rank bands, e.g. 1-10,101-110");
  rank->add_option("--out", opt.out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(opt, synth_seed->count() > 0);
    if (index->parsed()) return cmd_index(opt);
    if (graph->parsed()) return cmd_graph(opt);
    if (annotate->parsed()) return cmd_annotate(opt);
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (score->parsed()) return cmd_score(opt);
    if (rank->parsed()) return cmd_rank(opt);
  } catch (const MissingArtifact& e) {
    log_error(e.message);
    return 2;
  } catch (const Error& e) {
    log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log_error(std::string("unexpected: ") + e.what());
    return 1;
  }
  return 0;
}
