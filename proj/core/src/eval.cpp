#include "termrel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "termrel/error.hpp"
#include "termrel/index.hpp"
#include "termrel/log.hpp"
#include "termrel/rng.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;

namespace termrel {

// --- metrics -----------------------------------------------------------------

namespace {

void check_binary(const std::vector<double>& scores,
                  const std::vector<signed char>& labels, int& n_pos,
                  int& n_neg) {
  if (scores.size() != labels.size()) {
    throw_validation("metrics: scores and labels differ in length");
  }
  n_pos = 0;
  n_neg = 0;
  for (signed char y : labels) {
    if (y == 1) {
      ++n_pos;
    } else if (y == 0) {
      ++n_neg;
    } else {
      throw_validation("metrics: labels must be 0 or 1");
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw_validation("metrics need at least one positive and one negative");
  }
}

}  // namespace

double roc_auc(const std::vector<double>& scores,
               const std::vector<signed char>& labels) {
  int n_pos = 0, n_neg = 0;
  check_binary(scores, labels, n_pos, n_neg);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Midranks over tie groups; U statistic over positives.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double u = rank_sum_pos -
                   0.5 * static_cast<double>(n_pos) *
                       (static_cast<double>(n_pos) + 1.0);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double pr_auc(const std::vector<double>& scores,
              const std::vector<signed char>& labels) {
  int n_pos = 0, n_neg = 0;
  check_binary(scores, labels, n_pos, n_neg);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  // Average precision over threshold groups (tied scores enter together).
  double ap = 0.0;
  double tp = 0.0, fp = 0.0, prev_recall = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
    }
    const double precision = tp / (tp + fp);
    const double recall = tp / static_cast<double>(n_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

// --- splits -------------------------------------------------------------------

std::vector<int> SplitPlan::demoted() const {
  std::vector<int> ids = validation;
  ids.insert(ids.end(), test.begin(), test.end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

SplitPlan make_splits(const std::vector<int>& labeled_ids,
                      const std::vector<signed char>& target_labels,
                      double train_ratio, double val_ratio, double test_ratio,
                      std::uint64_t seed, bool stratified) {
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw_validation("split ratios must sum to 1");
  }
  if (labeled_ids.empty()) throw_validation("no labeled ids to split");

  std::vector<std::vector<int>> groups;
  if (stratified) {
    groups.resize(2);
    for (int id : labeled_ids) {
      const signed char y = target_labels[static_cast<std::size_t>(id)];
      if (y < 0) {
        throw_validation("unlabeled id passed to make_splits: " +
                         std::to_string(id));
      }
      groups[static_cast<std::size_t>(y)].push_back(id);
    }
  } else {
    groups.push_back(labeled_ids);
  }

  SplitPlan plan;
  plan.seed = seed;
  Rng rng(seed ^ 0x51b7a2f09c3dull);
  for (auto& group : groups) {
    if (group.empty()) continue;
    std::sort(group.begin(), group.end());
    rng.shuffle(group);
    const auto n = static_cast<double>(group.size());
    auto n_test = static_cast<std::size_t>(std::lround(test_ratio * n));
    auto n_val = static_cast<std::size_t>(std::lround(val_ratio * n));
    while (n_test + n_val > group.size()) {
      if (n_test > 0) --n_test; else --n_val;
    }
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (i < n_test) {
        plan.test.push_back(group[i]);
      } else if (i < n_test + n_val) {
        plan.validation.push_back(group[i]);
      } else {
        plan.train.push_back(group[i]);
      }
    }
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.validation.begin(), plan.validation.end());
  std::sort(plan.test.begin(), plan.test.end());

  for (const auto* split : {&plan.train, &plan.validation, &plan.test}) {
    bool has_positive = false;
    for (int id : *split) {
      if (target_labels[static_cast<std::size_t>(id)] == 1) {
        has_positive = true;
        break;
      }
    }
    if (!has_positive) {
      throw_validation("a split ended up without positive labels; "
                       "more labeled positives are needed");
    }
  }
  return plan;
}

// --- relative domain frequency -------------------------------------------------

std::unordered_map<std::string, double> load_frequency_table(
    const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open frequency table: " + path.string());
  std::unordered_map<std::string, double> table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected `surface<TAB>count`");
    }
    try {
      table[normalize_surface(line.substr(0, tab))] =
          std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": count is not numeric");
    }
  }
  return table;
}

std::vector<double> rdf_score(
    const std::vector<TermRecord>& records,
    const std::unordered_map<std::string, double>& freq_specific,
    const std::unordered_map<std::string, double>& freq_general,
    std::vector<std::uint8_t>* included) {
  std::vector<double> scores(records.size(), 0.0);
  if (included != nullptr) included->assign(records.size(), 1);
  int excluded = 0;
  for (const TermRecord& rec : records) {
    auto idx = static_cast<std::size_t>(rec.id);
    auto g = freq_general.find(rec.surface);
    if (g == freq_general.end() || g->second <= 0.0) {
      if (included != nullptr) (*included)[idx] = 0;
      ++excluded;
      continue;
    }
    auto s = freq_specific.find(rec.surface);
    scores[idx] = s == freq_specific.end() ? 0.0 : s->second / g->second;
  }
  if (excluded > 0) {
    log_info("rdf: excluded " + std::to_string(excluded) +
             " terms missing from the general corpus");
  }
  return scores;
}

// --- ranking -------------------------------------------------------------------

std::vector<RankBand> parse_bands(const std::string& text) {
  std::vector<RankBand> bands;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string item = text.substr(
        start, comma == std::string::npos ? comma : comma - start);
    if (!item.empty()) {
      RankBand band;
      std::size_t dash = item.find('-');
      try {
        if (dash == std::string::npos) {
          band.lo = band.hi = std::stoi(item);
        } else {
          band.lo = std::stoi(item.substr(0, dash));
          band.hi = std::stoi(item.substr(dash + 1));
        }
      } catch (const std::exception&) {
        throw_parse("bad rank band '" + item + "'");
      }
      if (band.lo < 1 || band.hi < band.lo) {
        throw_validation("bad rank band '" + item + "'");
      }
      bands.push_back(band);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return bands;
}

std::vector<RankEntry> rank_report(const std::vector<double>& scores,
                                   const std::vector<RankBand>& bands) {
  const int n = static_cast<int>(scores.size());
  for (const RankBand& band : bands) {
    if (band.hi > n) {
      throw_validation("rank band " + std::to_string(band.lo) + "-" +
                       std::to_string(band.hi) + " exceeds " +
                       std::to_string(n) + " scored terms");
    }
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] !=
        scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] >
             scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  std::vector<RankEntry> entries;
  auto emit = [&](int lo, int hi) {
    for (int r = lo; r <= hi; ++r) {
      entries.push_back({r, order[static_cast<std::size_t>(r - 1)],
                         scores[static_cast<std::size_t>(
                             order[static_cast<std::size_t>(r - 1)])]});
    }
  };
  if (bands.empty()) {
    emit(1, n);
  } else {
    for (const RankBand& band : bands) emit(band.lo, band.hi);
  }
  return entries;
}

void write_rank_report(const std::vector<RankEntry>& entries,
                       const std::vector<TermRecord>& records,
                       const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write rank report: " + path.string());
  char buf[64];
  for (const RankEntry& entry : entries) {
    const TermRecord& rec = records[static_cast<std::size_t>(entry.id)];
    std::snprintf(buf, sizeof(buf), "%.9f", entry.score);
    out << entry.rank << '\t' << rec.surface << '\t' << buf << '\t'
        << (rec.is_core ? "core" : "fringe") << '\n';
  }
}

// --- protocol -------------------------------------------------------------------

namespace {

std::pair<double, double> metrics_on(const std::vector<double>& scores,
                                     const std::vector<signed char>& labels,
                                     const std::vector<int>& ids) {
  std::vector<double> s;
  std::vector<signed char> y;
  s.reserve(ids.size());
  for (int id : ids) {
    const signed char v = labels[static_cast<std::size_t>(id)];
    if (v < 0) continue;
    s.push_back(scores[static_cast<std::size_t>(id)]);
    y.push_back(v);
  }
  return {roc_auc(s, y), pr_auc(s, y)};
}

}  // namespace

ProtocolResult run_protocol(const std::vector<TermRecord>& records,
                            const WordVectorTable& vectors,
                            const LabelMatrix& matrix,
                            const ProtocolConfig& config) {
  ProtocolResult result;
  result.target_level =
      config.target_level < 0 ? matrix.depth() - 1 : config.target_level;
  if (result.target_level < 0 || result.target_level >= matrix.depth()) {
    throw_config("target level out of range");
  }
  const auto& target_labels =
      matrix.y[static_cast<std::size_t>(result.target_level)];

  std::vector<int> labeled;
  for (const TermRecord& rec : records) {
    if (rec.is_core && target_labels[static_cast<std::size_t>(rec.id)] >= 0) {
      labeled.push_back(rec.id);
    }
  }
  result.split =
      make_splits(labeled, target_labels, config.train_ratio, config.val_ratio,
                  config.test_ratio, config.train.seed, config.stratified);

  // Demote held-out terms and rebuild retrieval structures without them.
  std::vector<TermRecord> demoted =
      demote_records(records, result.split.demoted());
  CoreIndex index = build_index(demoted);
  CoreFringeGraph graph = build_graph(demoted, index, config.k);
  NormAdjacency adj = normalize_adjacency(graph);
  FeatureMatrix features = build_feature_matrix(demoted, vectors);

  // Supervision for the requested mode.
  Supervision sup;
  TrainConfig train_config = config.train;
  if (config.pu) {
    if (train_config.mode != ModelMode::HiCFL) {
      throw_config("positive-unlabeled training runs the hierarchical model");
    }
    if (result.target_level < 1) {
      throw_config("positive-unlabeled mode needs a labeled parent level");
    }
    // Trim the matrix to the automatically labeled parent levels.
    LabelMatrix parents;
    parents.n = matrix.n;
    parents.y.assign(matrix.y.begin(),
                     matrix.y.begin() + result.target_level);
    if (!config.pu_positive_surfaces.empty()) {
      result.pu = build_pu_labels(parents, config.pu_positive_surfaces, records);
    } else {
      // Sample the given positives from the training split.
      std::vector<int> candidates;
      for (int id : result.split.train) {
        if (target_labels[static_cast<std::size_t>(id)] == 1) {
          candidates.push_back(id);
        }
      }
      if (static_cast<int>(candidates.size()) < config.pu_positive_count) {
        throw_validation("not enough training positives to sample " +
                         std::to_string(config.pu_positive_count));
      }
      Rng rng(config.train.seed ^ 0x9d2c5680aa7f3e11ull);
      rng.shuffle(candidates);
      candidates.resize(static_cast<std::size_t>(config.pu_positive_count));
      std::sort(candidates.begin(), candidates.end());
      result.pu.target_level = parents.depth();
      result.pu.positives = candidates;
      std::unordered_set<int> pos(candidates.begin(), candidates.end());
      const auto& parent = parents.y.back();
      for (const TermRecord& rec : records) {
        if (!rec.is_core || pos.count(rec.id) > 0) continue;
        if (parent[static_cast<std::size_t>(rec.id)] == 0) {
          result.pu.reliable_negatives.push_back(rec.id);
        } else {
          result.pu.unlabeled.push_back(rec.id);
        }
      }
    }
    result.pu_given_positives = result.pu.positives;
    sup = pu_supervision(parents, result.pu, result.split.train);
  } else if (train_config.mode == ModelMode::HiCFL) {
    sup = hicfl_supervision(matrix, result.split.train);
  } else {
    sup = cfl_supervision(matrix, result.target_level, result.split.train);
  }

  result.train = train_model(train_config, adj, features.x, sup,
                             result.split.validation, target_labels);

  std::vector<int> all_ids(records.size());
  std::iota(all_ids.begin(), all_ids.end(), 0);
  result.scores = score_terms(result.train.params, adj, features.x, all_ids);

  auto [val_roc, val_pr] =
      metrics_on(result.scores, target_labels, result.split.validation);
  result.val_roc_auc = val_roc;
  result.val_pr_auc = val_pr;
  auto [test_roc, test_pr] =
      metrics_on(result.scores, target_labels, result.split.test);
  result.test_roc_auc = test_roc;
  result.test_pr_auc = test_pr;

  // Feature-only baselines under the identical split and selection rule.
  std::vector<signed char> baseline_labels;
  if (config.pu) {
    baseline_labels.assign(static_cast<std::size_t>(matrix.n), -1);
    for (int id : result.pu.positives) {
      baseline_labels[static_cast<std::size_t>(id)] = 1;
    }
    for (int id : result.pu.reliable_negatives) {
      baseline_labels[static_cast<std::size_t>(id)] = 0;
    }
  } else {
    baseline_labels = target_labels;
  }
  auto run_one = [&](BaselineKind kind, const std::string& name) {
    BaselineResult baseline =
        train_baseline(kind, features.x, baseline_labels, result.split.train,
                       result.split.validation, target_labels, train_config);
    auto [roc, pr] =
        metrics_on(baseline.scores, target_labels, result.split.test);
    result.extra.emplace_back(name + ".test_roc_auc", roc);
    result.extra.emplace_back(name + ".test_pr_auc", pr);
  };
  if (config.run_lr) run_one(BaselineKind::LogisticRegression, "lr");
  if (config.run_mlp) run_one(BaselineKind::Mlp, "mlp");
  return result;
}

}  // namespace termrel
