#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "termrel/annotation.hpp"
#include "termrel/features.hpp"
#include "termrel/graph.hpp"
#include "termrel/metrics.hpp"
#include "termrel/model.hpp"
#include "termrel/records.hpp"

namespace termrel {

/// Train/validation/test partition of the labeled core terms. Held-out
/// (validation + test) terms are demoted: their descriptions leave the
/// index and they re-link as fringe terms, so evaluation never sees their
/// rich information.
struct SplitPlan {
  std::vector<int> train, validation, test;  // each sorted ascending
  std::uint64_t seed = 0;

  /// The demotion directive: all held-out ids, sorted.
  std::vector<int> demoted() const;
};

/// Random split, stratified by the target-level label by default so small
/// positive classes stay represented. Ratios must sum to 1; every split
/// must contain at least one positive.
SplitPlan make_splits(const std::vector<int>& labeled_ids,
                      const std::vector<signed char>& target_labels,
                      double train_ratio, double val_ratio, double test_ratio,
                      std::uint64_t seed, bool stratified = true);

// --- relative domain frequency baseline -------------------------------------

/// `surface<TAB>count` lines.
std::unordered_map<std::string, double> load_frequency_table(
    const std::filesystem::path& path);

/// freq_specific / freq_general per term. Terms absent from the specific
/// table score 0; terms absent from (or zero in) the general table are
/// excluded (flag cleared) with a warning.
std::vector<double> rdf_score(
    const std::vector<TermRecord>& records,
    const std::unordered_map<std::string, double>& freq_specific,
    const std::unordered_map<std::string, double>& freq_general,
    std::vector<std::uint8_t>* included = nullptr);

// --- feature-only baselines --------------------------------------------------

enum class BaselineKind { LogisticRegression, Mlp };

struct BaselineResult {
  std::vector<double> scores;  // sigmoid outputs for every row of x
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

/// Same optimizer, split discipline and selection metric as the graph
/// models, on features alone. LR is a single sigmoid layer; the MLP has one
/// hidden ReLU layer (config.hidden) with dropout after the activation.
BaselineResult train_baseline(BaselineKind kind, const Mat& x,
                              const std::vector<signed char>& labels,
                              const std::vector<int>& train_ids,
                              const std::vector<int>& val_ids,
                              const std::vector<signed char>& val_labels,
                              const TrainConfig& config);

// --- ranking reports ----------------------------------------------------------

struct RankBand {
  int lo = 1, hi = 1;  // 1-based, inclusive
};

struct RankEntry {
  int rank = 0;
  int id = -1;
  double score = 0.0;
};

/// "1-10,101-110" -> bands.
std::vector<RankBand> parse_bands(const std::string& text);

/// Descending-score ranking (ties by ascending id) restricted to the given
/// bands; all nodes when bands is empty. Bands beyond the score count are
/// an error.
std::vector<RankEntry> rank_report(const std::vector<double>& scores,
                                   const std::vector<RankBand>& bands);

/// TSV: rank<TAB>surface<TAB>score<TAB>core|fringe.
void write_rank_report(const std::vector<RankEntry>& entries,
                       const std::vector<TermRecord>& records,
                       const std::filesystem::path& path);

// --- the full evaluation protocol ---------------------------------------------

struct ProtocolConfig {
  TrainConfig train;
  int k = kDefaultMaxLinks;
  int target_level = -1;  // -1: deepest level of the label matrix
  double train_ratio = 0.8, val_ratio = 0.1, test_ratio = 0.1;
  bool stratified = true;
  bool pu = false;               // positive-unlabeled target level (HiCFL)
  int pu_positive_count = 20;    // sampled from training positives...
  std::vector<std::string> pu_positive_surfaces;  // ...unless given here
  bool run_lr = false;
  bool run_mlp = false;
};

struct ProtocolResult {
  SplitPlan split;
  int target_level = 0;
  TrainResult train;
  std::vector<double> scores;  // trained model over all nodes
  double val_roc_auc = 0.0, val_pr_auc = 0.0;
  double test_roc_auc = 0.0, test_pr_auc = 0.0;
  // Ordered metric lines (baseline test scores etc.) for the summary file.
  std::vector<std::pair<std::string, double>> extra;
  // PU mode bookkeeping: the supervision actually used.
  PULabelSet pu;
  std::vector<int> pu_given_positives;
};

/// Split -> demote -> index -> graph -> features -> train -> score ->
/// metrics, mirroring the offline construction plus held-out evaluation.
ProtocolResult run_protocol(const std::vector<TermRecord>& records,
                            const WordVectorTable& vectors,
                            const LabelMatrix& matrix,
                            const ProtocolConfig& config);

}  // namespace termrel
