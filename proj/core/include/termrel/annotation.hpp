#pragma once

#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "termrel/records.hpp"

namespace termrel {

/// One level of a domain hierarchy, broadest first (e.g. a three-level
/// computer-science > artificial-intelligence > machine-learning chain).
struct HierarchyLevel {
  std::string name;
  std::string root_category;  // normalized
  int depth = 0;              // traversal depth for gold collection
};

struct DomainHierarchy {
  std::vector<HierarchyLevel> levels;
  std::vector<std::unordered_set<std::string>> gold;  // one set per level

  int depth() const { return static_cast<int>(levels.size()); }
};

/// Per-level binary labels over term ids. Entries are 1 (positive),
/// 0 (negative) or -1 (unlabeled: fringe terms, and the target level in the
/// positive-unlabeled setting).
struct LabelMatrix {
  int n = 0;
  std::vector<std::vector<signed char>> y;  // levels x n
  int demoted = 0;  // labels flipped to keep levels monotone

  int depth() const { return static_cast<int>(y.size()); }
};

/// Supervision for a target domain one level below the deepest
/// automatically labeled one: a handful of user-given positives plus all
/// the parent level's negatives as reliable negatives.
struct PULabelSet {
  int target_level = 0;  // index the target would have in a full matrix
  std::vector<int> positives;
  std::vector<int> reliable_negatives;
  std::vector<int> unlabeled;  // remaining core ids
};

/// Breadth-first collection of category names reachable from `root` within
/// `depth` edge levels, the root included. Cycle-safe.
std::unordered_set<std::string> collect_gold_subcategories(
    const CategoryTree& tree, const std::string& root, int depth);

/// A core term is positive iff its surface equals a gold category name or
/// one of its listed categories is gold. Fringe entries get -1.
std::vector<signed char> annotate(const std::vector<TermRecord>& records,
                                  const std::unordered_set<std::string>& gold);

/// Stacks per-level label vectors and repairs monotonicity: a term positive
/// at level l+1 but negative at level l is demoted to negative.
LabelMatrix build_label_matrix(
    const std::vector<std::vector<signed char>>& per_level);

/// Gold collection + per-level annotation + monotone stacking in one step.
LabelMatrix annotate_hierarchy(const std::vector<TermRecord>& records,
                               const DomainHierarchy& hierarchy);

/// `matrix` holds the automatically labeled levels; its deepest level
/// provides the reliable negatives. Positive surfaces must resolve to
/// existing terms.
PULabelSet build_pu_labels(const LabelMatrix& matrix,
                           const std::vector<std::string>& positive_surfaces,
                           const std::vector<TermRecord>& records);

/// Hierarchy config file: ordered `level-name<TAB>root-category<TAB>depth`
/// lines, broadest level first.
std::vector<HierarchyLevel> load_hierarchy_config(
    const std::filesystem::path& path);

void write_hierarchy_config(const std::vector<HierarchyLevel>& levels,
                            const std::filesystem::path& path);

DomainHierarchy build_domain_hierarchy(
    const CategoryTree& tree, const std::vector<HierarchyLevel>& levels);

/// Label file: `term-id<TAB>level<TAB>0|1` lines, unlabeled entries omitted.
void write_labels(const LabelMatrix& matrix, const std::filesystem::path& path);

LabelMatrix load_labels(const std::filesystem::path& path, int n);

}  // namespace termrel
