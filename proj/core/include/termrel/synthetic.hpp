#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "termrel/annotation.hpp"
#include "termrel/records.hpp"

namespace termrel {

/// Parameters of the synthetic benchmark generator. It fabricates a term
/// inventory with nested domain levels (every level-l+1 term also belongs
/// to level l), core descriptions that mention related terms, a category
/// graph whose bounded traversal recovers the level structure, and a word
/// vector table whose compositional sums carry the level signal.
struct SyntheticSpec {
  std::vector<std::string> level_names = {"cs", "ai", "ml"};
  std::vector<int> level_counts = {800, 300, 120};  // nested, decreasing
  int background_terms = -1;  // terms in no domain level; -1 = level_counts[0]
  double core_ratio = 0.5;    // in (0, 1]
  int feature_dim = 32;
  int vocab_size = 2400;
  double noise = 0.05;  // in [0, 1): misleading surfaces, OOV surfaces,
                        //             off-topic description mentions,
                        //             off-level categories
};

struct SyntheticDataset {
  std::vector<TermRecord> records;
  CategoryTree tree;
  WordVectorTable vectors;
  std::vector<HierarchyLevel> hierarchy;  // names, roots, traversal depths
  // Ground-truth membership per level over ALL terms (core and fringe).
  std::vector<std::vector<signed char>> truth;

  /// Truth restricted to core terms (fringe set to unlabeled), as the
  /// automatic annotation path would produce it on noise-free categories.
  LabelMatrix core_truth() const;
};

/// Deterministic: identical (spec, seed) pairs produce identical datasets.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec,
                                            std::uint64_t seed);

/// key=value config file (levels=cs:800,ai:300,ml:120 / core_ratio=0.5 /
/// dim=32 / vocab=2400 / noise=0.05 / background=800 / seed=7).
/// Returns the spec and, through `seed_out`, an optional seed key (left
/// untouched when absent).
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path,
                                  std::uint64_t* seed_out = nullptr);

/// Writes terms.tsv (+ descriptions/), vectors.txt, tree.tsv,
/// hierarchy.cfg and truth_labels.tsv under `dir`.
void write_synthetic_dataset(const SyntheticDataset& data,
                             const std::filesystem::path& dir);

}  // namespace termrel
