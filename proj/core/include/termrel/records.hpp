#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace termrel {

/// One inventory entry. Core terms carry a description document and category
/// names; fringe terms are bare surfaces.
struct TermRecord {
  int id = -1;
  std::string surface;  // normalized: lowercase, single-space separated
  bool is_core = false;
  std::string description;              // core only, non-empty
  std::vector<std::string> categories;  // core only, normalized names
};

/// Category graph. Despite the name "tree" in common usage, real category
/// systems contain shared children and cycles, so this is a plain directed
/// graph; traversals must carry a visited set.
struct CategoryTree {
  std::vector<std::string> nodes;                  // normalized names
  std::unordered_map<std::string, int> node_index;
  std::vector<std::pair<int, int>> edges;          // parent -> child
  std::vector<std::vector<int>> children;          // adjacency by node index

  bool has_node(const std::string& normalized_name) const {
    return node_index.count(normalized_name) > 0;
  }
  int add_node(const std::string& normalized_name);
  /// Returns false (and adds nothing) on duplicate edge.
  bool add_edge(int parent, int child);
};

struct WordVectorTable {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  bool empty() const { return vectors.empty(); }
};

/// Inventory TSV: surface<TAB>core|fringe<TAB>description-path-or-empty<TAB>
/// semicolon-separated-categories. Description paths are resolved relative
/// to the TSV's directory. Ids are assigned in file order starting at 0.
/// Duplicate fringe surfaces are dropped with a warning; a core line whose
/// surface was already seen as fringe upgrades that record in place;
/// duplicate core surfaces are an error.
std::vector<TermRecord> load_term_records(const std::filesystem::path& path);

/// Inverse of load_term_records up to normalization: writes the TSV and one
/// description file per core term under desc_dir (created if needed).
void write_term_records(const std::vector<TermRecord>& records,
                        const std::filesystem::path& tsv_path,
                        const std::filesystem::path& desc_dir);

/// Plain text, one `token v1 v2 ... vd` per line. Later duplicate tokens
/// overwrite earlier ones. Dimension is fixed by the first line.
WordVectorTable load_word_vectors(const std::filesystem::path& path);

void write_word_vectors(const WordVectorTable& table,
                        const std::filesystem::path& path);

/// Edge list, one `parent<TAB>child` per line. Cycles are accepted;
/// self-edges, blank names and duplicate edges are rejected.
CategoryTree load_category_tree(const std::filesystem::path& path);

void write_category_tree(const CategoryTree& tree,
                         const std::filesystem::path& path);

/// Index of normalized surface -> record id. Surfaces are unique after
/// load_term_records.
std::unordered_map<std::string, int> surface_index(
    const std::vector<TermRecord>& records);

/// Evaluation helper: a copy of `records` where every id in `ids` is turned
/// into a fringe record (description and categories dropped), so held-out
/// terms re-link through the same path as genuine fringe terms.
std::vector<TermRecord> demote_records(const std::vector<TermRecord>& records,
                                       const std::vector<int>& ids);

}  // namespace termrel
