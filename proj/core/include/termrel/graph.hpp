#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "termrel/index.hpp"
#include "termrel/records.hpp"

namespace termrel {

inline constexpr int kDefaultMaxLinks = 5;

/// Directed term graph: edges run from a retrieved core term to the query
/// term. Every node's in-degree is at most 2k. backfill[v] records whether
/// the second (non-exact) retrieval pass ran for v, which happens exactly
/// when the exact pass produced fewer than k links.
struct CoreFringeGraph {
  int n = 0;
  int k = kDefaultMaxLinks;
  std::vector<std::pair<int, int>> edges;  // (core src, dst), sorted
  std::vector<std::uint8_t> backfill;      // per node

  std::vector<int> in_degrees() const;
};

/// Links every term (core and fringe) through the two-pass retrieval rule:
/// top-2k exact-phrase hits first, then plain BM25 backfill up to k links
/// when the exact pass fell short. Self-links are skipped.
CoreFringeGraph build_graph(const std::vector<TermRecord>& records,
                            const CoreIndex& index, int k);

/// Online attachment: appends one fringe node for `surface` and links it by
/// the same two-pass rule. If the surface already names a node, returns that
/// id and changes nothing.
int attach_fringe(CoreFringeGraph& graph, std::vector<TermRecord>& records,
                  const CoreIndex& index, const std::string& surface);

/// Symmetric normalized adjacency with self-loops, CSR layout:
/// entry (i,j) = 1/sqrt((deg_i + 1)(deg_j + 1)) where deg counts distinct
/// symmetrized neighbors. Column indices are sorted within each row, which
/// fixes the floating-point summation order everywhere downstream.
struct NormAdjacency {
  int n = 0;
  std::vector<std::int64_t> row_ptr;
  std::vector<std::int32_t> cols;
  std::vector<double> vals;
  std::vector<std::int32_t> degrees;  // symmetrized neighbor counts

  std::size_t nnz() const { return cols.size(); }
};

NormAdjacency normalize_adjacency(const CoreFringeGraph& graph);

/// Text serialization: a JSON header line (format, n, k, backfill flags)
/// followed by `src<TAB>dst` edge lines.
void save_graph(const CoreFringeGraph& graph,
                const std::filesystem::path& path);
CoreFringeGraph load_graph(const std::filesystem::path& path);

}  // namespace termrel
