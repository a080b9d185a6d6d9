#include "termrel/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "termrel/error.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace termrel {

std::vector<int> CoreFringeGraph::in_degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  for (const auto& [src, dst] : edges) {
    ++deg[static_cast<std::size_t>(dst)];
  }
  return deg;
}

namespace {

/// The two-pass linking rule for a single query term. Returns the incoming
/// edge sources and whether the backfill pass ran.
std::pair<std::vector<int>, bool> link_term(const CoreIndex& index,
                                            const std::string& surface,
                                            int self_id, int k) {
  std::vector<int> sources;
  for (const SearchHit& hit : index.search(surface, /*exact=*/true, 2 * k)) {
    if (hit.term_id == self_id) continue;
    sources.push_back(hit.term_id);
  }
  bool backfill = static_cast<int>(sources.size()) < k;
  if (backfill) {
    std::unordered_set<int> have(sources.begin(), sources.end());
    for (const SearchHit& hit : index.search(surface, /*exact=*/false, 2 * k)) {
      if (static_cast<int>(sources.size()) >= k) break;
      if (hit.term_id == self_id || have.count(hit.term_id) > 0) continue;
      have.insert(hit.term_id);
      sources.push_back(hit.term_id);
    }
  }
  return {std::move(sources), backfill};
}

}  // namespace

CoreFringeGraph build_graph(const std::vector<TermRecord>& records,
                            const CoreIndex& index, int k) {
  if (k < 1) throw_validation("graph: k must be >= 1");
  CoreFringeGraph graph;
  graph.n = static_cast<int>(records.size());
  graph.k = k;
  graph.backfill.assign(static_cast<std::size_t>(graph.n), 0);
  for (const TermRecord& rec : records) {
    auto [sources, backfill] = link_term(index, rec.surface, rec.id, k);
    graph.backfill[static_cast<std::size_t>(rec.id)] = backfill ? 1 : 0;
    for (int src : sources) graph.edges.emplace_back(src, rec.id);
  }
  std::sort(graph.edges.begin(), graph.edges.end());
  return graph;
}

int attach_fringe(CoreFringeGraph& graph, std::vector<TermRecord>& records,
                  const CoreIndex& index, const std::string& surface) {
  std::string normalized = normalize_surface(surface);
  if (normalized.empty()) {
    throw_validation("attach_fringe: surface normalizes to empty");
  }
  for (const TermRecord& rec : records) {
    if (rec.surface == normalized) return rec.id;
  }
  TermRecord rec;
  rec.id = graph.n;
  rec.surface = normalized;
  rec.is_core = false;
  auto [sources, backfill] = link_term(index, normalized, rec.id, graph.k);
  records.push_back(std::move(rec));
  graph.backfill.push_back(backfill ? 1 : 0);
  for (int src : sources) graph.edges.emplace_back(src, graph.n);
  std::sort(graph.edges.begin(), graph.edges.end());
  graph.n += 1;
  return graph.n - 1;
}

NormAdjacency normalize_adjacency(const CoreFringeGraph& graph) {
  if (graph.n < 1) throw_validation("normalize_adjacency: empty graph");
  const auto n = static_cast<std::size_t>(graph.n);

  // Symmetrize and deduplicate neighbor sets.
  std::vector<std::vector<std::int32_t>> nbrs(n);
  for (const auto& [src, dst] : graph.edges) {
    if (src == dst) continue;
    nbrs[static_cast<std::size_t>(src)].push_back(dst);
    nbrs[static_cast<std::size_t>(dst)].push_back(src);
  }
  NormAdjacency adj;
  adj.n = graph.n;
  adj.degrees.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& list = nbrs[i];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    adj.degrees[i] = static_cast<std::int32_t>(list.size());
  }

  adj.row_ptr.resize(n + 1, 0);
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < n; ++i) nnz += nbrs[i].size() + 1;
  adj.cols.reserve(nnz);
  adj.vals.reserve(nnz);
  for (std::size_t i = 0; i < n; ++i) {
    const double di = std::sqrt(static_cast<double>(adj.degrees[i]) + 1.0);
    bool self_emitted = false;
    auto emit_self = [&] {
      adj.cols.push_back(static_cast<std::int32_t>(i));
      adj.vals.push_back(1.0 / (di * di));
      self_emitted = true;
    };
    for (std::int32_t j : nbrs[i]) {
      if (!self_emitted && static_cast<std::size_t>(j) > i) emit_self();
      const double dj =
          std::sqrt(static_cast<double>(adj.degrees[static_cast<std::size_t>(j)]) + 1.0);
      adj.cols.push_back(j);
      adj.vals.push_back(1.0 / (di * dj));
    }
    if (!self_emitted) emit_self();
    adj.row_ptr[i + 1] = static_cast<std::int64_t>(adj.cols.size());
  }
  return adj;
}

void save_graph(const CoreFringeGraph& graph, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write graph: " + path.string());
  json header;
  header["format"] = "termrel-graph";
  header["version"] = 1;
  header["n"] = graph.n;
  header["k"] = graph.k;
  header["backfill"] = graph.backfill;
  out << header.dump() << '\n';
  for (const auto& [src, dst] : graph.edges) {
    out << src << '\t' << dst << '\n';
  }
}

CoreFringeGraph load_graph(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open graph: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw_corrupt("graph file is empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw_corrupt("graph header is not valid JSON: " + std::string(e.what()));
  }
  if (header.value("format", "") != "termrel-graph" ||
      header.value("version", 0) != 1) {
    throw_corrupt("unsupported graph file format/version");
  }
  CoreFringeGraph graph;
  graph.n = header.at("n").get<int>();
  graph.k = header.at("k").get<int>();
  graph.backfill = header.at("backfill").get<std::vector<std::uint8_t>>();
  if (static_cast<int>(graph.backfill.size()) != graph.n) {
    throw_corrupt("graph header backfill length mismatch");
  }
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    int src = 0, dst = 0;
    if (std::sscanf(line.c_str(), "%d\t%d", &src, &dst) != 2 || src < 0 ||
        dst < 0 || src >= graph.n || dst >= graph.n) {
      throw_corrupt(path.string() + ":" + std::to_string(line_no) +
                    ": bad edge line");
    }
    graph.edges.emplace_back(src, dst);
  }
  std::sort(graph.edges.begin(), graph.edges.end());
  return graph;
}

}  // namespace termrel
