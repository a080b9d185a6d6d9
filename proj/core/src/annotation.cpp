#include "termrel/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>

#include "termrel/error.hpp"
#include "termrel/log.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;

namespace termrel {

std::unordered_set<std::string> collect_gold_subcategories(
    const CategoryTree& tree, const std::string& root, int depth) {
  std::string root_name = normalize_surface(root);
  auto it = tree.node_index.find(root_name);
  if (it == tree.node_index.end()) {
    throw_validation("root category not in tree: '" + root_name + "'");
  }
  if (depth < 0) throw_validation("traversal depth must be >= 0");

  std::unordered_set<std::string> gold;
  std::vector<char> visited(tree.nodes.size(), 0);
  std::deque<std::pair<int, int>> queue;  // node, distance from root
  queue.emplace_back(it->second, 0);
  visited[static_cast<std::size_t>(it->second)] = 1;
  while (!queue.empty()) {
    auto [node, dist] = queue.front();
    queue.pop_front();
    gold.insert(tree.nodes[static_cast<std::size_t>(node)]);
    if (dist == depth) continue;
    for (int child : tree.children[static_cast<std::size_t>(node)]) {
      if (!visited[static_cast<std::size_t>(child)]) {
        visited[static_cast<std::size_t>(child)] = 1;
        queue.emplace_back(child, dist + 1);
      }
    }
  }
  return gold;
}

std::vector<signed char> annotate(
    const std::vector<TermRecord>& records,
    const std::unordered_set<std::string>& gold) {
  if (gold.empty()) throw_validation("annotate: empty gold set");
  std::vector<signed char> labels(records.size(), -1);
  for (const TermRecord& rec : records) {
    if (!rec.is_core) continue;
    bool positive = gold.count(rec.surface) > 0;
    if (!positive) {
      for (const std::string& cat : rec.categories) {
        if (gold.count(cat) > 0) {
          positive = true;
          break;
        }
      }
    }
    labels[static_cast<std::size_t>(rec.id)] = positive ? 1 : 0;
  }
  return labels;
}

LabelMatrix build_label_matrix(
    const std::vector<std::vector<signed char>>& per_level) {
  if (per_level.empty()) throw_validation("label matrix needs >= 1 level");
  LabelMatrix matrix;
  matrix.n = static_cast<int>(per_level[0].size());
  for (const auto& level : per_level) {
    if (static_cast<int>(level.size()) != matrix.n) {
      throw_validation("label matrix: level size mismatch");
    }
  }
  matrix.y = per_level;
  for (std::size_t l = 1; l < matrix.y.size(); ++l) {
    for (int i = 0; i < matrix.n; ++i) {
      auto idx = static_cast<std::size_t>(i);
      if (matrix.y[l][idx] == 1 && matrix.y[l - 1][idx] != 1) {
        matrix.y[l][idx] = matrix.y[l - 1][idx];  // demote to parent's state
        ++matrix.demoted;
      }
    }
  }
  if (matrix.demoted > 0) {
    log_debug("label matrix: demoted " + std::to_string(matrix.demoted) +
              " labels to restore hierarchy monotonicity");
  }
  return matrix;
}

LabelMatrix annotate_hierarchy(const std::vector<TermRecord>& records,
                               const DomainHierarchy& hierarchy) {
  if (hierarchy.depth() < 1) throw_validation("hierarchy needs >= 1 level");
  std::vector<std::vector<signed char>> per_level;
  per_level.reserve(hierarchy.gold.size());
  for (const auto& gold : hierarchy.gold) {
    per_level.push_back(annotate(records, gold));
  }
  return build_label_matrix(per_level);
}

PULabelSet build_pu_labels(const LabelMatrix& matrix,
                           const std::vector<std::string>& positive_surfaces,
                           const std::vector<TermRecord>& records) {
  if (matrix.depth() < 1) {
    throw_validation("positive-unlabeled setup needs at least one "
                     "automatically labeled parent level");
  }
  auto surfaces = surface_index(records);
  PULabelSet set;
  set.target_level = matrix.depth();

  std::vector<std::string> missing;
  std::unordered_set<int> pos_ids;
  for (const std::string& raw : positive_surfaces) {
    std::string surf = normalize_surface(raw);
    auto it = surfaces.find(surf);
    if (it == surfaces.end()) {
      missing.push_back(surf);
      continue;
    }
    if (pos_ids.insert(it->second).second) set.positives.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string msg = "positive surfaces not found:";
    for (const std::string& m : missing) msg += " '" + m + "'";
    throw_validation(msg);
  }
  std::sort(set.positives.begin(), set.positives.end());

  const auto& parent = matrix.y.back();
  for (const TermRecord& rec : records) {
    if (!rec.is_core) continue;
    if (pos_ids.count(rec.id) > 0) continue;
    if (rec.id < static_cast<int>(parent.size()) &&
        parent[static_cast<std::size_t>(rec.id)] == 0) {
      set.reliable_negatives.push_back(rec.id);
    } else {
      set.unlabeled.push_back(rec.id);
    }
  }
  return set;
}

std::vector<HierarchyLevel> load_hierarchy_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open hierarchy config: " + path.string());
  std::vector<HierarchyLevel> levels;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected `name<TAB>root-category<TAB>depth`");
    }
    HierarchyLevel level;
    level.name = normalize_surface(line.substr(0, t1));
    level.root_category = normalize_surface(line.substr(t1 + 1, t2 - t1 - 1));
    try {
      level.depth = std::stoi(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": depth is not an integer");
    }
    if (level.name.empty() || level.root_category.empty() || level.depth < 0) {
      throw_validation(path.string() + ":" + std::to_string(line_no) +
                       ": invalid hierarchy level");
    }
    levels.push_back(std::move(level));
  }
  if (levels.empty()) {
    throw_validation(path.string() + ": hierarchy config has no levels");
  }
  return levels;
}

void write_hierarchy_config(const std::vector<HierarchyLevel>& levels,
                            const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write hierarchy config: " + path.string());
  for (const HierarchyLevel& level : levels) {
    out << level.name << '\t' << level.root_category << '\t' << level.depth
        << '\n';
  }
}

DomainHierarchy build_domain_hierarchy(
    const CategoryTree& tree, const std::vector<HierarchyLevel>& levels) {
  DomainHierarchy hierarchy;
  hierarchy.levels = levels;
  for (const HierarchyLevel& level : levels) {
    hierarchy.gold.push_back(
        collect_gold_subcategories(tree, level.root_category, level.depth));
  }
  return hierarchy;
}

void write_labels(const LabelMatrix& matrix, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write labels: " + path.string());
  for (std::size_t l = 0; l < matrix.y.size(); ++l) {
    for (int i = 0; i < matrix.n; ++i) {
      signed char v = matrix.y[l][static_cast<std::size_t>(i)];
      if (v < 0) continue;
      out << i << '\t' << l << '\t' << static_cast<int>(v) << '\n';
    }
  }
}

LabelMatrix load_labels(const fs::path& path, int n) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open labels: " + path.string());
  std::vector<std::vector<signed char>> per_level;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    int id = 0, level = 0, value = 0;
    if (std::sscanf(line.c_str(), "%d\t%d\t%d", &id, &level, &value) != 3 ||
        id < 0 || id >= n || level < 0 || (value != 0 && value != 1)) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected `term-id<TAB>level<TAB>0|1`");
    }
    if (level >= static_cast<int>(per_level.size())) {
      per_level.resize(static_cast<std::size_t>(level) + 1,
                       std::vector<signed char>(static_cast<std::size_t>(n),
                                                -1));
    }
    per_level[static_cast<std::size_t>(level)][static_cast<std::size_t>(id)] =
        static_cast<signed char>(value);
  }
  if (per_level.empty()) throw_validation(path.string() + ": no labels");
  return build_label_matrix(per_level);
}

}  // namespace termrel
