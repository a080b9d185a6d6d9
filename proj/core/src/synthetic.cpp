#include "termrel/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "termrel/error.hpp"
#include "termrel/rng.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;

namespace termrel {

namespace {

// Feature geometry: level-l tokens sit at signal_scale on axis l, background
// tokens on the remaining axes, everything plus bounded jitter. The bound is
// chosen so that at noise = 0 every level is exactly linearly separable from
// the rest of the inventory even for three-token surfaces.
constexpr double kSignalScale = 4.0;
constexpr double kJitter = 0.15;

std::string token_name(int idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%04d", idx);
  return buf;
}

void validate(const SyntheticSpec& spec) {
  const int depth = static_cast<int>(spec.level_counts.size());
  if (depth < 1 || spec.level_names.size() != spec.level_counts.size()) {
    throw_config("synthetic spec: need >= 1 level with matching names");
  }
  for (int l = 0; l < depth; ++l) {
    if (spec.level_counts[static_cast<std::size_t>(l)] < 1) {
      throw_config("synthetic spec: level counts must be positive");
    }
    if (l > 0 && spec.level_counts[static_cast<std::size_t>(l)] >
                     spec.level_counts[static_cast<std::size_t>(l - 1)]) {
      throw_config("synthetic spec: level counts must be nested "
                   "(non-increasing)");
    }
  }
  if (!(spec.core_ratio > 0.0 && spec.core_ratio <= 1.0)) {
    throw_config("synthetic spec: core_ratio must be in (0, 1]");
  }
  if (spec.feature_dim < depth + 2) {
    throw_config("synthetic spec: feature_dim must be >= levels + 2");
  }
  if (spec.noise < 0.0 || spec.noise >= 1.0) {
    throw_config("synthetic spec: noise must be in [0, 1)");
  }
  if (spec.vocab_size < 16 * (depth + 3)) {
    throw_config("synthetic spec: vocab_size too small for the level count");
  }
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec,
                                            std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  const int L = static_cast<int>(spec.level_counts.size());
  const int background =
      spec.background_terms < 0 ? spec.level_counts[0] : spec.background_terms;
  const int n = spec.level_counts[0] + background;
  const int d = spec.feature_dim;

  // --- vocabulary ------------------------------------------------------
  // One pool per level, a double-size background pool, and an OOV pool that
  // is deliberately left out of the vector table.
  const int share = spec.vocab_size / (L + 4);
  std::vector<std::pair<int, int>> level_pool(static_cast<std::size_t>(L));
  int next = 0;
  for (int l = 0; l < L; ++l) {
    level_pool[static_cast<std::size_t>(l)] = {next, next + share};
    next += share;
  }
  const std::pair<int, int> bg_pool{next, next + 2 * share};
  next += 2 * share;
  const std::pair<int, int> oov_pool{next, spec.vocab_size};

  SyntheticDataset data;
  data.vectors.dim = d;
  for (int t = 0; t < oov_pool.first; ++t) {
    int axis;
    if (t < bg_pool.first) {
      axis = t / share;  // level pool
    } else {
      axis = L + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - L)));
    }
    std::vector<double> vec(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      vec[static_cast<std::size_t>(j)] = rng.uniform(-kJitter, kJitter);
    }
    vec[static_cast<std::size_t>(axis)] += kSignalScale;
    data.vectors.vectors.emplace(token_name(t), std::move(vec));
  }

  // --- terms -----------------------------------------------------------
  // deepest[i]: -1 for background, otherwise the deepest level the term
  // belongs to; membership is nested downwards.
  std::vector<int> deepest;
  deepest.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < background; ++i) deepest.push_back(-1);
  for (int l = 0; l < L; ++l) {
    int exact = spec.level_counts[static_cast<std::size_t>(l)] -
                (l + 1 < L ? spec.level_counts[static_cast<std::size_t>(l + 1)]
                           : 0);
    for (int i = 0; i < exact; ++i) deepest.push_back(l);
  }
  rng.shuffle(deepest);

  auto draw_from = [&rng](std::pair<int, int> pool) {
    return static_cast<int>(
        pool.first +
        static_cast<int>(rng.below(
            static_cast<std::uint64_t>(pool.second - pool.first))));
  };

  std::vector<TermRecord> records(static_cast<std::size_t>(n));
  std::unordered_set<std::string> used_surfaces;
  std::vector<std::vector<std::string>> surface_tokens(
      static_cast<std::size_t>(n));
  int core_count = 0;
  for (int i = 0; i < n; ++i) {
    auto idx = static_cast<std::size_t>(i);
    const int m = deepest[idx];
    std::pair<int, int> pool = m < 0 ? bg_pool : level_pool[static_cast<std::size_t>(m)];
    // Noise channels on the surface only: the term's true membership (and
    // hence its description mentions) stay intact, but its compositional
    // features become misleading or unavailable.
    if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) {
      int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(L + 1)));
      pool = p == L ? bg_pool : level_pool[static_cast<std::size_t>(p)];
    }
    if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) {
      pool = oov_pool;
    }

    std::vector<std::string> tokens;
    for (int attempt = 0; attempt < 60; ++attempt) {
      tokens.clear();
      double r = rng.uniform();
      int count = r < 0.35 ? 1 : (r < 0.80 ? 2 : 3);
      for (int t = 0; t < count; ++t) tokens.push_back(token_name(draw_from(pool)));
      std::string joined;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t > 0) joined += ' ';
        joined += tokens[t];
      }
      if (used_surfaces.insert(joined).second) {
        records[idx].surface = std::move(joined);
        break;
      }
    }
    if (records[idx].surface.empty()) {
      tokens.push_back("dup" + std::to_string(i));
      std::string joined;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t > 0) joined += ' ';
        joined += tokens[t];
      }
      used_surfaces.insert(joined);
      records[idx].surface = std::move(joined);
    }
    surface_tokens[idx] = std::move(tokens);
    records[idx].id = i;
    records[idx].is_core = rng.bernoulli(spec.core_ratio);
    if (records[idx].is_core) ++core_count;
  }
  if (core_count == 0) records[0].is_core = true;

  // --- categories and the category graph -------------------------------
  // Per-level category pools under per-level roots chained root_0 -> root_1
  // -> ..., so a breadth-first walk of depth L - l from root_l collects
  // exactly the categories of levels l and deeper. A decoy branch and a
  // back edge (cycle) make the traversal non-trivial.
  const int cats_per_level = 8;
  auto cat_name = [&spec](int level, int j) {
    if (level < 0) return "misc area " + std::to_string(j);
    return spec.level_names[static_cast<std::size_t>(level)] + " area " +
           std::to_string(j);
  };
  std::vector<int> roots(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    roots[static_cast<std::size_t>(l)] =
        data.tree.add_node(normalize_surface(spec.level_names[static_cast<std::size_t>(l)]));
  }
  int misc_root = data.tree.add_node("misc");
  for (int l = 0; l < L; ++l) {
    for (int j = 0; j < cats_per_level; ++j) {
      int c = data.tree.add_node(normalize_surface(cat_name(l, j)));
      data.tree.add_edge(roots[static_cast<std::size_t>(l)], c);
    }
    if (l + 1 < L) {
      data.tree.add_edge(roots[static_cast<std::size_t>(l)],
                         roots[static_cast<std::size_t>(l + 1)]);
    }
  }
  for (int j = 0; j < cats_per_level; ++j) {
    int c = data.tree.add_node(normalize_surface(cat_name(-1, j)));
    data.tree.add_edge(misc_root, c);
  }
  for (int j = 0; j < 4; ++j) {
    int c = data.tree.add_node("decoy area " + std::to_string(j));
    data.tree.add_edge(misc_root, c);
  }
  // Cycle: a leaf category points back at the broadest root.
  data.tree.add_edge(
      data.tree.node_index.at(normalize_surface(cat_name(L - 1, 0))),
      roots[0]);

  for (int i = 0; i < n; ++i) {
    auto idx = static_cast<std::size_t>(i);
    if (!records[idx].is_core) continue;
    const int m = deepest[idx];
    int count = 1 + static_cast<int>(rng.below(2));
    for (int c = 0; c < count; ++c) {
      records[idx].categories.push_back(
          normalize_surface(cat_name(m, static_cast<int>(rng.below(cats_per_level)))));
    }
    if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) {
      int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(L + 1)));
      records[idx].categories.push_back(normalize_surface(
          cat_name(p == L ? -1 : p, static_cast<int>(rng.below(cats_per_level)))));
    }
  }

  // --- descriptions ----------------------------------------------------
  std::vector<std::vector<std::string>> docs(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> cores_by_band(static_cast<std::size_t>(L + 1));
  for (int i = 0; i < n; ++i) {
    if (records[static_cast<std::size_t>(i)].is_core) {
      cores_by_band[static_cast<std::size_t>(deepest[static_cast<std::size_t>(i)] + 1)]
          .push_back(i);
    }
  }
  std::vector<int> all_cores;
  for (const auto& band : cores_by_band) {
    all_cores.insert(all_cores.end(), band.begin(), band.end());
  }
  std::sort(all_cores.begin(), all_cores.end());
  // Related cores for a term at deepest level m: cores at m-1, m or m+1.
  std::vector<std::vector<int>> related(static_cast<std::size_t>(L + 1));
  for (int band = 0; band <= L; ++band) {
    auto& rel = related[static_cast<std::size_t>(band)];
    // Background terms (band 0) form their own community; domain terms
    // relate to cores one level up or down.
    const int hi = band == 0 ? 0 : std::min(L, band + 1);
    for (int o = std::max(0, band - 1); o <= hi; ++o) {
      rel.insert(rel.end(), cores_by_band[static_cast<std::size_t>(o)].begin(),
                 cores_by_band[static_cast<std::size_t>(o)].end());
    }
    if (rel.empty()) rel = all_cores;
    std::sort(rel.begin(), rel.end());
  }

  for (int i = 0; i < n; ++i) {
    auto idx = static_cast<std::size_t>(i);
    if (!records[idx].is_core) continue;
    const int m = deepest[idx];
    int len = 40 + static_cast<int>(rng.below(51));
    auto& doc = docs[idx];
    doc.reserve(static_cast<std::size_t>(len) + 8);
    for (const std::string& t : surface_tokens[idx]) doc.push_back(t);
    for (int t = 0; t < len; ++t) {
      double r = rng.uniform();
      std::pair<int, int> pool;
      if (m >= 0 && r < 0.6) {
        pool = level_pool[static_cast<std::size_t>(m)];
      } else if (m > 0 && r < 0.8) {
        pool = level_pool[rng.below(static_cast<std::uint64_t>(m))];
      } else {
        pool = bg_pool;
      }
      doc.push_back(token_name(draw_from(pool)));
    }
  }
  // Mentions: every term's surface is embedded verbatim into a few related
  // core descriptions; that is what the exact-match retrieval pass and
  // therefore the term graph pick up.
  for (int i = 0; i < n; ++i) {
    auto idx = static_cast<std::size_t>(i);
    const auto& rel = related[static_cast<std::size_t>(deepest[idx] + 1)];
    int mentions = 3 + static_cast<int>(rng.below(4));
    for (int t = 0; t < mentions; ++t) {
      int target;
      if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) {
        target = all_cores[rng.below(all_cores.size())];
      } else {
        target = rel[rng.below(rel.size())];
      }
      if (target == i) continue;  // own doc already starts with the surface
      auto& doc = docs[static_cast<std::size_t>(target)];
      std::size_t pos = static_cast<std::size_t>(rng.below(doc.size() + 1));
      doc.insert(doc.begin() + static_cast<std::ptrdiff_t>(pos),
                 surface_tokens[idx].begin(), surface_tokens[idx].end());
    }
  }
  for (int i = 0; i < n; ++i) {
    auto idx = static_cast<std::size_t>(i);
    if (!records[idx].is_core) continue;
    std::string text;
    for (std::size_t t = 0; t < docs[idx].size(); ++t) {
      if (t > 0) text += ' ';
      text += docs[idx][t];
    }
    records[idx].description = std::move(text);
  }

  // --- truth and hierarchy ---------------------------------------------
  data.truth.assign(static_cast<std::size_t>(L),
                    std::vector<signed char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l <= deepest[static_cast<std::size_t>(i)]; ++l) {
      data.truth[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = 1;
    }
  }
  for (int l = 0; l < L; ++l) {
    data.hierarchy.push_back(
        {normalize_surface(spec.level_names[static_cast<std::size_t>(l)]),
         normalize_surface(spec.level_names[static_cast<std::size_t>(l)]),
         L - l});
  }
  data.records = std::move(records);
  return data;
}

LabelMatrix SyntheticDataset::core_truth() const {
  std::vector<std::vector<signed char>> per_level = truth;
  for (auto& level : per_level) {
    for (const TermRecord& rec : records) {
      if (!rec.is_core) level[static_cast<std::size_t>(rec.id)] = -1;
    }
  }
  return build_label_matrix(per_level);
}

SyntheticSpec load_synthetic_spec(const fs::path& path,
                                  std::uint64_t* seed_out) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open synthetic spec: " + path.string());
  SyntheticSpec spec;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    try {
      if (key == "levels") {
        spec.level_names.clear();
        spec.level_counts.clear();
        std::size_t start = 0;
        while (start <= value.size()) {
          std::size_t comma = value.find(',', start);
          std::string item = value.substr(
              start, comma == std::string::npos ? comma : comma - start);
          std::size_t colon = item.find(':');
          if (colon == std::string::npos) {
            throw_parse(path.string() + ":" + std::to_string(line_no) +
                        ": levels entries must be name:count");
          }
          spec.level_names.push_back(normalize_surface(item.substr(0, colon)));
          spec.level_counts.push_back(std::stoi(item.substr(colon + 1)));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
      } else if (key == "background") {
        spec.background_terms = std::stoi(value);
      } else if (key == "core_ratio") {
        spec.core_ratio = std::stod(value);
      } else if (key == "dim") {
        spec.feature_dim = std::stoi(value);
      } else if (key == "vocab") {
        spec.vocab_size = std::stoi(value);
      } else if (key == "noise") {
        spec.noise = std::stod(value);
      } else if (key == "seed") {
        if (seed_out != nullptr) *seed_out = std::stoull(value);
      } else {
        throw_config(path.string() + ":" + std::to_string(line_no) +
                     ": unknown key '" + key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": bad value for '" + key + "'");
    }
  }
  return spec;
}

void write_synthetic_dataset(const SyntheticDataset& data,
                             const fs::path& dir) {
  fs::create_directories(dir);
  write_term_records(data.records, dir / "terms.tsv", dir / "descriptions");
  write_word_vectors(data.vectors, dir / "vectors.txt");
  write_category_tree(data.tree, dir / "tree.tsv");
  write_hierarchy_config(data.hierarchy, dir / "hierarchy.cfg");
  std::ofstream out(dir / "truth_labels.tsv", std::ios::binary);
  if (!out) throw_io("cannot write truth labels");
  for (std::size_t l = 0; l < data.truth.size(); ++l) {
    for (std::size_t i = 0; i < data.truth[l].size(); ++i) {
      out << i << '\t' << l << '\t' << static_cast<int>(data.truth[l][i])
          << '\n';
    }
  }
}

}  // namespace termrel
