#include "termrel/records.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "termrel/error.hpp"
#include "termrel/log.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;

namespace termrel {

int CategoryTree::add_node(const std::string& name) {
  auto it = node_index.find(name);
  if (it != node_index.end()) return it->second;
  int id = static_cast<int>(nodes.size());
  nodes.push_back(name);
  node_index.emplace(name, id);
  children.emplace_back();
  return id;
}

bool CategoryTree::add_edge(int parent, int child) {
  for (int c : children[parent]) {
    if (c == child) return false;
  }
  edges.emplace_back(parent, child);
  children[parent].push_back(child);
  return true;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<TermRecord> load_term_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open term inventory: " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : ".";

  std::vector<TermRecord> records;
  std::unordered_map<std::string, int> seen;  // surface -> record id
  // Description files repeat across records in practice; cache reads.
  std::unordered_map<std::string, std::string> desc_cache;

  std::string raw;
  long line_no = 0;
  int dropped = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = strip_cr(raw);
    auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected 4 tab-separated columns, got " +
                  std::to_string(fields.size()));
    }
    TermRecord rec;
    rec.surface = normalize_surface(fields[0]);
    if (rec.surface.empty()) {
      throw_validation(path.string() + ":" + std::to_string(line_no) +
                       ": empty surface");
    }
    if (fields[1] == "core") {
      rec.is_core = true;
    } else if (fields[1] == "fringe") {
      rec.is_core = false;
    } else {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": status must be 'core' or 'fringe', got '" + fields[1] +
                  "'");
    }

    if (rec.is_core) {
      if (fields[2].empty()) {
        throw_validation(path.string() + ":" + std::to_string(line_no) +
                         ": core term '" + rec.surface +
                         "' has no description path");
      }
      fs::path desc_path = fields[2];
      if (desc_path.is_relative()) desc_path = base / desc_path;
      auto cached = desc_cache.find(desc_path.string());
      if (cached == desc_cache.end()) {
        cached = desc_cache.emplace(desc_path.string(), read_file(desc_path))
                     .first;
      }
      rec.description = cached->second;
      if (normalize_surface(rec.description).empty()) {
        throw_validation(path.string() + ":" + std::to_string(line_no) +
                         ": core term '" + rec.surface +
                         "' has an empty description document");
      }
      for (const std::string& cat : split(fields[3], ';')) {
        std::string name = normalize_surface(cat);
        if (!name.empty()) rec.categories.push_back(name);
      }
    } else {
      if (!fields[2].empty() || !normalize_surface(fields[3]).empty()) {
        throw_validation(path.string() + ":" + std::to_string(line_no) +
                         ": fringe term '" + rec.surface +
                         "' must not carry a description or categories");
      }
    }

    auto it = seen.find(rec.surface);
    if (it != seen.end()) {
      TermRecord& prev = records[static_cast<std::size_t>(it->second)];
      if (!rec.is_core) {
        ++dropped;  // duplicate fringe surface: keep the first record
        continue;
      }
      if (prev.is_core) {
        throw_validation(path.string() + ":" + std::to_string(line_no) +
                         ": duplicate core surface '" + rec.surface + "'");
      }
      // Core line for a surface previously seen as fringe: upgrade in place
      // so the id assignment stays contiguous.
      prev.is_core = true;
      prev.description = std::move(rec.description);
      prev.categories = std::move(rec.categories);
      ++dropped;
      continue;
    }
    rec.id = static_cast<int>(records.size());
    seen.emplace(rec.surface, rec.id);
    records.push_back(std::move(rec));
  }
  if (dropped > 0) {
    log_info("dropped " + std::to_string(dropped) +
             " duplicate surfaces while loading " + path.string());
  }
  return records;
}

void write_term_records(const std::vector<TermRecord>& records,
                        const fs::path& tsv_path, const fs::path& desc_dir) {
  fs::create_directories(desc_dir);
  std::ofstream out(tsv_path, std::ios::binary);
  if (!out) throw_io("cannot write term inventory: " + tsv_path.string());
  const fs::path base =
      tsv_path.has_parent_path() ? tsv_path.parent_path() : ".";
  for (const TermRecord& rec : records) {
    std::string desc_field;
    if (rec.is_core) {
      char name[32];
      std::snprintf(name, sizeof(name), "term_%06d.txt", rec.id);
      fs::path desc_path = desc_dir / name;
      std::ofstream doc(desc_path, std::ios::binary);
      if (!doc) throw_io("cannot write description: " + desc_path.string());
      doc << rec.description;
      desc_field = fs::relative(desc_path, base).string();
    }
    std::string cats;
    for (std::size_t i = 0; i < rec.categories.size(); ++i) {
      if (i > 0) cats += ';';
      cats += rec.categories[i];
    }
    out << rec.surface << '\t' << (rec.is_core ? "core" : "fringe") << '\t'
        << desc_field << '\t' << cats << '\n';
  }
}

WordVectorTable load_word_vectors(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open word vectors: " + path.string());
  WordVectorTable table;
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = strip_cr(raw);
    if (line.empty()) continue;
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos || pos == 0) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected `token v1 ... vd`");
    }
    std::string token = line.substr(0, pos);
    std::vector<double> vec;
    const char* p = line.c_str() + pos;
    const char* end = line.c_str() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) {
        throw_parse(path.string() + ":" + std::to_string(line_no) +
                    ": non-numeric vector component");
      }
      vec.push_back(value);
      p = next;
    }
    if (vec.empty()) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": token without vector components");
    }
    if (table.dim == 0) {
      table.dim = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != table.dim) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": dimension " + std::to_string(vec.size()) +
                  " differs from established dimension " +
                  std::to_string(table.dim));
    }
    table.vectors[token] = std::move(vec);  // later lines overwrite
  }
  if (table.vectors.empty()) {
    throw_validation(path.string() + ": no vectors");
  }
  return table;
}

void write_word_vectors(const WordVectorTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write word vectors: " + path.string());
  // Sort tokens so output is reproducible regardless of map order.
  std::vector<std::string> tokens;
  tokens.reserve(table.vectors.size());
  for (const auto& [token, _] : table.vectors) tokens.push_back(token);
  std::sort(tokens.begin(), tokens.end());
  char buf[64];
  for (const std::string& token : tokens) {
    out << token;
    for (double v : table.vectors.at(token)) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

CategoryTree load_category_tree(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open category tree: " + path.string());
  CategoryTree tree;
  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = strip_cr(raw);
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw_parse(path.string() + ":" + std::to_string(line_no) +
                  ": expected `parent<TAB>child`");
    }
    std::string parent = normalize_surface(fields[0]);
    std::string child = normalize_surface(fields[1]);
    if (parent.empty() || child.empty()) {
      throw_validation(path.string() + ":" + std::to_string(line_no) +
                       ": blank category name");
    }
    if (parent == child) {
      throw_validation(path.string() + ":" + std::to_string(line_no) +
                       ": self-edge on category '" + parent + "'");
    }
    int p = tree.add_node(parent);
    int c = tree.add_node(child);
    if (!tree.add_edge(p, c)) {
      throw_validation(path.string() + ":" + std::to_string(line_no) +
                       ": duplicate edge '" + parent + "' -> '" + child + "'");
    }
  }
  return tree;
}

void write_category_tree(const CategoryTree& tree, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write category tree: " + path.string());
  for (const auto& [p, c] : tree.edges) {
    out << tree.nodes[static_cast<std::size_t>(p)] << '\t'
        << tree.nodes[static_cast<std::size_t>(c)] << '\n';
  }
}

std::unordered_map<std::string, int> surface_index(
    const std::vector<TermRecord>& records) {
  std::unordered_map<std::string, int> map;
  map.reserve(records.size());
  for (const TermRecord& rec : records) map.emplace(rec.surface, rec.id);
  return map;
}

std::vector<TermRecord> demote_records(const std::vector<TermRecord>& records,
                                       const std::vector<int>& ids) {
  std::vector<TermRecord> out = records;
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(out.size())) {
      throw_validation("demote_records: id out of range: " +
                       std::to_string(id));
    }
    TermRecord& rec = out[static_cast<std::size_t>(id)];
    rec.is_core = false;
    rec.description.clear();
    rec.categories.clear();
  }
  return out;
}

}  // namespace termrel
