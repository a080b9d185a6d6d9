#include "termrel/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "termrel/error.hpp"
#include "termrel/text.hpp"

namespace fs = std::filesystem;

namespace termrel {

CoreIndex build_index(const std::vector<TermRecord>& records) {
  CoreIndex index;
  for (const TermRecord& rec : records) {
    if (rec.is_core) index.core_ids_.push_back(rec.id);
  }
  if (index.core_ids_.empty()) throw_validation("empty core: nothing to index");
  std::sort(index.core_ids_.begin(), index.core_ids_.end());

  index.doc_lengths_.resize(index.core_ids_.size(), 0);
  std::uint64_t total_len = 0;
  for (int slot = 0; slot < index.doc_count(); ++slot) {
    const TermRecord& rec =
        records[static_cast<std::size_t>(index.core_ids_[static_cast<std::size_t>(slot)])];
    index.surface_slot_.emplace(rec.surface, slot);
    std::vector<std::string> tokens = tokenize(rec.description);
    index.doc_lengths_[static_cast<std::size_t>(slot)] =
        static_cast<std::uint32_t>(tokens.size());
    total_len += tokens.size();
    for (std::uint32_t pos = 0; pos < tokens.size(); ++pos) {
      auto& plist = index.postings_[tokens[static_cast<std::size_t>(pos)]];
      if (plist.empty() || plist.back().slot != slot) {
        plist.push_back({slot, {}});
      }
      plist.back().positions.push_back(pos);
    }
  }
  index.avg_doc_length_ =
      static_cast<double>(total_len) / static_cast<double>(index.doc_count());
  return index;
}

const std::vector<CoreIndex::Posting>* CoreIndex::postings(
    const std::string& token) const {
  auto it = postings_.find(token);
  return it == postings_.end() ? nullptr : &it->second;
}

std::vector<std::string> CoreIndex::query_tokens(
    const std::string& query) const {
  std::vector<std::string> tokens = tokenize(query);
  if (tokens.empty()) {
    throw_validation("empty query after normalization: '" + query + "'");
  }
  return tokens;
}

// Docs containing the tokens as a contiguous run, via positional
// intersection anchored on the first token.
std::vector<int> CoreIndex::phrase_slots(
    const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  const std::vector<Posting>* first = postings(tokens[0]);
  if (first == nullptr) return out;
  for (const Posting& anchor : *first) {
    bool doc_matches = false;
    for (std::uint32_t start : anchor.positions) {
      bool run = true;
      for (std::size_t t = 1; t < tokens.size() && run; ++t) {
        const std::vector<Posting>* plist = postings(tokens[t]);
        run = false;
        if (plist == nullptr) break;
        auto it = std::lower_bound(
            plist->begin(), plist->end(), anchor.slot,
            [](const Posting& p, int slot) { return p.slot < slot; });
        if (it == plist->end() || it->slot != anchor.slot) break;
        run = std::binary_search(it->positions.begin(), it->positions.end(),
                                 start + static_cast<std::uint32_t>(t));
      }
      if (run) {
        doc_matches = true;
        break;
      }
    }
    if (doc_matches) out.push_back(anchor.slot);
  }
  return out;
}

double CoreIndex::score_doc(const std::string& query, int slot) const {
  std::vector<std::string> tokens = query_tokens(query);
  double score = 0.0;
  const double n_docs = static_cast<double>(doc_count());
  const double len = static_cast<double>(doc_lengths_[static_cast<std::size_t>(slot)]);
  for (const std::string& token : tokens) {
    const std::vector<Posting>* plist = postings(token);
    if (plist == nullptr) continue;
    auto it = std::lower_bound(
        plist->begin(), plist->end(), slot,
        [](const Posting& p, int s) { return p.slot < s; });
    if (it == plist->end() || it->slot != slot) continue;
    const double tf = static_cast<double>(it->positions.size());
    const double df = static_cast<double>(plist->size());
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    const double denom = tf + kK1 * (1.0 - kB + kB * len / avg_doc_length_);
    score += idf * tf * (kK1 + 1.0) / denom;
  }
  return score;
}

std::vector<SearchHit> CoreIndex::search(const std::string& query, bool exact,
                                         int limit) const {
  if (limit < 1) throw_validation("search limit must be >= 1");
  std::vector<std::string> tokens = query_tokens(query);
  const std::string normalized = normalize_surface(query);

  // Accumulate BM25 per doc slot, query tokens in order so the float
  // arithmetic is reproducible independent of postings layout.
  std::unordered_map<int, double> scores;
  const double n_docs = static_cast<double>(doc_count());
  for (const std::string& token : tokens) {
    const std::vector<Posting>* plist = postings(token);
    if (plist == nullptr) continue;
    const double df = static_cast<double>(plist->size());
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const Posting& posting : *plist) {
      const double tf = static_cast<double>(posting.positions.size());
      const double len =
          static_cast<double>(doc_lengths_[static_cast<std::size_t>(posting.slot)]);
      const double denom =
          tf + kK1 * (1.0 - kB + kB * len / avg_doc_length_);
      scores[posting.slot] += idf * tf * (kK1 + 1.0) / denom;
    }
  }

  std::vector<int> candidates;
  if (exact) {
    candidates = phrase_slots(tokens);
    // A core term whose surface IS the query also counts as an exact hit
    // even if the phrase never occurs in its own description.
    auto it = surface_slot_.find(normalized);
    if (it != surface_slot_.end() &&
        !std::binary_search(candidates.begin(), candidates.end(), it->second)) {
      candidates.push_back(it->second);
      std::sort(candidates.begin(), candidates.end());
    }
  } else {
    candidates.reserve(scores.size());
    for (const auto& [slot, _] : scores) candidates.push_back(slot);
    std::sort(candidates.begin(), candidates.end());
  }

  std::vector<SearchHit> hits;
  hits.reserve(candidates.size());
  for (int slot : candidates) {
    auto it = scores.find(slot);
    hits.push_back({core_ids_[static_cast<std::size_t>(slot)],
                    it == scores.end() ? 0.0 : it->second});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const SearchHit& a, const SearchHit& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.term_id < b.term_id;
                   });
  if (static_cast<int>(hits.size()) > limit) {
    hits.resize(static_cast<std::size_t>(limit));
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Serialization: little-endian binary, magic TRIX1.

namespace {

constexpr char kMagic[5] = {'T', 'R', 'I', 'X', '1'};

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw_corrupt("truncated index file");
  return value;
}

std::string get_string(std::ifstream& in) {
  auto len = get<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw_corrupt("truncated index file");
  return s;
}

}  // namespace

void CoreIndex::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write index: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(core_ids_.size()));
  for (int id : core_ids_) put<std::int32_t>(out, id);
  for (std::uint32_t len : doc_lengths_) put<std::uint32_t>(out, len);
  put<double>(out, avg_doc_length_);

  std::vector<std::string> ordered_surface(core_ids_.size());
  for (const auto& [surface, slot] : surface_slot_) {
    ordered_surface[static_cast<std::size_t>(slot)] = surface;
  }
  for (const std::string& s : ordered_surface) put_string(out, s);

  std::vector<std::string> tokens;
  tokens.reserve(postings_.size());
  for (const auto& [token, _] : postings_) tokens.push_back(token);
  std::sort(tokens.begin(), tokens.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tokens.size()));
  for (const std::string& token : tokens) {
    put_string(out, token);
    const auto& plist = postings_.at(token);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(plist.size()));
    for (const Posting& p : plist) {
      put<std::int32_t>(out, p.slot);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p.positions.size()));
      for (std::uint32_t pos : p.positions) put<std::uint32_t>(out, pos);
    }
  }
}

CoreIndex CoreIndex::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open index: " + path.string());
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw_corrupt("not an index file (bad magic): " + path.string());
  }
  CoreIndex index;
  auto n = get<std::uint32_t>(in);
  index.core_ids_.resize(n);
  for (auto& id : index.core_ids_) id = get<std::int32_t>(in);
  index.doc_lengths_.resize(n);
  for (auto& len : index.doc_lengths_) len = get<std::uint32_t>(in);
  index.avg_doc_length_ = get<double>(in);
  for (std::uint32_t slot = 0; slot < n; ++slot) {
    index.surface_slot_.emplace(get_string(in), static_cast<int>(slot));
  }
  auto n_tokens = get<std::uint32_t>(in);
  for (std::uint32_t t = 0; t < n_tokens; ++t) {
    std::string token = get_string(in);
    auto n_postings = get<std::uint32_t>(in);
    std::vector<Posting> plist(n_postings);
    for (auto& p : plist) {
      p.slot = get<std::int32_t>(in);
      auto n_pos = get<std::uint32_t>(in);
      p.positions.resize(n_pos);
      for (auto& pos : p.positions) pos = get<std::uint32_t>(in);
    }
    index.postings_.emplace(std::move(token), std::move(plist));
  }
  return index;
}

}  // namespace termrel
