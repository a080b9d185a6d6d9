#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "termrel/records.hpp"

namespace termrel {

struct SearchHit {
  int term_id = -1;  // core term whose description matched
  double score = 0.0;
};

/// Inverted index over core-term descriptions with positional postings,
/// scored with Okapi BM25 (k1 = 1.2, b = 0.75, non-negative idf
/// ln(1 + (N - df + 0.5)/(df + 0.5))). Immutable after build; concurrent
/// reads are safe.
class CoreIndex {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;

  struct Posting {
    int slot = 0;                     // dense doc slot, see core_ids()
    std::vector<std::uint32_t> positions;  // token offsets within the doc
  };

  /// Exact-phrase candidates (description contains the query as a
  /// contiguous token run, or the core surface equals the query) ranked by
  /// BM25; or plain BM25 over all docs containing at least one query token.
  /// Ties break by ascending term id; at most `limit` hits. A core term
  /// whose own surface equals the query is returned like any other — the
  /// graph drops self-links, not the index.
  std::vector<SearchHit> search(const std::string& query, bool exact,
                                int limit) const;

  /// BM25 score of `query` against one indexed doc; 0 if nothing matches.
  double score_doc(const std::string& query, int slot) const;

  int doc_count() const { return static_cast<int>(core_ids_.size()); }
  double avg_doc_length() const { return avg_doc_length_; }
  const std::vector<int>& core_ids() const { return core_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
  const std::vector<Posting>* postings(const std::string& token) const;

  void save(const std::filesystem::path& path) const;
  static CoreIndex load(const std::filesystem::path& path);

  friend CoreIndex build_index(const std::vector<TermRecord>& records);

 private:
  std::vector<int> core_ids_;              // slot -> term id (ascending)
  std::unordered_map<std::string, int> surface_slot_;  // core surface -> slot
  std::vector<std::uint32_t> doc_lengths_;  // tokens per doc
  double avg_doc_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;

  std::vector<std::string> query_tokens(const std::string& query) const;
  std::vector<int> phrase_slots(const std::vector<std::string>& tokens) const;
};

/// Indexes the descriptions of all core records. Tokenization matches
/// surface normalization (lowercase, split outside [a-z0-9-]).
CoreIndex build_index(const std::vector<TermRecord>& records);

}  // namespace termrel
