#include "termrel/features.hpp"

#include <cmath>

#include "termrel/error.hpp"
#include "termrel/log.hpp"
#include "termrel/text.hpp"

namespace termrel {

Vec compositional_embedding(const std::string& surface,
                            const WordVectorTable& table) {
  if (table.empty()) throw_validation("compositional embedding: empty table");
  Vec sum = Vec::Zero(table.dim);
  for (const std::string& token : tokenize(surface)) {
    auto it = table.vectors.find(token);
    if (it == table.vectors.end()) continue;
    for (int j = 0; j < table.dim; ++j) {
      sum[j] += it->second[static_cast<std::size_t>(j)];
    }
  }
  return sum;
}

namespace {

void maybe_l2(Vec& row, bool l2_normalize) {
  if (!l2_normalize) return;
  double norm = row.norm();
  if (norm > 0.0) row /= norm;
}

void check_finite(const Mat& x) {
  if (!x.allFinite()) {
    throw_numeric("feature matrix contains NaN or Inf entries");
  }
}

}  // namespace

Vec feature_row(const std::string& surface, const WordVectorTable& table,
                bool l2_normalize) {
  Vec row = compositional_embedding(surface, table);
  maybe_l2(row, l2_normalize);
  return row;
}

FeatureMatrix build_feature_matrix(const std::vector<TermRecord>& records,
                                   const WordVectorTable& table,
                                   bool l2_normalize) {
  FeatureMatrix fm;
  fm.provenance = FeatureProvenance::Compositional;
  fm.x = Mat::Zero(static_cast<Eigen::Index>(records.size()), table.dim);
  for (const TermRecord& rec : records) {
    Vec row = compositional_embedding(rec.surface, table);
    maybe_l2(row, l2_normalize);
    if (row.isZero(0.0)) ++fm.missing;
    fm.x.row(rec.id) = row.transpose();
  }
  if (fm.missing > 0) {
    log_debug("feature matrix: " + std::to_string(fm.missing) +
              " terms with no known tokens (zero rows)");
  }
  check_finite(fm.x);
  return fm;
}

FeatureMatrix build_feature_matrix_direct(
    const std::vector<TermRecord>& records, const WordVectorTable& term_table,
    const WordVectorTable* word_table, bool l2_normalize) {
  if (term_table.empty()) {
    throw_validation("direct feature matrix: empty term-embedding table");
  }
  if (word_table != nullptr && !word_table->empty() &&
      word_table->dim != term_table.dim) {
    throw_validation("feature sources disagree on dimension: " +
                     std::to_string(term_table.dim) + " vs " +
                     std::to_string(word_table->dim));
  }
  FeatureMatrix fm;
  fm.provenance = FeatureProvenance::Direct;
  fm.x = Mat::Zero(static_cast<Eigen::Index>(records.size()), term_table.dim);
  for (const TermRecord& rec : records) {
    std::string key = rec.surface;
    for (char& c : key) {
      if (c == ' ') c = '_';
    }
    auto it = term_table.vectors.find(key);
    Vec row;
    if (it != term_table.vectors.end()) {
      row = Eigen::Map<const Vec>(it->second.data(), term_table.dim);
    } else if (word_table != nullptr && !word_table->empty()) {
      row = compositional_embedding(rec.surface, *word_table);
    } else {
      row = Vec::Zero(term_table.dim);
    }
    maybe_l2(row, l2_normalize);
    if (row.isZero(0.0)) ++fm.missing;
    fm.x.row(rec.id) = row.transpose();
  }
  check_finite(fm.x);
  return fm;
}

}  // namespace termrel
