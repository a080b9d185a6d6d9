#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "termrel/records.hpp"

namespace termrel {

using Mat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class FeatureProvenance { Compositional, Direct };

/// One feature row per graph node. Row i depends only on term i's surface
/// and the source, so rows stay valid when terms are appended online.
struct FeatureMatrix {
  Mat x;  // n x d
  FeatureProvenance provenance = FeatureProvenance::Compositional;
  int missing = 0;  // rows that fell back to the zero vector

  int dim() const { return static_cast<int>(x.cols()); }
  int rows() const { return static_cast<int>(x.rows()); }
};

/// Element-wise sum of the word vectors of the surface's tokens; unknown
/// tokens contribute zero. Total: an all-unknown surface yields the zero
/// vector.
Vec compositional_embedding(const std::string& surface,
                            const WordVectorTable& table);

/// Compositional features for every record.
FeatureMatrix build_feature_matrix(const std::vector<TermRecord>& records,
                                   const WordVectorTable& table,
                                   bool l2_normalize = false);

/// Direct mode: per-term vectors from a table keyed by the surface with
/// spaces replaced by underscores. Terms missing from it fall back to
/// compositional sums when a word table is supplied, else to zero.
FeatureMatrix build_feature_matrix_direct(
    const std::vector<TermRecord>& records, const WordVectorTable& term_table,
    const WordVectorTable* word_table = nullptr, bool l2_normalize = false);

/// Feature row for a single (possibly just-attached) term by the same rule
/// as build_feature_matrix.
Vec feature_row(const std::string& surface, const WordVectorTable& table,
                bool l2_normalize = false);

}  // namespace termrel
