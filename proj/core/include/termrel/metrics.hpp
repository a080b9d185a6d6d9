#pragma once

#include <vector>

namespace termrel {

/// Rank-statistic ROC-AUC (Mann-Whitney with midranks, ties count 0.5).
/// Requires at least one positive and one negative label.
double roc_auc(const std::vector<double>& scores,
               const std::vector<signed char>& labels);

/// PR-AUC as average precision: the step-wise integral of the
/// precision-recall curve, tied scores entering as one threshold group.
double pr_auc(const std::vector<double>& scores,
              const std::vector<signed char>& labels);

}  // namespace termrel
