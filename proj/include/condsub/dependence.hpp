#pragma once

#include "condsub/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace condsub {

struct DependenceRow {
  std::string name;
  ColumnType type = ColumnType::numeric;
  /// Numeric: 1 - MSE(forest) / Var. Categorical: 1 - MMCE(forest) / MMCE(training mode).
  /// Averaged over the two folds; may be negative.
  double explained = 0.0;
  double fold_scores[2] = {0.0, 0.0};
};

struct DependenceReport {
  std::vector<DependenceRow> rows;
  Index n_rows = 0;
  Index n_trees = 100;
  std::uint64_t seed = 0;

  /// name,type,explained (as a fraction)
  std::string to_csv() const;
  /// Aligned table with explained loss in percent.
  std::string to_text() const;
};

/// How well each feature is predicted by all others: a random forest is
/// trained on one half and scored on the other, then the halves swap.
DependenceReport dependence_report(const Dataset& d, std::uint64_t seed, Index n_trees = 100);

}  // namespace condsub
