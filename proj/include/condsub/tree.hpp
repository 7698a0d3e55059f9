#pragma once

#include "condsub/data.hpp"
#include "condsub/rng.hpp"

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace condsub::tree {

enum class Criterion {
  variance,  ///< regression: sum of squared errors
  gini,      ///< classification: Gini impurity on integer class codes
};

struct GrowParams {
  Criterion criterion = Criterion::variance;
  int max_depth = std::numeric_limits<int>::max();
  Index min_node_size = 1;
  /// Candidate features drawn per split; 0 means all features.
  Index mtry = 0;
  /// Number of classes for the gini criterion.
  Index n_classes = 0;
};

struct Node {
  /// Index into Tree::features(); -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  /// Categorical split: levels routed left / right. Any other level is
  /// unseen at this node.
  std::vector<std::string> left_levels;
  std::vector<std::string> right_levels;
  int left = -1;
  int right = -1;
  /// Mean target (variance) or majority class code (gini).
  double value = 0.0;
  Index count = 0;
  int depth = 0;
  /// Dense leaf numbering in depth-first, left-first order; -1 on splits.
  int leaf_id = -1;

  bool is_leaf() const { return feature < 0; }
};

/// Binary CART tree over named feature columns.
///
/// Numeric splits route `value <= threshold` left. Categorical splits store
/// level names, so a fitted tree can route any dataset whose columns carry
/// the same names, even if its level tables were built independently.
class Tree {
 public:
  Tree() = default;
  Tree(std::vector<ColumnInfo> features, std::vector<Node> nodes);

  /// Grows a tree on `rows` of `x` (duplicates allowed, e.g. a bootstrap
  /// sample). Among equal-gain candidates the lowest feature index wins,
  /// then the smallest threshold. Splits must strictly reduce impurity and
  /// leave at least min_node_size rows in each child. `rng` is only used
  /// when params.mtry selects a feature subset.
  static Tree grow(const Dataset& x, const Eigen::Ref<const Eigen::VectorXd>& target,
                   std::span<const Index> rows, const GrowParams& params, Rng* rng = nullptr);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<ColumnInfo>& features() const { return features_; }
  int n_leaves() const { return n_leaves_; }
  int depth() const;

  /// Leaf id per row of `data`. Columns are matched by name. Throws
  /// UnseenLevelError when a categorical level reaches a split that never
  /// saw it, DataError when a split column is missing or has another type.
  std::vector<int> leaf_ids(const Dataset& data) const;
  /// Leaf values (`Node::value`) per row.
  Eigen::VectorXd predict(const Dataset& data) const;
  /// Index into nodes() of the leaf with the given id.
  int leaf_node(int leaf_id) const { return leaf_nodes_.at(static_cast<std::size_t>(leaf_id)); }

 private:
  void index_leaves();
  std::vector<int> route(const Dataset& data) const;

  std::vector<ColumnInfo> features_;
  std::vector<Node> nodes_;
  std::vector<int> leaf_nodes_;
  int n_leaves_ = 0;
};

}  // namespace condsub::tree
