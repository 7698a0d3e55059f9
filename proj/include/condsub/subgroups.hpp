#pragma once

#include "condsub/data.hpp"
#include "condsub/tree.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace condsub {

struct PartitionParams {
  int max_depth = 30;
  Index min_node_size = 30;
};

struct SubgroupInfo {
  int group_id = 0;
  /// Training rows in the leaf.
  Index n_train = 0;
  std::string rule;
};

/// One atom of a leaf's conjunctive rule.
struct Condition {
  std::string column;
  /// Numeric: value <= threshold when `at_most`, value > threshold otherwise.
  bool at_most = true;
  double threshold = 0.0;
  /// Categorical: value must be one of these levels.
  std::vector<std::string> levels;
  bool categorical = false;

  bool holds(const Dataset& data, Index row, Index column_index) const;
};

/// CART tree predicting X_j from X_{-j}; its leaves are the subgroups.
class SubgroupPartition {
 public:
  SubgroupPartition() = default;
  SubgroupPartition(std::string feature, tree::Tree tree, PartitionParams params);

  /// Name of the feature of interest X_j.
  const std::string& feature() const { return feature_; }
  const tree::Tree& tree() const { return tree_; }
  const PartitionParams& params() const { return params_; }
  int n_groups() const { return tree_.n_leaves(); }
  const std::vector<SubgroupInfo>& groups() const { return groups_; }

  /// Group id per row, routing by column name.
  std::vector<int> assign(const Dataset& data) const;
  /// Decision path of every leaf as a list of conditions, in group order.
  std::vector<std::vector<Condition>> leaf_conditions() const;
  /// True if any split node uses `column`.
  bool splits_on(const std::string& column) const;

  nlohmann::json to_json() const;
  static SubgroupPartition from_json(const nlohmann::json& j);

 private:
  std::string feature_;
  tree::Tree tree_;
  PartitionParams params_;
  std::vector<SubgroupInfo> groups_;
};

/// Fits the partition for numeric feature j on `train` (target column, if
/// any, is not used). Splits need both children >= min_node_size and a
/// strict decrease of the sum of squared errors of X_j; with fewer than
/// 2·min_node_size rows the result is a single leaf.
SubgroupPartition fit_partition(const Dataset& train, Index j, const PartitionParams& params = {});

/// The trivial partition: one group holding every row.
SubgroupPartition single_group_partition(const Dataset& train, Index j);

std::vector<int> assign_groups(const SubgroupPartition& part, const Dataset& data);

/// One conjunctive rule per group, e.g. "hum <= 70.75 AND season in {fall, spring}".
std::vector<std::string> describe_groups(const SubgroupPartition& part);

std::string render_rule(const std::vector<Condition>& conditions);

}  // namespace condsub
