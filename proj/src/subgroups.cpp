#include "condsub/subgroups.hpp"

#include "condsub/error.hpp"

#include <algorithm>
#include <cstdio>

namespace condsub {

namespace {

std::string format_threshold(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  return buf;
}

bool all_constant(const Dataset& x) {
  for (Index c = 0; c < x.n_features(); ++c) {
    const auto col = x.col(c);
    if (col.size() > 0 && col.minCoeff() != col.maxCoeff()) return false;
  }
  return true;
}

}  // namespace

bool Condition::holds(const Dataset& data, Index row, Index column_index) const {
  const double v = data(row, column_index);
  if (categorical) {
    const auto& name = data.level_name(column_index, v);
    return std::find(levels.begin(), levels.end(), name) != levels.end();
  }
  return at_most ? v <= threshold : v > threshold;
}

SubgroupPartition::SubgroupPartition(std::string feature, tree::Tree tree, PartitionParams params)
    : feature_(std::move(feature)), tree_(std::move(tree)), params_(params) {
  const auto conds = leaf_conditions();
  for (int k = 0; k < tree_.n_leaves(); ++k) {
    const auto& leaf = tree_.nodes()[static_cast<std::size_t>(tree_.leaf_node(k))];
    groups_.push_back({k, leaf.count, render_rule(conds[static_cast<std::size_t>(k)])});
  }
}

std::vector<int> SubgroupPartition::assign(const Dataset& data) const {
  if (tree_.n_leaves() == 1) return std::vector<int>(static_cast<std::size_t>(data.n_rows()), 0);
  return tree_.leaf_ids(data);
}

std::vector<std::vector<Condition>> SubgroupPartition::leaf_conditions() const {
  std::vector<std::vector<Condition>> out(static_cast<std::size_t>(tree_.n_leaves()));
  const auto& nodes = tree_.nodes();
  const auto& features = tree_.features();

  struct Frame {
    int node;
    std::vector<Condition> path;
  };
  std::vector<Frame> stack{{0, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const tree::Node& node = nodes[static_cast<std::size_t>(f.node)];
    if (node.is_leaf()) {
      out[static_cast<std::size_t>(node.leaf_id)] = std::move(f.path);
      continue;
    }
    const ColumnInfo& info = features[static_cast<std::size_t>(node.feature)];
    for (int side : {1, 0}) {
      std::vector<Condition> path = f.path;
      Condition c;
      c.column = info.name;
      if (info.is_categorical()) {
        c.categorical = true;
        c.levels = side == 0 ? node.left_levels : node.right_levels;
        auto it = std::find_if(path.begin(), path.end(),
                               [&](const Condition& p) { return p.categorical && p.column == c.column; });
        if (it != path.end()) {
          std::vector<std::string> both;
          for (const auto& l : it->levels)
            if (std::find(c.levels.begin(), c.levels.end(), l) != c.levels.end()) both.push_back(l);
          it->levels = std::move(both);
        } else {
          path.push_back(std::move(c));
        }
      } else {
        c.at_most = side == 0;
        c.threshold = node.threshold;
        auto it = std::find_if(path.begin(), path.end(), [&](const Condition& p) {
          return !p.categorical && p.column == c.column && p.at_most == c.at_most;
        });
        if (it == path.end())
          path.push_back(c);
        else if (c.at_most)
          it->threshold = std::min(it->threshold, c.threshold);
        else
          it->threshold = std::max(it->threshold, c.threshold);
      }
      stack.push_back({side == 0 ? node.left : node.right, std::move(path)});
    }
  }
  return out;
}

bool SubgroupPartition::splits_on(const std::string& column) const {
  for (const auto& n : tree_.nodes())
    if (!n.is_leaf() && tree_.features()[static_cast<std::size_t>(n.feature)].name == column) return true;
  return false;
}

std::string render_rule(const std::vector<Condition>& conditions) {
  if (conditions.empty()) return "TRUE";
  std::string out;
  for (const auto& c : conditions) {
    if (!out.empty()) out += " AND ";
    if (c.categorical) {
      out += c.column + " in {";
      for (std::size_t i = 0; i < c.levels.size(); ++i) out += (i ? ", " : "") + c.levels[i];
      out += "}";
    } else {
      out += c.column + (c.at_most ? " <= " : " > ") + format_threshold(c.threshold);
    }
  }
  return out;
}

nlohmann::json SubgroupPartition::to_json() const {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : tree_.features()) {
    nlohmann::json col{{"name", f.name}, {"type", std::string(to_string(f.type))}};
    if (f.is_categorical()) col["levels"] = f.levels;
    features.push_back(std::move(col));
  }
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree_.nodes()) {
    nlohmann::json rec;
    if (n.is_leaf()) {
      const auto& g = groups_[static_cast<std::size_t>(n.leaf_id)];
      rec = {{"group_id", g.group_id}, {"n_k", g.n_train}, {"rule", g.rule}, {"value", n.value}};
    } else {
      const auto& f = tree_.features()[static_cast<std::size_t>(n.feature)];
      rec = {{"split_feature", f.name}, {"left", n.left}, {"right", n.right}};
      if (f.is_categorical()) {
        rec["level_set"] = n.left_levels;
        rec["right_level_set"] = n.right_levels;
      } else {
        rec["threshold"] = n.threshold;
      }
      rec["n"] = n.count;
      rec["value"] = n.value;
    }
    nodes.push_back(std::move(rec));
  }
  return {{"feature", feature_},
          {"max_depth", params_.max_depth},
          {"min_node_size", params_.min_node_size},
          {"n_groups", n_groups()},
          {"columns", std::move(features)},
          {"nodes", std::move(nodes)}};
}

SubgroupPartition SubgroupPartition::from_json(const nlohmann::json& j) {
  try {
    std::vector<ColumnInfo> features;
    for (const auto& c : j.at("columns")) {
      ColumnInfo info;
      info.name = c.at("name").get<std::string>();
      info.type = c.at("type").get<std::string>() == "categorical" ? ColumnType::categorical : ColumnType::numeric;
      if (info.is_categorical()) info.levels = c.at("levels").get<std::vector<std::string>>();
      features.push_back(std::move(info));
    }
    std::vector<tree::Node> nodes;
    for (const auto& rec : j.at("nodes")) {
      tree::Node n;
      n.value = rec.value("value", 0.0);
      if (rec.contains("group_id")) {
        n.count = rec.at("n_k").get<Index>();
      } else {
        const auto name = rec.at("split_feature").get<std::string>();
        auto it = std::find_if(features.begin(), features.end(), [&](const ColumnInfo& c) { return c.name == name; });
        if (it == features.end()) throw DataError("partition JSON: unknown split feature '" + name + "'");
        n.feature = static_cast<int>(it - features.begin());
        n.left = rec.at("left").get<int>();
        n.right = rec.at("right").get<int>();
        n.count = rec.value("n", Index{0});
        if (it->is_categorical()) {
          n.left_levels = rec.at("level_set").get<std::vector<std::string>>();
          n.right_levels = rec.at("right_level_set").get<std::vector<std::string>>();
        } else {
          n.threshold = rec.at("threshold").get<double>();
        }
      }
      nodes.push_back(std::move(n));
    }
    // depths follow from the structure
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].is_leaf()) continue;
      for (int c : {nodes[i].left, nodes[i].right})
        if (c > 0 && static_cast<std::size_t>(c) < nodes.size()) nodes[static_cast<std::size_t>(c)].depth = nodes[i].depth + 1;
    }
    PartitionParams params{j.at("max_depth").get<int>(), j.at("min_node_size").get<Index>()};
    return SubgroupPartition(j.at("feature").get<std::string>(), tree::Tree(std::move(features), std::move(nodes)),
                             params);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed partition JSON: ") + e.what());
  }
}

SubgroupPartition fit_partition(const Dataset& train, Index j, const PartitionParams& params) {
  if (j < 0 || j >= train.n_features()) throw DataError("feature index out of range");
  const ColumnInfo& target = train.column(j);
  if (!target.is_numeric())
    throw DataError("cannot partition for categorical feature '" + target.name + "': only numeric features are supported");
  if (train.n_features() < 2) throw DataError("partition needs at least one other feature");
  if (train.n_rows() < 1) throw DataError("partition needs at least one row");
  if (params.max_depth < 0) throw DataError("max_depth must be >= 0");
  if (params.min_node_size < 1) throw DataError("min_node_size must be >= 1");

  const Dataset others = train.drop_target().drop_column(j);
  if (all_constant(others))
    throw DataError("all features other than '" + target.name + "' are constant; nothing to split on");

  std::vector<Index> rows(static_cast<std::size_t>(train.n_rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Index>(i);
  tree::GrowParams grow;
  grow.criterion = tree::Criterion::variance;
  grow.max_depth = params.max_depth;
  grow.min_node_size = params.min_node_size;
  const Eigen::VectorXd xj = train.col(j);
  return SubgroupPartition(target.name, tree::Tree::grow(others, xj, rows, grow), params);
}

SubgroupPartition single_group_partition(const Dataset& train, Index j) {
  PartitionParams params{0, 1};
  const Dataset others = train.drop_target().drop_column(j);
  tree::Node leaf;
  leaf.count = train.n_rows();
  if (train.n_rows() > 0) leaf.value = train.col(j).mean();
  return SubgroupPartition(train.column(j).name, tree::Tree(others.columns(), {leaf}), params);
}

std::vector<int> assign_groups(const SubgroupPartition& part, const Dataset& data) { return part.assign(data); }

std::vector<std::string> describe_groups(const SubgroupPartition& part) {
  std::vector<std::string> out;
  for (const auto& g : part.groups()) out.push_back(g.rule);
  return out;
}

}  // namespace condsub
