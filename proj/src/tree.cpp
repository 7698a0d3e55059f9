#include "condsub/tree.hpp"

#include "condsub/error.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace condsub::tree {

namespace {

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  // categorical: level codes of the training column sent left / right
  std::vector<Index> left_codes;
  std::vector<Index> right_codes;
};

struct NodeStats {
  double impurity = 0.0;
  double value = 0.0;
  double total = 0.0;          // variance: sum of centred targets (~0)
  double sum_sq_counts = 0.0;  // gini: sum of squared class counts
  std::vector<double> counts;  // gini: class counts
};

class Grower {
 public:
  Grower(const Dataset& x, const Eigen::Ref<const Eigen::VectorXd>& y, const GrowParams& params, Rng* rng)
      : x_(x), y_(y), params_(params), rng_(rng) {
    if (params_.criterion == Criterion::gini && params_.n_classes < 1)
      throw ModelError("gini criterion needs n_classes >= 1");
    if (params_.min_node_size < 1) throw ModelError("min_node_size must be >= 1");
    if (params_.max_depth < 0) throw ModelError("max_depth must be >= 0");
  }

  std::vector<Node> run(std::span<const Index> rows) {
    struct Work {
      int node;
      std::vector<Index> rows;
    };
    std::vector<Node> nodes(1);
    std::vector<Work> stack;
    stack.push_back({0, std::vector<Index>(rows.begin(), rows.end())});
    while (!stack.empty()) {
      Work w = std::move(stack.back());
      stack.pop_back();
      const int depth = nodes[static_cast<std::size_t>(w.node)].depth;
      const NodeStats stats = node_stats(w.rows);
      {
        Node& node = nodes[static_cast<std::size_t>(w.node)];
        node.value = stats.value;
        node.count = static_cast<Index>(w.rows.size());
      }
      const auto n = static_cast<Index>(w.rows.size());
      if (depth >= params_.max_depth || n < 2 * params_.min_node_size || stats.impurity <= 0.0) continue;

      const Split best = find_split(w.rows, stats);
      if (best.feature < 0) continue;

      std::vector<Index> left, right;
      const auto col = x_.col(best.feature);
      if (x_.column(best.feature).is_numeric()) {
        for (Index r : w.rows) (col(r) <= best.threshold ? left : right).push_back(r);
      } else {
        std::vector<char> goes_left(x_.column(best.feature).levels.size(), 0);
        for (Index c : best.left_codes) goes_left[static_cast<std::size_t>(c)] = 1;
        for (Index r : w.rows) (goes_left[static_cast<std::size_t>(col(r))] ? left : right).push_back(r);
      }

      const int li = static_cast<int>(nodes.size());
      const int ri = li + 1;
      nodes.resize(nodes.size() + 2);
      Node& node = nodes[static_cast<std::size_t>(w.node)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      const auto& levels = x_.column(best.feature).levels;
      for (Index c : best.left_codes) node.left_levels.push_back(levels[static_cast<std::size_t>(c)]);
      for (Index c : best.right_codes) node.right_levels.push_back(levels[static_cast<std::size_t>(c)]);
      node.left = li;
      node.right = ri;
      nodes[static_cast<std::size_t>(li)].depth = depth + 1;
      nodes[static_cast<std::size_t>(ri)].depth = depth + 1;
      // right pushed first so the left subtree is expanded first
      stack.push_back({ri, std::move(right)});
      stack.push_back({li, std::move(left)});
    }
    return nodes;
  }

 private:
  NodeStats node_stats(const std::vector<Index>& rows) const {
    NodeStats s;
    const auto n = static_cast<double>(rows.size());
    if (params_.criterion == Criterion::variance) {
      double sum = 0.0;
      for (Index r : rows) sum += y_(r);
      s.value = sum / n;
      double sse = 0.0, total = 0.0;
      for (Index r : rows) {
        const double d = y_(r) - s.value;
        sse += d * d;
        total += d;
      }
      s.impurity = sse;
      s.total = total;
    } else {
      s.counts.assign(static_cast<std::size_t>(params_.n_classes), 0.0);
      for (Index r : rows) s.counts[static_cast<std::size_t>(y_(r))] += 1.0;
      double sq = 0.0;
      for (double c : s.counts) sq += c * c;
      s.sum_sq_counts = sq;
      s.impurity = n - sq / n;
      s.value = static_cast<double>(std::max_element(s.counts.begin(), s.counts.end()) - s.counts.begin());
    }
    return s;
  }

  std::vector<Index> candidate_features() {
    std::vector<Index> feats(static_cast<std::size_t>(x_.n_features()));
    std::iota(feats.begin(), feats.end(), Index{0});
    if (params_.mtry > 0 && params_.mtry < x_.n_features()) {
      if (rng_ == nullptr) throw ModelError("feature subsampling needs a random stream");
      for (Index i = 0; i < params_.mtry; ++i) {
        const auto k = static_cast<Index>(uniform_index(*rng_, feats.size() - static_cast<std::size_t>(i)));
        std::swap(feats[static_cast<std::size_t>(i)], feats[static_cast<std::size_t>(i + k)]);
      }
      feats.resize(static_cast<std::size_t>(params_.mtry));
      std::sort(feats.begin(), feats.end());
    }
    return feats;
  }

  Split find_split(const std::vector<Index>& rows, const NodeStats& stats) {
    Split best;
    const double min_gain = 1e-12 * stats.impurity;
    for (Index f : candidate_features()) {
      if (x_.column(f).is_numeric())
        scan_numeric(f, rows, stats, min_gain, best);
      else
        scan_categorical(f, rows, stats, min_gain, best);
    }
    return best;
  }

  bool admissible(Index n_left, Index n_right) const {
    return n_left >= params_.min_node_size && n_right >= params_.min_node_size;
  }

  void scan_numeric(Index f, const std::vector<Index>& rows, const NodeStats& stats, double min_gain, Split& best) {
    const auto col = x_.col(f);
    const auto n = static_cast<Index>(rows.size());
    std::vector<std::pair<double, double>> xy(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double t = params_.criterion == Criterion::variance ? y_(rows[i]) - stats.value : y_(rows[i]);
      xy[i] = {col(rows[i]), t};
    }
    std::sort(xy.begin(), xy.end());
    if (xy.front().first == xy.back().first) return;

    if (params_.criterion == Criterion::variance) {
      const double total = stats.total;
      const double base = total * total / static_cast<double>(n);
      double left = 0.0;
      for (Index i = 0; i + 1 < n; ++i) {
        left += xy[static_cast<std::size_t>(i)].second;
        const double here = xy[static_cast<std::size_t>(i)].first;
        const double next = xy[static_cast<std::size_t>(i + 1)].first;
        if (here == next) continue;
        const Index nl = i + 1, nr = n - nl;
        if (!admissible(nl, nr)) continue;
        const double right = total - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - base;
        consider_numeric(f, gain, min_gain, here, next, best);
      }
    } else {
      std::vector<double> lc(stats.counts.size(), 0.0), rc = stats.counts;
      double lsq = 0.0, rsq = stats.sum_sq_counts;
      const double base = stats.sum_sq_counts / static_cast<double>(n);
      for (Index i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(xy[static_cast<std::size_t>(i)].second);
        lsq += 2.0 * lc[c] + 1.0;
        rsq -= 2.0 * rc[c] - 1.0;
        lc[c] += 1.0;
        rc[c] -= 1.0;
        const double here = xy[static_cast<std::size_t>(i)].first;
        const double next = xy[static_cast<std::size_t>(i + 1)].first;
        if (here == next) continue;
        const Index nl = i + 1, nr = n - nl;
        if (!admissible(nl, nr)) continue;
        const double gain = lsq / static_cast<double>(nl) + rsq / static_cast<double>(nr) - base;
        consider_numeric(f, gain, min_gain, here, next, best);
      }
    }
  }

  static void consider_numeric(Index f, double gain, double min_gain, double here, double next, Split& best) {
    if (!(gain > min_gain) || !(gain > best.gain)) return;
    double threshold = here + 0.5 * (next - here);
    if (!(threshold >= here && threshold < next)) threshold = here;
    best.gain = gain;
    best.feature = static_cast<int>(f);
    best.threshold = threshold;
    best.left_codes.clear();
    best.right_codes.clear();
  }

  void scan_categorical(Index f, const std::vector<Index>& rows, const NodeStats& stats, double min_gain,
                        Split& best) {
    const auto col = x_.col(f);
    const std::size_t n_levels = x_.column(f).levels.size();
    const bool variance = params_.criterion == Criterion::variance;
    const std::size_t n_classes = variance ? 0 : static_cast<std::size_t>(params_.n_classes);
    std::vector<double> count(n_levels, 0.0), sum(n_levels, 0.0);
    std::vector<std::vector<double>> class_counts(variance ? 0 : n_levels, std::vector<double>(n_classes, 0.0));
    for (Index r : rows) {
      const auto c = static_cast<std::size_t>(col(r));
      count[c] += 1.0;
      if (variance)
        sum[c] += y_(r) - stats.value;
      else
        class_counts[c][static_cast<std::size_t>(y_(r))] += 1.0;
    }
    std::vector<Index> present;
    for (std::size_t c = 0; c < n_levels; ++c)
      if (count[c] > 0.0) present.push_back(static_cast<Index>(c));
    if (present.size() < 2) return;

    // Order levels by mean target (variance) or by share of the node's
    // majority class (gini); ties keep code order.
    std::vector<double> key(n_levels, 0.0);
    const auto majority = static_cast<std::size_t>(stats.value);
    for (Index c : present) {
      const auto u = static_cast<std::size_t>(c);
      key[u] = variance ? sum[u] / count[u] : class_counts[u][majority] / count[u];
    }
    std::stable_sort(present.begin(), present.end(),
                     [&](Index a, Index b) { return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)]; });

    const auto n = static_cast<double>(rows.size());
    double nl = 0.0;
    double left = 0.0;
    std::vector<double> lc(n_classes, 0.0);
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
      const auto u = static_cast<std::size_t>(present[k]);
      nl += count[u];
      const double nr = n - nl;
      double gain;
      if (variance) {
        left += sum[u];
        const double right = stats.total - left;
        gain = left * left / nl + right * right / nr - stats.total * stats.total / n;
      } else {
        double lsq = 0.0, rsq = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
          lc[c] += class_counts[u][c];
          const double rcount = stats.counts[c] - lc[c];
          lsq += lc[c] * lc[c];
          rsq += rcount * rcount;
        }
        gain = lsq / nl + rsq / nr - stats.sum_sq_counts / n;
      }
      if (!admissible(static_cast<Index>(nl), static_cast<Index>(nr))) continue;
      if (!(gain > min_gain) || !(gain > best.gain)) continue;
      best.gain = gain;
      best.feature = static_cast<int>(f);
      best.threshold = static_cast<double>(k);
      best.left_codes.assign(present.begin(), present.begin() + static_cast<std::ptrdiff_t>(k + 1));
      best.right_codes.assign(present.begin() + static_cast<std::ptrdiff_t>(k + 1), present.end());
      std::sort(best.left_codes.begin(), best.left_codes.end());
      std::sort(best.right_codes.begin(), best.right_codes.end());
    }
  }

  const Dataset& x_;
  Eigen::Ref<const Eigen::VectorXd> y_;
  GrowParams params_;
  Rng* rng_;
};

}  // namespace

Tree::Tree(std::vector<ColumnInfo> features, std::vector<Node> nodes)
    : features_(std::move(features)), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ModelError("tree needs at least one node");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (node.is_leaf()) continue;
    if (node.feature >= static_cast<int>(features_.size())) throw ModelError("split feature out of range");
    const auto size = static_cast<int>(nodes_.size());
    if (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) || node.left >= size ||
        node.right >= size)
      throw ModelError("malformed tree: child index out of order");
  }
  index_leaves();
}

Tree Tree::grow(const Dataset& x, const Eigen::Ref<const Eigen::VectorXd>& target, std::span<const Index> rows,
                const GrowParams& params, Rng* rng) {
  if (rows.empty()) throw ModelError("cannot grow a tree on zero rows");
  if (target.size() != x.n_rows()) throw ModelError("target length does not match rows");
  Grower grower(x, target, params, rng);
  return Tree(x.columns(), grower.run(rows));
}

void Tree::index_leaves() {
  leaf_nodes_.clear();
  std::vector<int> stack{0};
  std::vector<char> seen(nodes_.size(), 0);
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(i)]) throw ModelError("malformed tree: node reachable twice");
    seen[static_cast<std::size_t>(i)] = 1;
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.is_leaf()) {
      node.leaf_id = static_cast<int>(leaf_nodes_.size());
      leaf_nodes_.push_back(i);
    } else {
      node.leaf_id = -1;
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  n_leaves_ = static_cast<int>(leaf_nodes_.size());
}

int Tree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<int> Tree::route(const Dataset& data) const {
  // resolve split columns by name and build per-node level -> side tables
  std::vector<Index> column_of(features_.size(), -1);
  std::vector<std::vector<signed char>> sides(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (node.is_leaf()) continue;
    const auto f = static_cast<std::size_t>(node.feature);
    const ColumnInfo& info = features_[f];
    if (column_of[f] < 0) {
      const auto j = data.find(info.name);
      if (!j) throw DataError("data lacks split column '" + info.name + "'");
      if (data.column(*j).type != info.type) throw DataError("split column '" + info.name + "' changed type");
      column_of[f] = *j;
    }
    if (info.is_categorical()) {
      const auto& levels = data.column(column_of[f]).levels;
      auto& side = sides[i];
      side.assign(levels.size(), -1);
      for (std::size_t c = 0; c < levels.size(); ++c) {
        if (std::find(node.left_levels.begin(), node.left_levels.end(), levels[c]) != node.left_levels.end())
          side[c] = 0;
        else if (std::find(node.right_levels.begin(), node.right_levels.end(), levels[c]) != node.right_levels.end())
          side[c] = 1;
      }
    }
  }

  std::vector<int> out(static_cast<std::size_t>(data.n_rows()));
  const auto& values = data.values();
  for (Index r = 0; r < data.n_rows(); ++r) {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
      const Node& node = nodes_[static_cast<std::size_t>(i)];
      const auto f = static_cast<std::size_t>(node.feature);
      const double v = values(r, column_of[f]);
      if (features_[f].is_numeric()) {
        i = v <= node.threshold ? node.left : node.right;
      } else {
        const signed char s = sides[static_cast<std::size_t>(i)][static_cast<std::size_t>(v)];
        if (s < 0) throw UnseenLevelError(features_[f].name, data.level_name(column_of[f], v));
        i = s == 0 ? node.left : node.right;
      }
    }
    out[static_cast<std::size_t>(r)] = i;
  }
  return out;
}

std::vector<int> Tree::leaf_ids(const Dataset& data) const {
  auto ids = route(data);
  for (int& i : ids) i = nodes_[static_cast<std::size_t>(i)].leaf_id;
  return ids;
}

Eigen::VectorXd Tree::predict(const Dataset& data) const {
  const auto ids = route(data);
  Eigen::VectorXd out(static_cast<Index>(ids.size()));
  for (std::size_t r = 0; r < ids.size(); ++r) out(static_cast<Index>(r)) = nodes_[static_cast<std::size_t>(ids[r])].value;
  return out;
}

}  // namespace condsub::tree
