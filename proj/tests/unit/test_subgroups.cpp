#include "doctest.h"
#include "helpers.hpp"

#include "condsub/error.hpp"
#include "condsub/subgroups.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace condsub;

namespace {

struct BestSplit {
  Index feature = -1;
  double threshold = 0.0;
};

// Exhaustive search for the SSE-minimizing numeric split of column j.
BestSplit brute_force_root(const Dataset& x, Index j, Index min_node) {
  BestSplit best;
  double best_sse = std::numeric_limits<double>::infinity();
  const Index n = x.n_rows();
  for (Index f = 0; f < x.n_features(); ++f) {
    if (f == j) continue;
    std::vector<double> cuts(x.col(f).data(), x.col(f).data() + n);
    std::sort(cuts.begin(), cuts.end());
    for (Index c = 0; c + 1 < n; ++c) {
      if (cuts[c] == cuts[c + 1]) continue;
      const double t = 0.5 * (cuts[c] + cuts[c + 1]);
      double sl = 0, sr = 0, ql = 0, qr = 0;
      Index nl = 0, nr = 0;
      for (Index i = 0; i < n; ++i) {
        const double v = x(i, j);
        if (x(i, f) <= t) {
          sl += v, ql += v * v, ++nl;
        } else {
          sr += v, qr += v * v, ++nr;
        }
      }
      if (nl < min_node || nr < min_node) continue;
      const double sse = ql - sl * sl / nl + qr - sr * sr / nr;
      if (sse < best_sse - 1e-9) {
        best_sse = sse;
        best = {f, t};
      }
    }
  }
  return best;
}

Dataset step_data(Index n, std::uint64_t seed) {
  Eigen::MatrixXd x = testing::normal_matrix(n, 4, seed);
  for (Index i = 0; i < n; ++i) x(i, 0) = (x(i, 2) > 0.3 ? 4.0 : 0.0) + 0.1 * x(i, 0);
  return testing::numeric_dataset(x);
}

}  // namespace

TEST_SUITE("subgroups") {
  TEST_CASE("root split agrees with exhaustive search") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Dataset d = step_data(120, seed);
      const auto part = fit_partition(d, 0, PartitionParams{1, 10});
      const auto oracle = brute_force_root(d, 0, 10);
      REQUIRE(part.n_groups() == 2);
      const auto& root = part.tree().nodes()[0];
      CHECK(part.tree().features()[static_cast<std::size_t>(root.feature)].name ==
            d.column(oracle.feature).name);
      CHECK(root.threshold == doctest::Approx(oracle.threshold));
    }
  }

  TEST_CASE("groups respect depth and size limits") {
    const Dataset d = step_data(600, 4);
    for (int depth : {1, 2, 3}) {
      const auto part = fit_partition(d, 0, PartitionParams{depth, 30});
      CHECK(part.n_groups() <= (1 << depth));
      CHECK(part.tree().depth() <= depth);
      for (const auto& g : part.groups()) CHECK(g.n_train >= 30);
      CHECK_FALSE(part.splits_on("x1"));
    }
  }

  TEST_CASE("assignment matches the rendered leaf conditions") {
    const Dataset d = step_data(400, 5);
    const auto part = fit_partition(d, 0, PartitionParams{3, 20});
    const auto groups = part.assign(d);
    const auto conds = part.leaf_conditions();
    for (Index i = 0; i < d.n_rows(); ++i) {
      int matching = -1, count = 0;
      for (std::size_t k = 0; k < conds.size(); ++k) {
        bool all = true;
        for (const auto& c : conds[k]) all = all && c.holds(d, i, d.index_of(c.column));
        if (all) {
          matching = static_cast<int>(k);
          ++count;
        }
      }
      CHECK(count == 1);
      CHECK(matching == groups[static_cast<std::size_t>(i)]);
    }
    for (const auto& g : part.groups()) CHECK(g.rule.find("x1") == std::string::npos);
  }

  TEST_CASE("small samples and degenerate inputs") {
    const Dataset d = step_data(50, 6);
    CHECK(fit_partition(d, 0, PartitionParams{30, 30}).n_groups() == 1);
    CHECK(single_group_partition(d, 0).assign(d) == std::vector<int>(50, 0));
    CHECK(single_group_partition(d, 0).groups()[0].rule == "TRUE");
    CHECK_THROWS_AS(fit_partition(d, 7), Error);
    CHECK_THROWS_AS(fit_partition(d.select_columns(std::vector<Index>{0}), 0), Error);
    Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(80, 2);
    flat.col(0) = testing::normal_matrix(80, 1, 1);
    CHECK_THROWS_AS(fit_partition(testing::numeric_dataset(flat), 0), Error);
  }

  TEST_CASE("categorical splits and unseen levels") {
    const Index n = 200;
    Eigen::MatrixXd v(n, 2);
    for (Index i = 0; i < n; ++i) {
      v(i, 1) = static_cast<double>(i % 3);
      v(i, 0) = (i % 3 == 1 ? 5.0 : 0.0) + 0.01 * static_cast<double>(i % 7);
    }
    const Dataset d({{"x", ColumnType::numeric, {}}, {"season", ColumnType::categorical, {"a", "b", "c"}}}, v);
    const auto part = fit_partition(d, 0, PartitionParams{1, 10});
    REQUIRE(part.n_groups() == 2);
    const auto rules = describe_groups(part);
    CHECK(std::find(rules.begin(), rules.end(), "season in {b}") != rules.end());

    Eigen::MatrixXd w(1, 2);
    w << 0.0, 0.0;
    const Dataset other({{"x", ColumnType::numeric, {}}, {"season", ColumnType::categorical, {"z"}}}, w);
    CHECK_THROWS_AS(part.assign(other), UnseenLevelError);
  }

  TEST_CASE("json round trip preserves assignments") {
    const Dataset d = step_data(300, 7);
    const auto part = fit_partition(d, 0, PartitionParams{2, 20});
    const auto back = SubgroupPartition::from_json(nlohmann::json::parse(part.to_json().dump()));
    CHECK(back.assign(d) == part.assign(d));
    CHECK(back.n_groups() == part.n_groups());
    CHECK(describe_groups(back) == describe_groups(part));
    CHECK(part.to_json()["n_groups"] == part.n_groups());
  }

  TEST_CASE("rule rendering") {
    CHECK(render_rule({}) == "TRUE");
    Condition a{"x2", true, 0.5, {}, false};
    Condition b{"season", true, 0.0, {"a", "b"}, true};
    CHECK(render_rule({a, b}) == "x2 <= 0.5 AND season in {a, b}");
  }
}
