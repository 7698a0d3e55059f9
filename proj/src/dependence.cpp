#include "condsub/dependence.hpp"

#include "condsub/error.hpp"
#include "condsub/models.hpp"
#include "condsub/parallel.hpp"
#include "condsub/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace condsub {

namespace {

double fold_score(const Dataset& x, const Eigen::VectorXd& target, const ColumnInfo& info,
                  const std::vector<Index>& train_rows, const std::vector<Index>& test_rows, std::uint64_t seed,
                  Index n_trees) {
  const Dataset x_train = x.select_rows(train_rows), x_test = x.select_rows(test_rows);
  Eigen::VectorXd y_train(static_cast<Index>(train_rows.size())), y_test(static_cast<Index>(test_rows.size()));
  for (std::size_t i = 0; i < train_rows.size(); ++i) y_train(static_cast<Index>(i)) = target(train_rows[i]);
  for (std::size_t i = 0; i < test_rows.size(); ++i) y_test(static_cast<Index>(i)) = target(test_rows[i]);
  ForestOptions opts;
  opts.n_trees = n_trees;

  if (info.is_numeric()) {
    const double var = (y_test.array() - y_test.mean()).square().mean();
    if (!(var > 0.0)) throw DataError("feature '" + info.name + "' is constant on a fold");
    const auto forest = fit_forest(x_train.with_target(y_train, info.name), seed, opts);
    const double mse = (forest->predict(x_test) - y_test).array().square().mean();
    return 1.0 - mse / var;
  }

  const auto n_classes = static_cast<Index>(info.levels.size());
  std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
  for (Index i = 0; i < y_train.size(); ++i) ++counts[static_cast<std::size_t>(y_train(i))];
  const auto mode = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  const double mmce_mode = (y_test.array() != mode).cast<double>().mean();
  if (!(mmce_mode > 0.0)) throw DataError("feature '" + info.name + "' is constant on a fold");
  const auto forest = fit_forest_classifier(x_train, y_train, n_classes, seed, opts);
  const double mmce = (forest->predict(x_test).array() != y_test.array()).cast<double>().mean();
  return 1.0 - mmce / mmce_mode;
}

}  // namespace

DependenceReport dependence_report(const Dataset& d, std::uint64_t seed, Index n_trees) {
  const Dataset data = d.drop_target();
  if (data.n_features() < 2) throw DataError("dependence report needs at least two features");
  if (data.n_rows() < 60) throw DataError("dependence report needs at least 60 rows");
  for (Index j = 0; j < data.n_features(); ++j) {
    const auto col = data.col(j);
    if (col.minCoeff() == col.maxCoeff())
      throw DataError("feature '" + data.column(j).name + "' is constant; explained loss is undefined");
  }

  const auto folds = split_indices(data.n_rows(), SplitSpec{{0.5, 0.5}, derive_seed(seed, {0xf01d})});
  DependenceReport report;
  report.n_rows = data.n_rows();
  report.n_trees = n_trees;
  report.seed = seed;
  report.rows.resize(static_cast<std::size_t>(data.n_features()));
  parallel_for(report.rows.size(), [&](std::size_t uj) {
    const auto j = static_cast<Index>(uj);
    const ColumnInfo& info = data.column(j);
    const Dataset others = data.drop_column(j);
    const Eigen::VectorXd target = data.col(j);
    DependenceRow row;
    row.name = info.name;
    row.type = info.type;
    for (int f = 0; f < 2; ++f)
      row.fold_scores[f] = fold_score(others, target, info, folds[static_cast<std::size_t>(f)],
                                      folds[static_cast<std::size_t>(1 - f)],
                                      derive_seed(seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(f)}),
                                      n_trees);
    row.explained = 0.5 * (row.fold_scores[0] + row.fold_scores[1]);
    report.rows[uj] = std::move(row);
  });
  return report;
}

std::string DependenceReport::to_csv() const {
  std::ostringstream out;
  out << "name,type,explained\n";
  for (const auto& r : rows) out << r.name << ',' << to_string(r.type) << ',' << format_double(r.explained) << '\n';
  return out.str();
}

std::string DependenceReport::to_text() const {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-11s  %9s\n", static_cast<int>(width), "feature", "type", "explained");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-11s  %8.1f%%\n", static_cast<int>(width), r.name.c_str(),
                  std::string(to_string(r.type)).c_str(), 100.0 * r.explained);
    out << buf;
  }
  return out.str();
}

}  // namespace condsub
