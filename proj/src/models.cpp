#include "condsub/models.hpp"

#include "condsub/error.hpp"
#include "condsub/parallel.hpp"
#include "condsub/rng.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace condsub {

std::string_view to_string(Loss loss) {
  return loss == Loss::squared_error ? "squared_error" : "misclassification";
}

Loss parse_loss(std::string_view text) {
  if (text == "squared_error" || text == "mse") return Loss::squared_error;
  if (text == "misclassification" || text == "mmce") return Loss::misclassification;
  throw Error("unknown loss '" + std::string(text) + "'");
}

double mean_loss(Loss loss, const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& yhat) {
  if (y.size() != yhat.size()) throw ModelError("loss: prediction count does not match targets");
  if (y.size() == 0) throw ModelError("loss of an empty sample");
  double sum = 0.0;
  for (Index i = 0; i < y.size(); ++i) sum += pointwise_loss(loss, y(i), yhat(i));
  return sum / static_cast<double>(y.size());
}

Eigen::MatrixXd PredictiveModel::feature_matrix(const Dataset& data) const {
  Eigen::MatrixXd x(data.n_rows(), static_cast<Index>(features_.size()));
  for (std::size_t c = 0; c < features_.size(); ++c) {
    const auto j = data.find(features_[c].name);
    if (!j) throw DataError("model input lacks column '" + features_[c].name + "'");
    if (data.column(*j).type != features_[c].type)
      throw DataError("model input column '" + features_[c].name + "' has type " +
                      std::string(to_string(data.column(*j).type)));
    x.col(static_cast<Index>(c)) = data.col(*j);
  }
  return x;
}

namespace {

std::vector<ColumnInfo> numeric_columns(const std::vector<std::string>& names) {
  std::vector<ColumnInfo> cols;
  for (const auto& n : names) cols.push_back({n, ColumnType::numeric, {}});
  return cols;
}

void require_numeric(const Dataset& train, std::string_view learner) {
  for (const auto& c : train.columns())
    if (!c.is_numeric())
      throw ModelError(std::string(learner) + " needs numeric features; '" + c.name + "' is categorical");
}

}  // namespace

FunctionModel::FunctionModel(std::vector<std::string> feature_names, Fn fn, std::string name)
    : PredictiveModel(numeric_columns(feature_names)), fn_(std::move(fn)), name_(std::move(name)) {}

Eigen::VectorXd FunctionModel::predict(const Dataset& data) const {
  Eigen::VectorXd out = fn_(feature_matrix(data));
  if (out.size() != data.n_rows()) throw ModelError("model returned wrong number of predictions");
  return out;
}

LinearModel::LinearModel(std::vector<ColumnInfo> features, double intercept, Eigen::VectorXd coefficients)
    : PredictiveModel(std::move(features)), intercept_(intercept), coefficients_(std::move(coefficients)) {}

Eigen::VectorXd LinearModel::predict(const Dataset& data) const {
  return (feature_matrix(data) * coefficients_).array() + intercept_;
}

std::shared_ptr<const LinearModel> fit_ols(const Dataset& train) {
  require_numeric(train, "ols");
  const Index n = train.n_rows(), p = train.n_features();
  if (n <= p) throw ModelError("ols needs more rows than features");
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = train.values();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p + 1) {
    // grow the design one column at a time; a column that adds no rank is
    // collinear with the ones kept so far
    const double threshold = qr.threshold();
    std::vector<Index> kept{0};
    std::vector<std::string> offenders;
    for (Index c = 1; c <= p; ++c) {
      Eigen::MatrixXd sub(n, static_cast<Index>(kept.size()) + 1);
      for (std::size_t k = 0; k < kept.size(); ++k) sub.col(static_cast<Index>(k)) = design.col(kept[k]);
      sub.rightCols(1) = design.col(c);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> q(sub);
      q.setThreshold(threshold);
      if (q.rank() == sub.cols())
        kept.push_back(c);
      else
        offenders.push_back(train.column(c - 1).name);
    }
    std::string msg = "rank-deficient design: column(s) ";
    for (std::size_t i = 0; i < offenders.size(); ++i) msg += (i ? ", '" : "'") + offenders[i] + "'";
    msg += " collinear with the intercept and earlier columns";
    throw ModelError(msg);
  }
  const Eigen::VectorXd beta = qr.solve(train.target());
  return std::make_shared<LinearModel>(train.columns(), beta(0), beta.tail(p));
}

KnnModel::KnnModel(std::vector<ColumnInfo> features, Standardizer scaler, Eigen::MatrixXd points,
                   Eigen::VectorXd targets, Index k)
    : PredictiveModel(std::move(features)),
      scaler_(std::move(scaler)),
      points_(std::move(points)),
      targets_(std::move(targets)),
      k_(k) {}

Eigen::VectorXd KnnModel::predict(const Dataset& data) const {
  const Eigen::MatrixXd q = scaler_.apply(feature_matrix(data));
  const Index n = points_.rows();
  Eigen::VectorXd out(q.rows());
  std::vector<std::pair<double, Index>> d(static_cast<std::size_t>(n));
  for (Index i = 0; i < q.rows(); ++i) {
    for (Index r = 0; r < n; ++r) d[static_cast<std::size_t>(r)] = {(points_.row(r) - q.row(i)).squaredNorm(), r};
    std::partial_sort(d.begin(), d.begin() + k_, d.end());
    double sum = 0.0;
    for (Index r = 0; r < k_; ++r) sum += targets_(d[static_cast<std::size_t>(r)].second);
    out(i) = sum / static_cast<double>(k_);
  }
  return out;
}

std::shared_ptr<const KnnModel> fit_knn(const Dataset& train, Index k) {
  require_numeric(train, "knn");
  if (k < 1) throw ModelError("knn needs k >= 1");
  if (k > train.n_rows()) throw ModelError("knn: k exceeds the number of training rows");
  Standardizer s = Standardizer::fit(train.values());
  Eigen::MatrixXd points = s.apply(train.values());
  return std::make_shared<KnnModel>(train.columns(), std::move(s), std::move(points), train.target(), k);
}

ForestModel::ForestModel(std::vector<ColumnInfo> features, std::vector<tree::Tree> trees, Index n_classes,
                         std::vector<std::vector<bool>> in_bag)
    : PredictiveModel(std::move(features)), trees_(std::move(trees)), n_classes_(n_classes), in_bag_(std::move(in_bag)) {
  if (trees_.empty()) throw ModelError("forest needs at least one tree");
  if (!in_bag_.empty() && in_bag_.size() != trees_.size()) throw ModelError("in-bag table does not match trees");
}

Eigen::VectorXd ForestModel::oob_predict(const Dataset& train) const {
  if (n_classes_ != 0) throw ModelError("out-of-bag predictions are implemented for regression forests");
  if (in_bag_.empty()) throw ModelError("forest was built without in-bag records");
  const Index n = train.n_rows();
  for (const auto& bag : in_bag_)
    if (static_cast<Index>(bag.size()) != n) throw ModelError("out-of-bag prediction needs the training data");
  std::vector<Eigen::VectorXd> per_tree(trees_.size());
  parallel_for(trees_.size(), [&](std::size_t t) { per_tree[t] = trees_[t].predict(train); });
  Eigen::VectorXd out(n);
  for (Index i = 0; i < n; ++i) {
    double oob = 0.0, all = 0.0;
    Index n_oob = 0;
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      all += per_tree[t](i);
      if (!in_bag_[t][static_cast<std::size_t>(i)]) {
        oob += per_tree[t](i);
        ++n_oob;
      }
    }
    out(i) = n_oob ? oob / static_cast<double>(n_oob) : all / static_cast<double>(trees_.size());
  }
  return out;
}

Eigen::VectorXd ForestModel::predict(const Dataset& data) const {
  std::vector<Eigen::VectorXd> per_tree(trees_.size());
  parallel_for(trees_.size(), [&](std::size_t t) { per_tree[t] = trees_[t].predict(data); });
  const Index n = data.n_rows();
  if (n_classes_ == 0) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    for (const auto& p : per_tree) sum += p;
    return sum / static_cast<double>(trees_.size());
  }
  Eigen::VectorXd out(n);
  std::vector<Index> votes(static_cast<std::size_t>(n_classes_));
  for (Index i = 0; i < n; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& p : per_tree) ++votes[static_cast<std::size_t>(p(i))];
    out(i) = static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

namespace {

struct Grown {
  std::vector<tree::Tree> trees;
  std::vector<std::vector<bool>> in_bag;
};

Grown grow_forest(const Dataset& x, const Eigen::VectorXd& y, tree::GrowParams params, std::uint64_t seed,
                  const ForestOptions& options) {
  if (options.n_trees < 1) throw ModelError("forest needs n_trees >= 1");
  if (x.n_rows() < 1) throw ModelError("forest needs at least one training row");
  if (x.n_features() < 1) throw ModelError("forest needs at least one feature");
  const Index p = x.n_features();
  params.mtry = options.mtry > 0 ? std::min(options.mtry, p) : (p + 2) / 3;
  params.min_node_size = options.min_node_size;
  params.max_depth = options.max_depth;

  Grown g;
  g.trees.resize(static_cast<std::size_t>(options.n_trees));
  g.in_bag.resize(g.trees.size());
  parallel_for(g.trees.size(), [&](std::size_t t) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
    const auto n = static_cast<std::size_t>(x.n_rows());
    std::vector<Index> rows(n);
    g.in_bag[t].assign(n, false);
    for (auto& r : rows) {
      r = static_cast<Index>(uniform_index(rng, n));
      g.in_bag[t][static_cast<std::size_t>(r)] = true;
    }
    g.trees[t] = tree::Tree::grow(x, y, rows, params, &rng);
  });
  return g;
}

}  // namespace

std::shared_ptr<const ForestModel> fit_forest(const Dataset& train, std::uint64_t seed, const ForestOptions& options) {
  tree::GrowParams params;
  params.criterion = tree::Criterion::variance;
  auto g = grow_forest(train, train.target(), params, seed, options);
  return std::make_shared<ForestModel>(train.columns(), std::move(g.trees), 0, std::move(g.in_bag));
}

std::shared_ptr<const ForestModel> fit_forest_classifier(const Dataset& x, const Eigen::VectorXd& codes, Index n_classes,
                                                         std::uint64_t seed, const ForestOptions& options) {
  if (n_classes < 1) throw ModelError("classifier needs at least one class");
  if (codes.size() != x.n_rows()) throw ModelError("class codes do not match rows");
  for (Index i = 0; i < codes.size(); ++i)
    if (!(codes(i) >= 0 && codes(i) < static_cast<double>(n_classes)) || codes(i) != std::floor(codes(i)))
      throw ModelError("invalid class code");
  tree::GrowParams params;
  params.criterion = tree::Criterion::gini;
  params.n_classes = n_classes;
  auto g = grow_forest(x, codes, params, seed, options);
  return std::make_shared<ForestModel>(x.columns(), std::move(g.trees), n_classes, std::move(g.in_bag));
}

}  // namespace condsub
