#include "condsub/data.hpp"

#include "condsub/error.hpp"
#include "condsub/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace condsub {

std::string_view to_string(ColumnType type) {
  return type == ColumnType::numeric ? "numeric" : "categorical";
}

Dataset::Dataset(std::vector<ColumnInfo> columns, Eigen::MatrixXd values,
                 std::optional<Eigen::VectorXd> target, std::string target_name)
    : columns_(std::move(columns)),
      values_(std::move(values)),
      target_(std::move(target)),
      target_name_(std::move(target_name)) {
  validate();
}

void Dataset::validate() const {
  if (static_cast<Index>(columns_.size()) != values_.cols())
    throw DataError("column metadata does not match value matrix width");
  if (target_ && target_->size() != values_.rows())
    throw DataError("target length does not match row count");
  std::set<std::string_view> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
  }
  for (Index j = 0; j < values_.cols(); ++j) {
    const auto& info = columns_[static_cast<std::size_t>(j)];
    if (!info.is_categorical()) continue;
    const auto n_levels = static_cast<double>(info.levels.size());
    for (Index i = 0; i < values_.rows(); ++i) {
      const double v = values_(i, j);
      if (!(v >= 0.0 && v < n_levels) || v != std::floor(v))
        throw DataError("invalid level code in categorical column '" + info.name + "'");
    }
  }
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

std::optional<Index> Dataset::find(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].name == name) return static_cast<Index>(j);
  return std::nullopt;
}

Index Dataset::index_of(std::string_view name) const {
  if (auto j = find(name)) return *j;
  throw DataError("no column named '" + std::string(name) + "'");
}

const Eigen::VectorXd& Dataset::target() const {
  if (!target_) throw DataError("dataset has no target column");
  return *target_;
}

const std::string& Dataset::level_name(Index j, double code) const {
  const auto& info = column(j);
  return info.levels.at(static_cast<std::size_t>(code));
}

Dataset Dataset::select_rows(std::span<const Index> rows) const {
  Eigen::MatrixXd v(static_cast<Index>(rows.size()), values_.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) v.row(static_cast<Index>(r)) = values_.row(rows[r]);
  std::optional<Eigen::VectorXd> t;
  if (target_) {
    t.emplace(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) (*t)(static_cast<Index>(r)) = (*target_)(rows[r]);
  }
  Dataset out;
  out.columns_ = columns_;
  out.values_ = std::move(v);
  out.target_ = std::move(t);
  out.target_name_ = target_name_;
  return out;
}

Dataset Dataset::select_columns(std::span<const Index> cols) const {
  std::vector<ColumnInfo> info;
  Eigen::MatrixXd v(values_.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    info.push_back(column(cols[c]));
    v.col(static_cast<Index>(c)) = values_.col(cols[c]);
  }
  return Dataset(std::move(info), std::move(v), target_, target_name_);
}

Dataset Dataset::drop_column(Index j) const {
  std::vector<Index> keep;
  for (Index c = 0; c < n_features(); ++c)
    if (c != j) keep.push_back(c);
  return select_columns(keep);
}

Dataset Dataset::with_column(Index j, const Eigen::Ref<const Eigen::VectorXd>& replacement) const {
  if (replacement.size() != n_rows()) throw DataError("replacement column has wrong length");
  Dataset out = *this;
  out.values_.col(j) = replacement;
  return out;
}

Dataset Dataset::with_target(Eigen::VectorXd target, std::string name) const {
  return Dataset(columns_, values_, std::move(target), std::move(name));
}

Dataset Dataset::drop_target() const {
  Dataset out = *this;
  out.target_.reset();
  return out;
}

Dataset Dataset::numeric_only() const {
  std::vector<Index> keep;
  for (Index c = 0; c < n_features(); ++c)
    if (column(c).is_numeric()) keep.push_back(c);
  return select_columns(keep);
}

Dataset Dataset::stack(const Dataset& top, const Dataset& bottom) {
  if (top.columns_ != bottom.columns_) throw DataError("cannot stack datasets with different schemas");
  if (top.has_target() != bottom.has_target())
    throw DataError("cannot stack datasets with and without target");
  Eigen::MatrixXd v(top.n_rows() + bottom.n_rows(), top.n_features());
  v << top.values_, bottom.values_;
  std::optional<Eigen::VectorXd> t;
  if (top.target_) {
    t.emplace(v.rows());
    *t << *top.target_, *bottom.target_;
  }
  return Dataset(top.columns_, std::move(v), std::move(t), top.target_name_);
}

std::vector<std::vector<Index>> split_indices(Index n, const SplitSpec& spec) {
  if (spec.fractions.empty()) throw DataError("split needs at least one fraction");
  double total = 0.0;
  for (double f : spec.fractions) {
    if (!(f >= 0.0)) throw DataError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DataError("split fractions must sum to 1");

  std::vector<Index> sizes;
  Index assigned = 0;
  for (double f : spec.fractions) {
    sizes.push_back(static_cast<Index>(std::floor(static_cast<double>(n) * f + 1e-9)));
    assigned += sizes.back();
  }
  for (std::size_t p = 0; assigned < n; p = (p + 1) % sizes.size(), ++assigned) ++sizes[p];
  // floor(n f + eps) can overshoot only through the epsilon guard
  for (std::size_t p = sizes.size(); assigned > n && p-- > 0;) {
    while (assigned > n && sizes[p] > 0) --sizes[p], --assigned;
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(spec.seed, {0x5b117});
  shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<Index>> parts(sizes.size());
  auto it = order.begin();
  for (std::size_t p = 0; p < sizes.size(); ++p) {
    parts[p].assign(it, it + sizes[p]);
    std::sort(parts[p].begin(), parts[p].end());
    it += sizes[p];
  }
  return parts;
}

std::vector<Dataset> split(const Dataset& data, const SplitSpec& spec) {
  std::vector<Dataset> out;
  for (const auto& rows : split_indices(data.n_rows(), spec)) out.push_back(data.select_rows(rows));
  return out;
}

std::vector<Index> subsample_indices(Index n, Index max_rows, std::uint64_t seed) {
  if (max_rows < 1) throw DataError("subsample needs max_rows >= 1");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (max_rows >= n) return order;
  Rng rng = make_rng(seed, {0x5ab5});
  // partial Fisher-Yates: the first max_rows slots become the sample
  for (Index i = 0; i < max_rows; ++i) {
    const auto k = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i + k)]);
  }
  order.resize(static_cast<std::size_t>(max_rows));
  std::sort(order.begin(), order.end());
  return order;
}

Dataset subsample(const Dataset& data, Index max_rows, std::uint64_t seed) {
  return data.select_rows(subsample_indices(data.n_rows(), max_rows, seed));
}

Standardizer Standardizer::fit(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Standardizer s;
  const Index n = x.rows();
  s.mean = x.colwise().mean();
  s.scale = Eigen::RowVectorXd::Ones(x.cols());
  if (n > 1) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double var = (x.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(n - 1);
      if (var > 0.0) s.scale(j) = std::sqrt(var);
    }
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

}  // namespace condsub
