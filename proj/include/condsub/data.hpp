#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condsub {

using Index = Eigen::Index;

enum class ColumnType { numeric, categorical };

std::string_view to_string(ColumnType type);

/// Name, type and (for categorical columns) the closed level table. Cell
/// values of a categorical column are level codes 0..levels.size()-1.
struct ColumnInfo {
  std::string name;
  ColumnType type = ColumnType::numeric;
  std::vector<std::string> levels;

  bool is_numeric() const { return type == ColumnType::numeric; }
  bool is_categorical() const { return type == ColumnType::categorical; }

  friend bool operator==(const ColumnInfo&, const ColumnInfo&) = default;
};

/// Column-oriented table of features with an optional numeric target.
///
/// Feature cells live in a dense column-major matrix; categorical cells hold
/// level codes. A Dataset is never modified in place: every transformation
/// returns a new value, which makes instances safe to share across threads.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ColumnInfo> columns, Eigen::MatrixXd values,
          std::optional<Eigen::VectorXd> target = std::nullopt, std::string target_name = "y");

  Index n_rows() const { return values_.rows(); }
  Index n_features() const { return values_.cols(); }

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd::ConstColXpr col(Index j) const { return values_.col(j); }
  double operator()(Index row, Index j) const { return values_(row, j); }

  const std::vector<ColumnInfo>& columns() const { return columns_; }
  const ColumnInfo& column(Index j) const { return columns_.at(static_cast<std::size_t>(j)); }
  std::vector<std::string> column_names() const;

  std::optional<Index> find(std::string_view name) const;
  /// Throws DataError when the column does not exist.
  Index index_of(std::string_view name) const;

  bool has_target() const { return target_.has_value(); }
  /// Throws DataError when the dataset carries no target.
  const Eigen::VectorXd& target() const;
  const std::string& target_name() const { return target_name_; }

  const std::string& level_name(Index j, double code) const;

  Dataset select_rows(std::span<const Index> rows) const;
  Dataset select_columns(std::span<const Index> cols) const;
  Dataset drop_column(Index j) const;
  /// Copy with column j replaced; all other columns bit-identical.
  Dataset with_column(Index j, const Eigen::Ref<const Eigen::VectorXd>& replacement) const;
  Dataset with_target(Eigen::VectorXd target, std::string name) const;
  Dataset drop_target() const;
  /// Keeps numeric feature columns only.
  Dataset numeric_only() const;
  /// Row-wise concatenation; schemas must match exactly.
  static Dataset stack(const Dataset& top, const Dataset& bottom);

 private:
  void validate() const;

  std::vector<ColumnInfo> columns_;
  Eigen::MatrixXd values_;
  std::optional<Eigen::VectorXd> target_;
  std::string target_name_ = "y";
};

/// Column type declarations, one `name:type` pair per line.
struct Schema {
  std::map<std::string, ColumnType, std::less<>> types;

  static Schema parse(std::string_view text);
  static Schema load(const std::filesystem::path& path);
};

struct CsvOptions {
  std::optional<Schema> schema;
  /// Column to lift out as the numeric target.
  std::optional<std::string> target;
};

/// RFC-4180 CSV with mandatory header. Columns whose cells all parse as
/// decimals are numeric, everything else categorical, unless the schema
/// says otherwise. Leading lines starting with '#' (provenance headers
/// written by this library) are skipped. Throws LoadError.
Dataset read_csv(std::istream& in, const CsvOptions& options = {},
                 std::string_view source = "<stream>");
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes features then target (if any); numbers in shortest round-trip form.
void write_csv(const Dataset& data, std::ostream& out);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

struct SplitSpec {
  std::vector<double> fractions;
  std::uint64_t seed = 0;
};

/// Disjoint row-index partition. Part sizes are floor(n * f_i); leftover rows
/// go one each to the earliest parts. Indices within a part stay ascending.
std::vector<std::vector<Index>> split_indices(Index n, const SplitSpec& spec);
std::vector<Dataset> split(const Dataset& data, const SplitSpec& spec);

/// min(max_rows, n) rows drawn without replacement, ascending row order.
std::vector<Index> subsample_indices(Index n, Index max_rows, std::uint64_t seed);
Dataset subsample(const Dataset& data, Index max_rows, std::uint64_t seed);

/// Per-column centering and scaling to unit sample standard deviation.
/// Columns with zero spread are only centered.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::Ref<const Eigen::MatrixXd>& x);
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

}  // namespace condsub
