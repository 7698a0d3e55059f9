#pragma once

#include "condsub/data.hpp"
#include "condsub/models.hpp"
#include "condsub/rng.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

using condsub::ColumnInfo;
using condsub::ColumnType;
using condsub::Dataset;
using condsub::Index;

inline std::vector<ColumnInfo> numeric_cols(std::initializer_list<const char*> names) {
  std::vector<ColumnInfo> out;
  for (const char* n : names) out.push_back({n, ColumnType::numeric, {}});
  return out;
}

/// n x p standard normal matrix from a fixed stream.
inline Eigen::MatrixXd normal_matrix(Index n, Index p, std::uint64_t seed) {
  condsub::Rng rng = condsub::make_rng(seed);
  Eigen::MatrixXd m(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) m(i, j) = condsub::standard_normal(rng);
  return m;
}

inline Dataset numeric_dataset(const Eigen::MatrixXd& x, std::optional<Eigen::VectorXd> y = std::nullopt) {
  std::vector<ColumnInfo> cols;
  for (Index j = 0; j < x.cols(); ++j) cols.push_back({"x" + std::to_string(j + 1), ColumnType::numeric, {}});
  return Dataset(cols, x, std::move(y));
}

inline condsub::ModelPtr linear_fn(std::vector<std::string> names, std::vector<double> beta) {
  return std::make_shared<condsub::FunctionModel>(names, [beta](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (std::size_t j = 0; j < beta.size(); ++j) out += beta[j] * x.col(static_cast<Index>(j));
    return out;
  });
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::path(CONDSUB_TEST_WORK_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string stub(const char* name) { return std::string(CONDSUB_STUB_DIR) + "/" + name; }

}  // namespace testing
