#pragma once

#include "condsub/data.hpp"
#include "condsub/models.hpp"
#include "condsub/rng.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace condsub {

enum class ScenarioKind { independent, linear, nonlinear, multi_linear };

std::string_view to_string(ScenarioKind kind);
/// Accepts "independent", "linear", "nonlinear" / "non-linear", "multi_linear" / "multi-linear".
ScenarioKind parse_scenario(std::string_view text);

/// Ground-truth simulation: x2..x_p i.i.d. N(0, 1), x1 = g(x_{-1}) + sd(x_{-1})·N(0, 1),
/// y = x1·x2 + (x1 + ... + x10) + N(0, noise_sd²). Columns beyond x10 are pure noise.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::independent;
  Index n = 1000;
  Index p_total = 10;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

/// Conditional mean and sd of x1 given a full feature row (entry 0 ignored).
/// Both the generator and the ground-truth sampler go through these.
double x1_conditional_mean(ScenarioKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& row);
double x1_conditional_sd(ScenarioKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Fresh draw of x1 for every row of `x` (columns x1..x_p) from its true conditional.
Eigen::VectorXd sample_x1(ScenarioKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x, Rng& rng);

std::vector<std::string> scenario_columns(Index p_total);
Dataset generate(const ScenarioSpec& spec);

/// f(x) = x1·x2 + x1 + ... + x10, without noise.
ModelPtr true_model(const ScenarioSpec& spec);

/// Dependent numeric data for the fidelity experiments: p >= 8 columns
/// driven by two latent factors with threshold and product interactions,
/// so that deeper partitions keep capturing structure.
Dataset generate_dependent(Index n, Index p, std::uint64_t seed);

enum class Table2Method { cs_pfi_cart, impute_rf, marginal_pfi };

std::string_view to_string(Table2Method method);
Table2Method parse_table2_method(std::string_view text);

struct Table2Config {
  std::vector<ScenarioKind> scenarios{ScenarioKind::independent, ScenarioKind::linear, ScenarioKind::nonlinear,
                                      ScenarioKind::multi_linear};
  std::vector<Index> sizes{3000};
  std::vector<Index> p_totals{10};
  std::vector<Table2Method> methods{Table2Method::cs_pfi_cart, Table2Method::impute_rf, Table2Method::marginal_pfi};
  Index replicates = 50;
  /// 1: true model; 2: random forest fitted on the training part.
  int setting = 1;
  int depth = 30;
  Index min_node_size = 30;
  Index M = 5;
  /// Rows for the ground-truth estimate (once per scenario in setting 1,
  /// once per replicate in setting 2).
  Index gt_n_eval = 1000000;
  Index gt_M = 1;
  Index forest_trees = 100;
  Index impute_trees = 100;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

struct Table2Cell {
  ScenarioKind scenario = ScenarioKind::independent;
  Index n = 0;
  Index p_total = 10;
  Table2Method method = Table2Method::cs_pfi_cart;
  /// Mean squared deviation from the ground truth over replicates.
  double mse = 0.0;
  double mean_estimate = 0.0;
  double mean_ground_truth = 0.0;
  std::vector<double> estimates;
  std::vector<double> ground_truth;
};

struct Table2Result {
  Table2Config config;
  std::vector<Table2Cell> cells;

  const Table2Cell& cell(ScenarioKind scenario, Index n, Index p_total, Table2Method method) const;
  /// Rows per scenario / n / p, one column per method.
  std::string to_text() const;
  /// One line per cell: scenario,n,p_total,method,mse,mean_estimate,mean_ground_truth,replicates.
  std::string to_csv() const;
};

/// Conditional-PFI estimation benchmark for feature x1. Each replicate
/// generates n rows, trains samplers on 2/3 and estimates on the remaining
/// third; replicates run in parallel with seeds derived from their indices.
Table2Result run_table2(const Table2Config& config);

}  // namespace condsub
