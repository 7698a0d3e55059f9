#include "condsub/simulation.hpp"

#include "condsub/error.hpp"
#include "condsub/importance.hpp"
#include "condsub/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace condsub {

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::independent: return "independent";
    case ScenarioKind::linear: return "linear";
    case ScenarioKind::nonlinear: return "nonlinear";
    case ScenarioKind::multi_linear: return "multi_linear";
  }
  return "?";
}

ScenarioKind parse_scenario(std::string_view text) {
  if (text == "independent") return ScenarioKind::independent;
  if (text == "linear") return ScenarioKind::linear;
  if (text == "nonlinear" || text == "non-linear") return ScenarioKind::nonlinear;
  if (text == "multi_linear" || text == "multi-linear") return ScenarioKind::multi_linear;
  throw Error("unknown scenario '" + std::string(text) + "'");
}

double x1_conditional_mean(ScenarioKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  switch (kind) {
    case ScenarioKind::independent: return 0.0;
    case ScenarioKind::linear: return row(1);
    case ScenarioKind::nonlinear: {
      const bool x2_pos = row(1) > 0.0, x3_pos = row(2) > 0.0;
      return 3.0 * x2_pos - 3.0 * (!x2_pos) * x3_pos;
    }
    case ScenarioKind::multi_linear: return row.segment(1, 9).sum();
  }
  return 0.0;
}

double x1_conditional_sd(ScenarioKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  switch (kind) {
    case ScenarioKind::independent:
    case ScenarioKind::linear: return 1.0;
    case ScenarioKind::nonlinear: {
      const bool x2_pos = row(1) > 0.0, x3_pos = row(2) > 0.0;
      return 1.0 * x2_pos + 2.0 * (!x2_pos) * x3_pos + 5.0 * (!x2_pos) * (!x3_pos);
    }
    case ScenarioKind::multi_linear: return 5.0;
  }
  return 1.0;
}

Eigen::VectorXd sample_x1(ScenarioKind kind, const Eigen::Ref<const Eigen::MatrixXd>& x, Rng& rng) {
  if (x.cols() < 10) throw DataError("scenario data needs at least 10 columns");
  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i)
    out(i) = x1_conditional_mean(kind, x.row(i)) + x1_conditional_sd(kind, x.row(i)) * standard_normal(rng);
  return out;
}

std::vector<std::string> scenario_columns(Index p_total) {
  std::vector<std::string> names;
  for (Index c = 1; c <= p_total; ++c) names.push_back("x" + std::to_string(c));
  return names;
}

Dataset generate(const ScenarioSpec& spec) {
  if (spec.p_total < 10) throw DataError("scenarios need p_total >= 10");
  if (spec.n < 1) throw DataError("scenarios need n >= 1");
  if (!(spec.noise_sd >= 0.0)) throw DataError("noise sd must be non-negative");
  Rng rng = make_rng(spec.seed, {0x5ce7});
  Eigen::MatrixXd x(spec.n, spec.p_total);
  Eigen::VectorXd y(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index c = 1; c < spec.p_total; ++c) x(i, c) = standard_normal(rng);
    x(i, 0) = x1_conditional_mean(spec.kind, x.row(i)) + x1_conditional_sd(spec.kind, x.row(i)) * standard_normal(rng);
    y(i) = x(i, 0) * x(i, 1) + x.row(i).head(10).sum() + spec.noise_sd * standard_normal(rng);
  }
  std::vector<ColumnInfo> cols;
  for (auto& name : scenario_columns(spec.p_total)) cols.push_back({name, ColumnType::numeric, {}});
  return Dataset(std::move(cols), std::move(x), std::move(y), "y");
}

ModelPtr true_model(const ScenarioSpec&) {
  return std::make_shared<FunctionModel>(
      scenario_columns(10),
      [](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
        return (x.col(0).array() * x.col(1).array()).matrix() + x.rowwise().sum();
      },
      "true-model");
}

Dataset generate_dependent(Index n, Index p, std::uint64_t seed) {
  if (p < 8) throw DataError("dependent data needs p >= 8");
  Rng rng = make_rng(seed, {0xde9});
  Eigen::MatrixXd x(n, p);
  for (Index i = 0; i < n; ++i) {
    const double z1 = standard_normal(rng), z2 = standard_normal(rng);
    auto e = [&] { return 0.3 * standard_normal(rng); };
    x(i, 0) = z1 + e();
    x(i, 1) = z1 + e();
    x(i, 2) = z2 + e();
    x(i, 3) = z1 * z2 + e();
    x(i, 4) = 2.0 * (z1 > 0.0) + e();
    x(i, 5) = z1 * z1 + e();
    x(i, 6) = std::sin(2.0 * z2) + e();
    x(i, 7) = z1 + z2 + e();
    for (Index c = 8; c < p; ++c) x(i, c) = (c % 2 ? z2 : z1) * 0.5 + std::abs(z1 - z2) + e();
  }
  std::vector<ColumnInfo> cols;
  for (Index c = 1; c <= p; ++c) cols.push_back({"v" + std::to_string(c), ColumnType::numeric, {}});
  return Dataset(std::move(cols), std::move(x));
}

std::string_view to_string(Table2Method method) {
  switch (method) {
    case Table2Method::cs_pfi_cart: return "cs_pfi_cart";
    case Table2Method::impute_rf: return "impute_rf";
    case Table2Method::marginal_pfi: return "marginal_pfi";
  }
  return "?";
}

Table2Method parse_table2_method(std::string_view text) {
  if (text == "cs_pfi_cart" || text == "cs") return Table2Method::cs_pfi_cart;
  if (text == "impute_rf" || text == "impute") return Table2Method::impute_rf;
  if (text == "marginal_pfi" || text == "marginal" || text == "perm") return Table2Method::marginal_pfi;
  throw Error("unknown method '" + std::string(text) + "' (expected cs_pfi_cart, impute_rf, marginal_pfi)");
}

const Table2Cell& Table2Result::cell(ScenarioKind scenario, Index n, Index p_total, Table2Method method) const {
  for (const auto& c : cells)
    if (c.scenario == scenario && c.n == n && c.p_total == p_total && c.method == method) return c;
  throw Error("no such table cell");
}

namespace {

std::string fixed(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right = true) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string Table2Result::to_text() const {
  std::ostringstream out;
  out << pad("scenario", 14, false) << pad("n", 8) << pad("p", 5);
  for (auto m : config.methods) out << pad(std::string(to_string(m)), 15);
  out << '\n';
  for (auto s : config.scenarios)
    for (Index p : config.p_totals)
      for (Index n : config.sizes) {
        out << pad(std::string(to_string(s)), 14, false) << pad(std::to_string(n), 8) << pad(std::to_string(p), 5);
        for (auto m : config.methods) out << pad(fixed(cell(s, n, p, m).mse), 15);
        out << '\n';
      }
  return out.str();
}

std::string Table2Result::to_csv() const {
  std::ostringstream out;
  out << "scenario,n,p_total,method,mse,mean_estimate,mean_ground_truth,replicates\n";
  for (const auto& c : cells)
    out << to_string(c.scenario) << ',' << c.n << ',' << c.p_total << ',' << to_string(c.method) << ','
        << format_double(c.mse) << ',' << format_double(c.mean_estimate) << ',' << format_double(c.mean_ground_truth)
        << ',' << c.estimates.size() << '\n';
  return out.str();
}

Table2Result run_table2(const Table2Config& config) {
  if (config.replicates < 1) throw Error("replicates must be >= 1");
  if (config.setting != 1 && config.setting != 2) throw Error("setting must be 1 or 2");
  if (config.methods.empty()) throw Error("no methods requested");

  struct Unit {
    ScenarioKind scenario;
    Index n, p;
  };
  std::vector<Unit> units;
  for (auto s : config.scenarios)
    for (Index p : config.p_totals)
      for (Index n : config.sizes) units.push_back({s, n, p});

  // setting I: one ground truth per scenario and width, shared by all sizes
  std::map<std::pair<int, Index>, double> truth;
  if (config.setting == 1) {
    std::vector<std::pair<int, Index>> keys;
    for (auto s : config.scenarios)
      for (Index p : config.p_totals) keys.emplace_back(static_cast<int>(s), p);
    std::vector<double> values(keys.size());
    parallel_for(keys.size(), [&](std::size_t k) {
      ScenarioSpec spec{static_cast<ScenarioKind>(keys[k].first), 1, keys[k].second, config.noise_sd, 0};
      const auto model = true_model(spec);
      values[k] = ground_truth_cpfi(spec, *model, Loss::squared_error, config.gt_n_eval, config.gt_M,
                                    derive_seed(config.seed, {0x67, static_cast<std::uint64_t>(keys[k].first),
                                                              static_cast<std::uint64_t>(keys[k].second)}));
    });
    for (std::size_t k = 0; k < keys.size(); ++k) truth[keys[k]] = values[k];
  }

  const auto R = static_cast<std::size_t>(config.replicates);
  const std::size_t n_methods = config.methods.size();
  // [unit * R + r] -> (ground truth, estimate per method)
  std::vector<std::pair<double, std::vector<double>>> results(units.size() * R);
  parallel_for(results.size(), [&](std::size_t idx) {
    const Unit& u = units[idx / R];
    const std::size_t r = idx % R;
    const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(u.scenario),
                                                         static_cast<std::uint64_t>(u.n),
                                                         static_cast<std::uint64_t>(u.p), r});
    const ScenarioSpec spec{u.scenario, u.n, u.p, config.noise_sd, seed};
    const Dataset data = generate(spec);
    const auto parts = split(data, SplitSpec{{2.0 / 3.0, 1.0 / 3.0}, derive_seed(seed, {1})});
    const Dataset& train = parts[0];
    const Dataset& test = parts[1];

    ModelPtr model;
    double gt = 0.0;
    if (config.setting == 1) {
      model = true_model(spec);
      gt = truth.at({static_cast<int>(u.scenario), u.p});
    } else {
      ForestOptions opts;
      opts.n_trees = config.forest_trees;
      model = fit_forest(train, derive_seed(seed, {2}), opts);
      gt = ground_truth_cpfi(spec, *model, Loss::squared_error, config.gt_n_eval, config.gt_M, derive_seed(seed, {3}));
    }

    const std::uint64_t pfi_seed = derive_seed(seed, {4});
    std::optional<ImportanceResult> cs;
    std::vector<double> est(n_methods);
    for (std::size_t k = 0; k < n_methods; ++k) {
      switch (config.methods[k]) {
        case Table2Method::cs_pfi_cart:
        case Table2Method::marginal_pfi:
          if (!cs) {
            const auto part =
                fit_partition(train.drop_target(), 0, PartitionParams{config.depth, config.min_node_size});
            cs = cs_pfi(*model, part, test, 0, Loss::squared_error, config.M, pfi_seed);
          }
          est[k] = config.methods[k] == Table2Method::cs_pfi_cart ? cs->aggregate : cs->marginal.value;
          break;
        case Table2Method::impute_rf: {
          const auto sampler = fit_impute_residual(train.drop_target(), 0, derive_seed(seed, {5}), config.impute_trees);
          est[k] = sampler_pfi(*model, *sampler, test, 0, Loss::squared_error, config.M, pfi_seed).value;
          break;
        }
      }
    }
    results[idx] = {gt, std::move(est)};
  });

  Table2Result out;
  out.config = config;
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    for (std::size_t k = 0; k < n_methods; ++k) {
      Table2Cell c;
      c.scenario = units[ui].scenario;
      c.n = units[ui].n;
      c.p_total = units[ui].p;
      c.method = config.methods[k];
      double sq = 0.0, est = 0.0, gt = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const auto& [g, e] = results[ui * R + r];
        c.estimates.push_back(e[k]);
        c.ground_truth.push_back(g);
        sq += (e[k] - g) * (e[k] - g);
        est += e[k];
        gt += g;
      }
      c.mse = sq / static_cast<double>(R);
      c.mean_estimate = est / static_cast<double>(R);
      c.mean_ground_truth = gt / static_cast<double>(R);
      out.cells.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace condsub
