#include "condsub/importance.hpp"

#include "condsub/error.hpp"
#include "condsub/parallel.hpp"
#include "condsub/stats.hpp"

#include <cmath>
#include <functional>

namespace condsub {

namespace {

using Replacement = std::function<Eigen::VectorXd(Index m)>;

struct GroupedLosses {
  std::vector<Index> count;
  std::vector<double> original;                // mean original loss per group
  std::vector<std::vector<double>> perturbed;  // [group][m] mean perturbed loss
};

std::vector<double> group_means(const Eigen::VectorXd& per_row, const std::vector<int>& groups, int n_groups,
                                const std::vector<Index>& count) {
  std::vector<double> sum(static_cast<std::size_t>(n_groups), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i)
    sum[static_cast<std::size_t>(groups[i])] += per_row(static_cast<Index>(i));
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : 0.0;
  return sum;
}

Eigen::VectorXd row_losses(Loss loss, const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() != yhat.size()) throw ModelError("model returned wrong number of predictions");
  Eigen::VectorXd out(y.size());
  for (Index i = 0; i < y.size(); ++i) out(i) = pointwise_loss(loss, y(i), yhat(i));
  return out;
}

void check_inputs(const Dataset& test, Index j, Loss loss, Index M) {
  if (M < 1) throw Error("M must be >= 1");
  if (j < 0 || j >= test.n_features()) throw DataError("feature index out of range");
  if (test.n_rows() < 1) throw DataError("importance needs at least one test row");
  const auto& y = test.target();
  if (loss == Loss::misclassification) {
    for (Index i = 0; i < y.size(); ++i)
      if (y(i) != std::floor(y(i))) throw DataError("misclassification loss needs an integer class target");
  }
}

GroupedLosses grouped_losses(const PredictiveModel& model, const Dataset& test, Index j, Loss loss, Index M,
                             const Replacement& replacement, const std::vector<int>& groups, int n_groups) {
  GroupedLosses out;
  out.count.assign(static_cast<std::size_t>(n_groups), 0);
  for (int g : groups) ++out.count[static_cast<std::size_t>(g)];
  const Eigen::VectorXd& y = test.target();
  out.original = group_means(row_losses(loss, y, model.predict(test)), groups, n_groups, out.count);

  std::vector<std::vector<double>> per_m(static_cast<std::size_t>(M));
  parallel_for(per_m.size(), [&](std::size_t m) {
    const Dataset perturbed = test.with_column(j, replacement(static_cast<Index>(m)));
    per_m[m] = group_means(row_losses(loss, y, model.predict(perturbed)), groups, n_groups, out.count);
  });
  out.perturbed.assign(static_cast<std::size_t>(n_groups), std::vector<double>(static_cast<std::size_t>(M)));
  for (std::size_t m = 0; m < per_m.size(); ++m)
    for (std::size_t k = 0; k < per_m[m].size(); ++k) out.perturbed[k][m] = per_m[m][k];
  return out;
}

PfiResult summarize(double original, const std::vector<double>& perturbed) {
  PfiResult r;
  r.original_loss = original;
  double sum = 0.0;
  for (double l : perturbed) {
    r.per_repetition.push_back(l - original);
    sum += r.per_repetition.back();
  }
  r.value = sum / static_cast<double>(perturbed.size());
  if (perturbed.size() > 1) r.standard_error = stats::standard_error(r.per_repetition);
  return r;
}

}  // namespace

PfiResult pfi(const PredictiveModel& model, const Dataset& test, Index j, Loss loss, Index M, std::uint64_t seed) {
  check_inputs(test, j, loss, M);
  const std::vector<int> groups(static_cast<std::size_t>(test.n_rows()), 0);
  const auto losses = grouped_losses(
      model, test, j, loss, M, [&](Index m) { return permute_within_groups(test.col(j), groups, 1, seed, j, m); },
      groups, 1);
  return summarize(losses.original[0], losses.perturbed[0]);
}

PfiResult sampler_pfi(const PredictiveModel& model, const Sampler& sampler, const Dataset& test, Index j, Loss loss,
                      Index M, std::uint64_t seed) {
  check_inputs(test, j, loss, M);
  const std::vector<int> groups(static_cast<std::size_t>(test.n_rows()), 0);
  const auto losses = grouped_losses(
      model, test, j, loss, M, [&](Index m) { return sampler.sample(test, j, seed, m); }, groups, 1);
  return summarize(losses.original[0], losses.perturbed[0]);
}

ImportanceResult cs_pfi(const PredictiveModel& model, const SubgroupPartition& part, const Dataset& test, Index j,
                        Loss loss, Index M, std::uint64_t seed) {
  check_inputs(test, j, loss, M);
  if (part.feature() != test.column(j).name)
    throw DataError("partition was fitted for '" + part.feature() + "', not '" + test.column(j).name + "'");
  const std::vector<int> groups = part.assign(test);
  const int K = part.n_groups();
  const auto losses = grouped_losses(
      model, test, j, loss, M, [&](Index m) { return permute_within_groups(test.col(j), groups, K, seed, j, m); },
      groups, K);

  ImportanceResult r;
  r.feature = j;
  r.name = test.column(j).name;
  r.M = M;
  r.seed = seed;
  r.marginal = pfi(model, test, j, loss, M, seed);
  r.aggregate_per_repetition.assign(static_cast<std::size_t>(M), 0.0);
  const auto n = static_cast<double>(test.n_rows());
  for (int k = 0; k < K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    GroupImportance g;
    g.group_id = k;
    g.rule = part.groups()[uk].rule;
    g.n_k = losses.count[uk];
    if (g.n_k > 0) {
      const PfiResult s = summarize(losses.original[uk], losses.perturbed[uk]);
      g.cs_pfi = s.value;
      g.original_loss = s.original_loss;
      g.per_repetition = s.per_repetition;
      const double w = static_cast<double>(g.n_k) / n;
      r.aggregate += w * s.value;
      for (std::size_t m = 0; m < s.per_repetition.size(); ++m) r.aggregate_per_repetition[m] += w * s.per_repetition[m];
    }
    r.groups.push_back(std::move(g));
  }
  return r;
}

nlohmann::json ImportanceResult::to_json() const {
  nlohmann::json gs = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json rec{{"group_id", g.group_id}, {"rule", g.rule}, {"n_k", g.n_k}};
    rec["cs_pfi"] = g.cs_pfi ? nlohmann::json(*g.cs_pfi) : nlohmann::json(nullptr);
    gs.push_back(std::move(rec));
  }
  return {{"feature", name},
          {"feature_index", feature},
          {"marginal_pfi", marginal.value},
          {"marginal_pfi_se", marginal.standard_error},
          {"groups", std::move(gs)},
          {"aggregate_cs_pfi", aggregate},
          {"M", M},
          {"seed", seed}};
}

double ground_truth_cpfi(const ScenarioSpec& scenario, const PredictiveModel& model, Loss loss, Index n_eval, Index M,
                         std::uint64_t seed) {
  if (M < 1) throw Error("M must be >= 1");
  ScenarioSpec spec = scenario;
  spec.n = n_eval;
  spec.seed = derive_seed(seed, {0x67});
  const Dataset data = generate(spec);
  const Eigen::VectorXd& y = data.target();
  const double original = mean_loss(loss, y, model.predict(data));

  std::vector<double> perturbed(static_cast<std::size_t>(M));
  parallel_for(perturbed.size(), [&](std::size_t m) {
    Rng rng = make_rng(seed, {0x68, static_cast<std::uint64_t>(m)});
    const Dataset d = data.with_column(0, sample_x1(scenario.kind, data.values(), rng));
    perturbed[m] = mean_loss(loss, y, model.predict(d));
  });
  double sum = 0.0;
  for (double l : perturbed) sum += l;
  return sum / static_cast<double>(M) - original;
}

std::vector<DepthSweepEntry> depth_sweep(const PredictiveModel& model, const Dataset& train, const Dataset& test,
                                         Index j, Loss loss, const std::vector<int>& depths, Index M,
                                         std::uint64_t seed, Index min_node_size) {
  if (depths.empty()) throw Error("depth sweep needs at least one depth");
  std::vector<DepthSweepEntry> out;
  for (int d : depths) {
    const SubgroupPartition part = d == 0 ? single_group_partition(train.drop_target(), j)
                                          : fit_partition(train.drop_target(), j, PartitionParams{d, min_node_size});
    const auto r = cs_pfi(model, part, test, j, loss, M, seed);
    out.push_back({d, part.n_groups(), r.aggregate, r.marginal.value});
  }
  return out;
}

}  // namespace condsub
