#include "condsub/samplers.hpp"

#include "condsub/error.hpp"
#include "condsub/rng.hpp"
#include "condsub/stats.hpp"

#include <algorithm>
#include <charconv>

namespace condsub {

namespace {

constexpr std::uint64_t kImputeStream = 0x1a9e7e5;

}  // namespace

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::none: return "none";
    case SamplerKind::marginal: return "perm";
    case SamplerKind::cs_permutation: return "cs";
    case SamplerKind::impute_residual: return "impute";
    case SamplerKind::ale_shift: return "ale";
  }
  return "?";
}

SamplerSpec SamplerSpec::parse(std::string_view text) {
  SamplerSpec s;
  if (text == "none") {
    s.kind = SamplerKind::none;
  } else if (text == "perm" || text == "marginal") {
    s.kind = SamplerKind::marginal;
  } else if (text == "impute") {
    s.kind = SamplerKind::impute_residual;
  } else if (text == "ale") {
    s.kind = SamplerKind::ale_shift;
  } else if (text.starts_with("cs")) {
    s.kind = SamplerKind::cs_permutation;
    const auto digits = text.substr(2);
    if (!digits.empty()) {
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), s.depth);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || s.depth < 0)
        throw Error("bad sampler '" + std::string(text) + "': expected cs<depth>");
    }
  } else {
    throw Error("unknown sampler '" + std::string(text) + "' (expected none, perm, cs<depth>, impute, ale)");
  }
  return s;
}

std::string SamplerSpec::label() const {
  if (kind == SamplerKind::cs_permutation) return "cs" + std::to_string(depth);
  return std::string(to_string(kind));
}

Eigen::VectorXd permute_within_groups(const Eigen::Ref<const Eigen::VectorXd>& x, const std::vector<int>& groups,
                                      int n_groups, std::uint64_t seed, Index j, Index m) {
  if (static_cast<Index>(groups.size()) != x.size()) throw DataError("group vector does not match column length");
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_groups));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] < 0 || groups[i] >= n_groups) throw DataError("group id out of range");
    members[static_cast<std::size_t>(groups[i])].push_back(static_cast<Index>(i));
  }
  Eigen::VectorXd out = x;
  std::vector<double> values;
  for (int k = 0; k < n_groups; ++k) {
    const auto& rows = members[static_cast<std::size_t>(k)];
    if (rows.size() < 2) continue;
    values.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) values[r] = x(rows[r]);
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(k)});
    shuffle(values.begin(), values.end(), rng);
    for (std::size_t r = 0; r < rows.size(); ++r) out(rows[r]) = values[r];
  }
  return out;
}

Eigen::VectorXd marginal_permutation(const Dataset& test, Index j, std::uint64_t seed, Index m) {
  return permute_within_groups(test.col(j), std::vector<int>(static_cast<std::size_t>(test.n_rows()), 0), 1, seed, j, m);
}

Eigen::VectorXd cs_permutation(const SubgroupPartition& part, const Dataset& test, Index j, std::uint64_t seed,
                               Index m) {
  return permute_within_groups(test.col(j), part.assign(test), part.n_groups(), seed, j, m);
}

void Sampler::check_feature(const Dataset& test, Index j) const {
  if (j < 0 || j >= test.n_features()) throw DataError("feature index out of range");
  if (test.column(j).name != feature_)
    throw DataError("sampler trained for '" + feature_ + "' applied to column '" + test.column(j).name + "'");
}

Dataset Sampler::perturb(const Dataset& test, Index j, std::uint64_t seed, Index m) const {
  return test.with_column(j, sample(test, j, seed, m));
}

Eigen::VectorXd NoneSampler::sample(const Dataset& test, Index j, std::uint64_t, Index) const {
  check_feature(test, j);
  return test.col(j);
}

Eigen::VectorXd MarginalSampler::sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const {
  check_feature(test, j);
  return marginal_permutation(test, j, seed, m);
}

CsPermutationSampler::CsPermutationSampler(SubgroupPartition part)
    : Sampler(part.feature()), part_(std::move(part)) {}

Eigen::VectorXd CsPermutationSampler::sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const {
  check_feature(test, j);
  return cs_permutation(part_, test, j, seed, m);
}

ImputeResidualSampler::ImputeResidualSampler(std::string feature, std::shared_ptr<const ForestModel> forest,
                                             Eigen::VectorXd residuals)
    : Sampler(std::move(feature)), forest_(std::move(forest)), residuals_(std::move(residuals)) {
  if (residuals_.size() == 0) throw ModelError("impute sampler needs a residual pool");
}

Eigen::VectorXd ImputeResidualSampler::sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const {
  check_feature(test, j);
  Eigen::VectorXd out = forest_->predict(test);
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(m), kImputeStream});
  const auto pool = static_cast<std::size_t>(residuals_.size());
  for (Index i = 0; i < out.size(); ++i) out(i) += residuals_(static_cast<Index>(uniform_index(rng, pool)));
  return out;
}

std::shared_ptr<const ImputeResidualSampler> fit_impute_residual(const Dataset& train, Index j, std::uint64_t seed,
                                                                 Index n_trees) {
  if (!train.column(j).is_numeric()) throw DataError("impute sampler needs a numeric feature");
  const Dataset others = train.drop_column(j).with_target(train.col(j), train.column(j).name);
  if (others.n_features() < 1) throw DataError("impute sampler needs at least one other feature");
  ForestOptions opts;
  opts.n_trees = n_trees;
  auto forest = fit_forest(others, derive_seed(seed, {static_cast<std::uint64_t>(j), kImputeStream}), opts);
  Eigen::VectorXd residuals = others.target() - forest->oob_predict(others);
  return std::make_shared<ImputeResidualSampler>(train.column(j).name, std::move(forest), std::move(residuals));
}

SamplerPtr train_sampler(const SamplerSpec& spec, const Dataset& train, Index j, std::uint64_t seed) {
  const std::string& name = train.column(j).name;
  switch (spec.kind) {
    case SamplerKind::none: return std::make_shared<NoneSampler>(name);
    case SamplerKind::marginal: return std::make_shared<MarginalSampler>(name);
    case SamplerKind::cs_permutation:
      return std::make_shared<CsPermutationSampler>(
          fit_partition(train.drop_target(), j, PartitionParams{spec.depth, spec.min_node_size}));
    case SamplerKind::impute_residual: return fit_impute_residual(train.drop_target(), j, seed, spec.impute_trees);
    case SamplerKind::ale_shift: break;
  }
  throw Error("the ALE shift is not a column sampler");
}

AleIntervals AleIntervals::fit(const Eigen::Ref<const Eigen::VectorXd>& x, Index n_intervals) {
  if (n_intervals < 1) throw DataError("ALE needs at least one interval");
  if (x.size() == 0) throw DataError("ALE needs training values");
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  AleIntervals out;
  for (Index k = 0; k <= n_intervals; ++k) {
    const double q = k == n_intervals ? sorted.back()
                                      : stats::quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(n_intervals));
    if (out.edges.empty() || q > out.edges.back()) out.edges.push_back(q);
  }
  return out;
}

Index AleIntervals::interval_of(double x) const {
  if (edges.size() < 2) return 0;
  const auto it = std::lower_bound(edges.begin() + 1, edges.end(), x);
  const auto i = static_cast<Index>(it - (edges.begin() + 1));
  return std::min(i, n_intervals() - 1);
}

AleShift ale_shift(const AleIntervals& intervals, const Dataset& test, Index j) {
  if (!test.column(j).is_numeric()) throw DataError("ALE needs a numeric feature");
  Eigen::VectorXd lo(test.n_rows()), hi(test.n_rows());
  std::vector<Index> which(static_cast<std::size_t>(test.n_rows()));
  for (Index i = 0; i < test.n_rows(); ++i) {
    const Index k = intervals.interval_of(test(i, j));
    which[static_cast<std::size_t>(i)] = k;
    lo(i) = intervals.lower(k);
    hi(i) = intervals.upper(k);
  }
  return {test.with_column(j, lo), test.with_column(j, hi), std::move(which), intervals};
}

AleShift ale_shift(const Dataset& train, const Dataset& test, Index j, Index n_intervals) {
  return ale_shift(AleIntervals::fit(train.col(j), n_intervals), test, j);
}

}  // namespace condsub
