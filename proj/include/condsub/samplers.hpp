#pragma once

#include "condsub/data.hpp"
#include "condsub/models.hpp"
#include "condsub/subgroups.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace condsub {

enum class SamplerKind { none, marginal, cs_permutation, impute_residual, ale_shift };

std::string_view to_string(SamplerKind kind);

/// Sampler as named on the command line: "none", "perm", "cs<depth>"
/// (bare "cs" means depth 30), "impute", "ale".
struct SamplerSpec {
  SamplerKind kind = SamplerKind::marginal;
  int depth = 30;
  Index min_node_size = 30;
  Index impute_trees = 100;
  Index ale_intervals = 20;

  static SamplerSpec parse(std::string_view text);
  std::string label() const;
};

/// Permutes `x` independently within each group. Group k is shuffled with
/// the stream derive_seed(seed, {j, m, k}) over its rows in ascending row
/// order, so a single group reproduces the marginal permutation exactly.
Eigen::VectorXd permute_within_groups(const Eigen::Ref<const Eigen::VectorXd>& x, const std::vector<int>& groups,
                                      int n_groups, std::uint64_t seed, Index j, Index m);

Eigen::VectorXd marginal_permutation(const Dataset& test, Index j, std::uint64_t seed, Index m = 0);
Eigen::VectorXd cs_permutation(const SubgroupPartition& part, const Dataset& test, Index j, std::uint64_t seed,
                               Index m = 0);

/// Trained intervention producing a replacement for column j of a test set.
/// Column j is matched by name against the feature the sampler was trained for.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual SamplerKind kind() const = 0;
  virtual Eigen::VectorXd sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const = 0;

  /// Copy of `test` with column j replaced by sample().
  Dataset perturb(const Dataset& test, Index j, std::uint64_t seed, Index m) const;

 protected:
  explicit Sampler(std::string feature) : feature_(std::move(feature)) {}
  void check_feature(const Dataset& test, Index j) const;

  std::string feature_;
};

using SamplerPtr = std::shared_ptr<const Sampler>;

class NoneSampler final : public Sampler {
 public:
  explicit NoneSampler(std::string feature) : Sampler(std::move(feature)) {}
  SamplerKind kind() const override { return SamplerKind::none; }
  Eigen::VectorXd sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const override;
};

class MarginalSampler final : public Sampler {
 public:
  explicit MarginalSampler(std::string feature) : Sampler(std::move(feature)) {}
  SamplerKind kind() const override { return SamplerKind::marginal; }
  Eigen::VectorXd sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const override;
};

class CsPermutationSampler final : public Sampler {
 public:
  explicit CsPermutationSampler(SubgroupPartition part);
  SamplerKind kind() const override { return SamplerKind::cs_permutation; }
  Eigen::VectorXd sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const override;
  const SubgroupPartition& partition() const { return part_; }

 private:
  SubgroupPartition part_;
};

/// x̃_j = forest(x_{-j}) + r with r drawn uniformly from the forest's
/// out-of-bag residuals on its training rows.
class ImputeResidualSampler final : public Sampler {
 public:
  ImputeResidualSampler(std::string feature, std::shared_ptr<const ForestModel> forest, Eigen::VectorXd residuals);
  SamplerKind kind() const override { return SamplerKind::impute_residual; }
  Eigen::VectorXd sample(const Dataset& test, Index j, std::uint64_t seed, Index m) const override;
  const Eigen::VectorXd& residuals() const { return residuals_; }

 private:
  std::shared_ptr<const ForestModel> forest_;
  Eigen::VectorXd residuals_;
};

std::shared_ptr<const ImputeResidualSampler> fit_impute_residual(const Dataset& train, Index j, std::uint64_t seed,
                                                                 Index n_trees = 100);

/// Trains a column sampler of the given spec on `train` for feature j.
/// ale_shift is not a column sampler and is rejected here.
SamplerPtr train_sampler(const SamplerSpec& spec, const Dataset& train, Index j, std::uint64_t seed);

/// Quantile intervals of x_j on training data. Edges are type-7 quantiles
/// at k/K, k = 0..K, with duplicates merged; interval i is (e_i, e_{i+1}],
/// the first one closed on the left.
struct AleIntervals {
  std::vector<double> edges;

  static AleIntervals fit(const Eigen::Ref<const Eigen::VectorXd>& x, Index n_intervals);
  Index n_intervals() const { return std::max<Index>(1, static_cast<Index>(edges.size()) - 1); }
  double lower(Index i) const { return edges[static_cast<std::size_t>(i)]; }
  double upper(Index i) const { return edges[std::min(static_cast<std::size_t>(i) + 1, edges.size() - 1)]; }
  /// Values outside the training range fall into the first / last interval.
  Index interval_of(double x) const;
};

struct AleShift {
  Dataset lower;
  Dataset upper;
  std::vector<Index> interval;
  AleIntervals intervals;
};

/// Every test row duplicated with x_j moved to its interval's lower and upper edge.
AleShift ale_shift(const AleIntervals& intervals, const Dataset& test, Index j);
AleShift ale_shift(const Dataset& train, const Dataset& test, Index j, Index n_intervals = 20);

}  // namespace condsub
