#pragma once

#include "condsub/data.hpp"
#include "condsub/effects.hpp"
#include "condsub/models.hpp"
#include "condsub/parallel.hpp"
#include "condsub/samplers.hpp"
#include "condsub/subgroups.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace condsub {

struct KernelConfig {
  /// RBF bandwidth; unset means the median heuristic on the pooled data.
  std::optional<double> sigma;
};

inline double rbf(double squared_distance, double sigma) {
  return std::exp(-squared_distance / (2.0 * sigma * sigma));
}

/// Biased (V-statistic) squared MMD between the rows of x and z with an RBF
/// kernel, diagonal terms included. Rows are processed in blocks whose
/// partial sums are reduced in block order, so the result does not depend on
/// the worker count.
template <typename DerivedX, typename DerivedZ>
double mmd_biased(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedZ>& z, double sigma) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = x.rows(), l = z.rows(), d = x.cols();
  if (z.cols() != d) throw std::invalid_argument("mmd: column counts differ");
  if (n == 0 || l == 0) throw std::invalid_argument("mmd: empty sample");

  constexpr Index block = 64;
  auto kernel_sum = [&](const auto& a, const auto& b) {
    const Index na = a.rows(), nb = b.rows();
    const Index n_blocks = (na + block - 1) / block;
    std::vector<Scalar> partial(static_cast<std::size_t>(n_blocks), Scalar(0));
    parallel_for(partial.size(), [&](std::size_t blk) {
      const Index r0 = static_cast<Index>(blk) * block, r1 = std::min(na, r0 + block);
      Scalar s(0);
      for (Index i = r0; i < r1; ++i) {
        Scalar row(0);
        for (Index k = 0; k < nb; ++k) {
          Scalar sq(0);
          for (Index c = 0; c < d; ++c) {
            const Scalar diff = a(i, c) - b(k, c);
            sq += diff * diff;
          }
          row += rbf(sq, sigma);
        }
        s += row;
      }
      partial[blk] = s;
    });
    Scalar total(0);
    for (Scalar p : partial) total += p;
    return total;
  };

  const Scalar kxx = kernel_sum(x, x) / (Scalar(n) * Scalar(n));
  const Scalar kxz = kernel_sum(x, z) / (Scalar(n) * Scalar(l));
  const Scalar kzz = kernel_sum(z, z) / (Scalar(l) * Scalar(l));
  return kxx - 2.0 * kxz + kzz;
}

/// Exact median of the pairwise L2 distances between distinct rows.
double median_heuristic(const Eigen::Ref<const Eigen::MatrixXd>& x);

struct MmdResult {
  double mmd = 0.0;
  double sigma = 0.0;
};

/// MMD between the numeric columns of two datasets with matching columns.
/// Both are standardized with pooled statistics first; the bandwidth comes
/// from `cfg` or the median heuristic on the pooled standardized rows.
/// Throws DataError for zero bandwidth.
MmdResult mmd(const Dataset& a, const Dataset& b, const KernelConfig& cfg = {});

struct FidelityResult {
  std::string dataset;
  std::string feature;
  Index feature_index = 0;
  std::string sampler;
  Index rep = 0;
  double mmd = 0.0;
  /// -log(mmd), with mmd clamped to 1e-15 (flagged) when not positive.
  double data_fidelity = 0.0;
  double sigma = 0.0;
  bool clamped = false;
};

double data_fidelity(double mmd, bool* clamped = nullptr);

struct FidelityConfig {
  std::string dataset = "data";
  std::vector<SamplerSpec> samplers;
  Index n_features = 10;
  Index n_reps = 10;
  Index max_rows = 10000;
  Index min_features = 8;
  std::uint64_t seed = 0;
};

/// Data fidelity experiment: drop the target and categorical columns, visit
/// up to n_features features in random order and, per repetition, subsample
/// min(max_rows, n) rows, split 40/30/30 into train/test/reference, train
/// each sampler on train, intervene on test and score -log MMD(reference,
/// intervened test). The ALE shift contributes both shifted copies of the
/// test set. Results are ordered by feature, repetition, sampler.
std::vector<FidelityResult> data_fidelity_experiment(const Dataset& d, const FidelityConfig& config);

struct FidelitySummary {
  std::string sampler;
  double mean_fidelity = 0.0;
  double sd_fidelity = 0.0;
  /// Average rank within each (feature, repetition); 1 is the highest fidelity.
  double mean_rank = 0.0;
  Index count = 0;
};

std::vector<FidelitySummary> summarize_fidelity(const std::vector<FidelityResult>& results);

/// Mean squared difference between model predictions and the curve read as
/// a one-feature function of x_j (linear interpolation, clamped ends).
double model_fidelity(const PredictiveModel& model, const EffectCurve& curve, const Dataset& test, Index j);

/// Per-group variant: each row is scored against its own group's curve.
double model_fidelity(const PredictiveModel& model, const std::vector<EffectCurve>& group_curves,
                      const SubgroupPartition& part, const Dataset& test, Index j);

}  // namespace condsub
