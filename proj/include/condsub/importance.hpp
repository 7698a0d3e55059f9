#pragma once

#include "condsub/data.hpp"
#include "condsub/models.hpp"
#include "condsub/samplers.hpp"
#include "condsub/simulation.hpp"
#include "condsub/subgroups.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace condsub {

struct PfiResult {
  /// Mean perturbed loss over rows and repetitions minus the original loss.
  double value = 0.0;
  double original_loss = 0.0;
  /// Perturbed loss of repetition m minus the original loss.
  std::vector<double> per_repetition;
  /// Spread of the repetitions, sd / sqrt(M); 0 when M = 1.
  double standard_error = 0.0;
};

/// Marginal permutation feature importance. Repetition m permutes with the
/// same stream as group 0 of a cs-permutation, see permute_within_groups.
PfiResult pfi(const PredictiveModel& model, const Dataset& test, Index j, Loss loss, Index M, std::uint64_t seed);

/// Importance under an arbitrary trained sampler.
PfiResult sampler_pfi(const PredictiveModel& model, const Sampler& sampler, const Dataset& test, Index j, Loss loss,
                      Index M, std::uint64_t seed);

struct GroupImportance {
  int group_id = 0;
  std::string rule;
  /// Test rows in the group.
  Index n_k = 0;
  /// Unset for groups without test rows.
  std::optional<double> cs_pfi;
  double original_loss = 0.0;
  std::vector<double> per_repetition;
};

struct ImportanceResult {
  Index feature = 0;
  std::string name;
  PfiResult marginal;
  std::vector<GroupImportance> groups;
  /// Sum over groups in ascending id of (n_k / n) * cs_pfi_k; empty groups weigh 0.
  double aggregate = 0.0;
  std::vector<double> aggregate_per_repetition;
  Index M = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Conditional-subgroup PFI: within-group permutations, per-group
/// importance and the size-weighted aggregate, plus the marginal PFI on the
/// same streams.
ImportanceResult cs_pfi(const PredictiveModel& model, const SubgroupPartition& part, const Dataset& test, Index j,
                        Loss loss, Index M, std::uint64_t seed);

/// Conditional PFI of x1 with replacements drawn from the scenario's true
/// conditional distribution, on n_eval freshly generated rows.
double ground_truth_cpfi(const ScenarioSpec& scenario, const PredictiveModel& model, Loss loss, Index n_eval, Index M,
                         std::uint64_t seed);

struct DepthSweepEntry {
  int depth = 0;
  int n_groups = 1;
  double aggregate = 0.0;
  double marginal = 0.0;
};

/// One cs-PFI run per depth with a freshly fitted partition; depth 0 is the
/// single-group partition and reproduces the marginal PFI.
std::vector<DepthSweepEntry> depth_sweep(const PredictiveModel& model, const Dataset& train, const Dataset& test,
                                         Index j, Loss loss, const std::vector<int>& depths, Index M,
                                         std::uint64_t seed, Index min_node_size = 30);

}  // namespace condsub
