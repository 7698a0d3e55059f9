#pragma once

#include "condsub/data.hpp"
#include "condsub/models.hpp"
#include "condsub/subgroups.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condsub {

/// Evaluation points for a numeric feature: explicit `points` if given,
/// otherwise `size` equally spaced points from the observed min to max.
/// Categorical features always use their observed levels.
struct GridSpec {
  Index size = 20;
  std::vector<double> points;
};

enum class CurveKind { pdp, cs_pdp, ale };

std::string_view to_string(CurveKind kind);

struct CurveGroup {
  int group_id = 0;
  std::string rule;
  Index n_k = 0;
};

/// Quartile box of a group's x_j sample with whiskers at
/// q25 - 1.58·IQR/√n and q75 + 1.58·IQR/√n, capped to the observed range.
struct BoxplotSummary {
  double q25 = 0.0;
  double q75 = 0.0;
  double iqr = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  double min = 0.0;
  double max = 0.0;
  Index n = 0;
  /// Grid points outside the whiskers.
  std::vector<double> outliers;
};

struct EffectCurve {
  CurveKind kind = CurveKind::pdp;
  Index feature = 0;
  std::string name;
  /// Ascending; level codes for categorical features.
  std::vector<double> grid;
  std::vector<double> values;
  /// Level names matching `grid` for categorical features.
  std::vector<std::string> labels;
  std::optional<CurveGroup> group;
  double support_min = 0.0;
  double support_max = 0.0;
  std::optional<BoxplotSummary> box;

  bool categorical() const { return !labels.empty(); }
  /// Linear interpolation on the grid, constant beyond the end points.
  /// Categorical curves return the value at the matching level code.
  double evaluate(double x) const;
};

/// Partial dependence: mean prediction over all test rows with x_j set to
/// each grid value.
EffectCurve pdp(const PredictiveModel& model, const Dataset& test, Index j, const GridSpec& grid = {});

struct CsPdpResult {
  std::vector<EffectCurve> curves;
  /// Groups without test rows; they get no curve.
  std::vector<int> empty_groups;
};

/// One partial dependence curve per subgroup, averaged over that group's
/// test rows. Numeric grids are the global grid clipped to the group's x_j
/// range plus its end points; every curve carries a boxplot summary. The
/// partition may have been fitted for another feature but must not split on j.
CsPdpResult cs_pdp(const PredictiveModel& model, const SubgroupPartition& part, const Dataset& test, Index j,
                   const GridSpec& grid = {});

/// Accumulated local effects on training quantile intervals, centred to
/// mean zero over the test rows and shifted by the mean prediction so it
/// sits on the PDP scale. Grid = interval edges.
EffectCurve ale(const PredictiveModel& model, const Dataset& train, const Dataset& test, Index j,
                Index n_intervals = 20);

BoxplotSummary boxplot_summary(std::span<const double> x_sample, std::span<const double> grid);
/// Copy of `curve` annotated with the summary of `x_sample`.
EffectCurve boxplot_summary(const EffectCurve& curve, std::span<const double> x_sample);

/// Columns: grid,value,group_id,curve (categorical grid as level names).
std::string curves_to_csv(const std::vector<EffectCurve>& curves);

/// Minimal line plot: one polyline per curve, the IQR span drawn bold,
/// outlier grid points as circles and one legend line per curve.
std::string curves_to_svg(const std::vector<EffectCurve>& curves, const std::string& title);

}  // namespace condsub
