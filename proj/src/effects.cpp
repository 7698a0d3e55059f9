#include "condsub/effects.hpp"

#include "condsub/error.hpp"
#include "condsub/parallel.hpp"
#include "condsub/samplers.hpp"
#include "condsub/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace condsub {

std::string_view to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::pdp: return "pdp";
    case CurveKind::cs_pdp: return "cs-pdp";
    case CurveKind::ale: return "ale";
  }
  return "?";
}

double EffectCurve::evaluate(double x) const {
  if (grid.empty()) throw Error("empty effect curve");
  if (categorical()) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid[i] == x) return values[i];
    throw DataError("level code not on the curve of '" + name + "'");
  }
  if (x <= grid.front()) return values.front();
  if (x >= grid.back()) return values.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - grid[lo]) / (grid[hi] - grid[lo]);
  return values[lo] + t * (values[hi] - values[lo]);
}

namespace {

std::vector<double> numeric_grid(const Eigen::Ref<const Eigen::VectorXd>& x, const GridSpec& spec) {
  if (!spec.points.empty()) {
    std::vector<double> g = spec.points;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }
  if (spec.size < 1) throw Error("grid size must be >= 1");
  const double lo = x.minCoeff(), hi = x.maxCoeff();
  if (lo == hi) return {lo};
  if (spec.size == 1) return {lo + 0.5 * (hi - lo)};
  std::vector<double> g(static_cast<std::size_t>(spec.size));
  for (Index i = 0; i < spec.size; ++i)
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(spec.size - 1);
  g.back() = hi;
  return g;
}

std::vector<double> observed_levels(const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::vector<double> g(x.data(), x.data() + x.size());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<double> partial_dependence(const PredictiveModel& model, const Dataset& rows, Index j,
                                       const std::vector<double>& grid) {
  std::vector<double> values(grid.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    const Dataset d = rows.with_column(j, Eigen::VectorXd::Constant(rows.n_rows(), grid[g]));
    const Eigen::VectorXd p = model.predict(d);
    double sum = 0.0;
    for (Index i = 0; i < p.size(); ++i) sum += p(i);
    values[g] = sum / static_cast<double>(p.size());
  });
  return values;
}

EffectCurve make_curve(CurveKind kind, const Dataset& data, Index j, std::vector<double> grid,
                       std::vector<double> values) {
  EffectCurve c;
  c.kind = kind;
  c.feature = j;
  c.name = data.column(j).name;
  if (data.column(j).is_categorical())
    for (double g : grid) c.labels.push_back(data.level_name(j, g));
  c.grid = std::move(grid);
  c.values = std::move(values);
  c.support_min = data.col(j).minCoeff();
  c.support_max = data.col(j).maxCoeff();
  return c;
}

}  // namespace

EffectCurve pdp(const PredictiveModel& model, const Dataset& test, Index j, const GridSpec& spec) {
  if (test.n_rows() < 1) throw DataError("PDP needs at least one test row");
  if (j < 0 || j >= test.n_features()) throw DataError("feature index out of range");
  auto grid = test.column(j).is_categorical() ? observed_levels(test.col(j)) : numeric_grid(test.col(j), spec);
  auto values = partial_dependence(model, test, j, grid);
  return make_curve(CurveKind::pdp, test, j, std::move(grid), std::move(values));
}

CsPdpResult cs_pdp(const PredictiveModel& model, const SubgroupPartition& part, const Dataset& test, Index j,
                   const GridSpec& spec) {
  if (test.n_rows() < 1) throw DataError("cs-PDP needs at least one test row");
  if (j < 0 || j >= test.n_features()) throw DataError("feature index out of range");
  const std::string& name = test.column(j).name;
  if (part.splits_on(name)) throw DataError("partition splits on '" + name + "' itself");
  const bool categorical = test.column(j).is_categorical();
  const std::vector<double> global = categorical ? std::vector<double>{} : numeric_grid(test.col(j), spec);

  const std::vector<int> groups = part.assign(test);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(part.n_groups()));
  for (std::size_t i = 0; i < groups.size(); ++i) members[static_cast<std::size_t>(groups[i])].push_back(static_cast<Index>(i));

  CsPdpResult out;
  for (int k = 0; k < part.n_groups(); ++k) {
    const auto& rows = members[static_cast<std::size_t>(k)];
    if (rows.empty()) {
      out.empty_groups.push_back(k);
      continue;
    }
    const Dataset sub = test.select_rows(rows);
    const auto xk = sub.col(j);
    std::vector<double> grid;
    if (categorical) {
      grid = observed_levels(xk);
    } else {
      const double lo = xk.minCoeff(), hi = xk.maxCoeff();
      for (double g : global)
        if (g >= lo && g <= hi) grid.push_back(g);
      if (spec.points.empty()) {
        grid.push_back(lo);
        grid.push_back(hi);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      }
      if (grid.empty()) {
        out.empty_groups.push_back(k);
        continue;
      }
    }
    auto values = partial_dependence(model, sub, j, grid);
    EffectCurve c = make_curve(CurveKind::cs_pdp, sub, j, std::move(grid), std::move(values));
    const auto& info = part.groups()[static_cast<std::size_t>(k)];
    c.group = CurveGroup{k, info.rule, static_cast<Index>(rows.size())};
    if (!categorical) {
      const std::vector<double> sample(xk.data(), xk.data() + xk.size());
      c = boxplot_summary(c, sample);
    }
    out.curves.push_back(std::move(c));
  }
  return out;
}

EffectCurve ale(const PredictiveModel& model, const Dataset& train, const Dataset& test, Index j, Index n_intervals) {
  if (test.n_rows() < 1) throw DataError("ALE needs at least one test row");
  if (!test.column(j).is_numeric()) throw DataError("ALE needs a numeric feature");
  const AleShift shift = ale_shift(train, test, j, n_intervals);
  const auto& edges = shift.intervals.edges;
  const Eigen::VectorXd base = model.predict(test);
  const double mean_prediction = base.mean();

  if (edges.size() < 2) {
    return make_curve(CurveKind::ale, test, j, {edges[0]}, {mean_prediction});
  }
  const Eigen::VectorXd diff = model.predict(shift.upper) - model.predict(shift.lower);
  const Index K = shift.intervals.n_intervals();
  std::vector<double> sum(static_cast<std::size_t>(K), 0.0);
  std::vector<Index> count(static_cast<std::size_t>(K), 0);
  for (Index i = 0; i < test.n_rows(); ++i) {
    const auto k = static_cast<std::size_t>(shift.interval[static_cast<std::size_t>(i)]);
    sum[k] += diff(i);
    ++count[k];
  }
  std::vector<double> acc(edges.size(), 0.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k)
    acc[k + 1] = acc[k] + (count[k] ? sum[k] / static_cast<double>(count[k]) : 0.0);

  EffectCurve c = make_curve(CurveKind::ale, test, j, edges, acc);
  double centre = 0.0;
  for (Index i = 0; i < test.n_rows(); ++i) centre += c.evaluate(test(i, j));
  centre /= static_cast<double>(test.n_rows());
  for (double& v : c.values) v += mean_prediction - centre;
  return c;
}

BoxplotSummary boxplot_summary(std::span<const double> x_sample, std::span<const double> grid) {
  if (x_sample.empty()) throw DataError("boxplot summary needs at least one value");
  std::vector<double> sorted(x_sample.begin(), x_sample.end());
  std::sort(sorted.begin(), sorted.end());
  BoxplotSummary b;
  b.n = static_cast<Index>(sorted.size());
  b.min = sorted.front();
  b.max = sorted.back();
  b.q25 = stats::quantile_sorted(sorted, 0.25);
  b.q75 = stats::quantile_sorted(sorted, 0.75);
  b.iqr = b.q75 - b.q25;
  const double reach = 1.58 * b.iqr / std::sqrt(static_cast<double>(b.n));
  b.whisker_lo = std::max(b.min, b.q25 - reach);
  b.whisker_hi = std::min(b.max, b.q75 + reach);
  for (double g : grid)
    if (g < b.whisker_lo || g > b.whisker_hi) b.outliers.push_back(g);
  return b;
}

EffectCurve boxplot_summary(const EffectCurve& curve, std::span<const double> x_sample) {
  EffectCurve c = curve;
  c.box = boxplot_summary(x_sample, curve.grid);
  return c;
}

std::string curves_to_csv(const std::vector<EffectCurve>& curves) {
  std::ostringstream out;
  out << "grid,value,group_id,curve\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      out << (c.categorical() ? c.labels[i] : format_double(c.grid[i])) << ',' << format_double(c.values[i]) << ',';
      if (c.group) out << c.group->group_id;
      out << ',' << to_string(c.kind) << '\n';
    }
  }
  return out.str();
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string curves_to_svg(const std::vector<EffectCurve>& curves, const std::string& title) {
  constexpr double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      if (first) x0 = x1 = c.grid[i], y0 = y1 = c.values[i], first = false;
      x0 = std::min(x0, c.grid[i]), x1 = std::max(x1, c.grid[i]);
      y0 = std::min(y0, c.values[i]), y1 = std::max(y1, c.values[i]);
    }
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << left << "\" y=\"" << H - 30 << "\" font-size=\"10\">" << num(x0) << "</text>\n";
  out << "<text x=\"" << W - right - 30 << "\" y=\"" << H - 30 << "\" font-size=\"10\">" << num(x1) << "</text>\n";
  out << "<text x=\"4\" y=\"" << H - bottom << "\" font-size=\"10\">" << num(y0) << "</text>\n";
  out << "<text x=\"4\" y=\"" << top + 4 << "\" font-size=\"10\">" << num(y1) << "</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* colour = palette[k % 8];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < c.grid.size(); ++i) out << (i ? " " : "") << num(px(c.grid[i])) << ',' << num(py(c.values[i]));
    out << "\"/>\n";
    if (c.box && !c.categorical()) {
      // bold stretch over the interquartile range
      std::vector<double> xs{c.box->q25};
      for (double g : c.grid)
        if (g > c.box->q25 && g < c.box->q75) xs.push_back(g);
      xs.push_back(c.box->q75);
      out << "<path fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"4\" d=\"";
      for (std::size_t i = 0; i < xs.size(); ++i)
        out << (i ? " L" : "M") << num(px(xs[i])) << ' ' << num(py(c.evaluate(xs[i])));
      out << "\"/>\n";
      for (double g : c.box->outliers)
        out << "<circle cx=\"" << num(px(g)) << "\" cy=\"" << num(py(c.evaluate(g))) << "\" r=\"2.5\" fill=\""
            << colour << "\"/>\n";
    }
    std::string legend = c.group ? c.group->rule : std::string(to_string(c.kind));
    out << "<text x=\"" << W - right - 250 << "\" y=\"" << top + 14 * static_cast<double>(k) << "\" font-size=\"10\" fill=\""
        << colour << "\">" << xml_escape(legend) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace condsub
