#include "condsub/fidelity.hpp"

#include "condsub/error.hpp"
#include "condsub/rng.hpp"
#include "condsub/stats.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace condsub {

namespace {

// Pairwise squared distances over i < k, visited row by row.
template <typename F>
void for_each_pair(const Eigen::Ref<const Eigen::MatrixXd>& x, F&& f) {
  const Index n = x.rows(), d = x.cols();
  for (Index i = 0; i < n; ++i)
    for (Index k = i + 1; k < n; ++k) {
      double sq = 0.0;
      for (Index c = 0; c < d; ++c) {
        const double diff = x(i, c) - x(k, c);
        sq += diff * diff;
      }
      f(sq);
    }
}

}  // namespace

double median_heuristic(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Index n = x.rows();
  if (n < 2) return 0.0;
  const auto pairs = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  const std::uint64_t lo_rank = (pairs - 1) / 2, hi_rank = pairs / 2;

  // Selection in two passes: histogram squared distances, then keep only
  // the bins holding the middle ranks. Memory stays O(n + bins).
  const Eigen::RowVectorXd centre = x.colwise().mean();
  double bound = 0.0;
  for (Index i = 0; i < n; ++i) bound = std::max(bound, (x.row(i) - centre).squaredNorm());
  bound = 4.0 * bound * (1.0 + 1e-9) + 1e-300;  // |a-b|^2 <= (|a-c| + |b-c|)^2
  constexpr std::size_t n_bins = 1 << 16;
  auto bin_of = [&](double sq) {
    return std::min<std::size_t>(n_bins - 1, static_cast<std::size_t>(sq / bound * static_cast<double>(n_bins)));
  };
  std::vector<std::uint64_t> hist(n_bins, 0);
  for_each_pair(x, [&](double sq) { ++hist[bin_of(sq)]; });

  std::uint64_t before = 0;
  std::size_t lo_bin = 0, hi_bin = 0;
  std::uint64_t lo_offset = 0;
  bool lo_found = false;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (!lo_found && before + hist[b] > lo_rank) {
      lo_bin = b;
      lo_offset = before;
      lo_found = true;
    }
    if (before + hist[b] > hi_rank) {
      hi_bin = b;
      break;
    }
    before += hist[b];
  }
  std::vector<double> kept;
  for_each_pair(x, [&](double sq) {
    const auto b = bin_of(sq);
    if (b >= lo_bin && b <= hi_bin) kept.push_back(sq);
  });
  std::sort(kept.begin(), kept.end());
  const double a = kept[static_cast<std::size_t>(lo_rank - lo_offset)];
  const double b = kept[static_cast<std::size_t>(hi_rank - lo_offset)];
  return 0.5 * (std::sqrt(a) + std::sqrt(b));
}

MmdResult mmd(const Dataset& a, const Dataset& b, const KernelConfig& cfg) {
  const Dataset na = a.drop_target().numeric_only(), nb = b.drop_target().numeric_only();
  if (na.columns() != nb.columns()) throw DataError("mmd: the two samples have different numeric columns");
  if (na.n_features() == 0) throw DataError("mmd: no numeric columns");
  if (na.n_rows() == 0 || nb.n_rows() == 0) throw DataError("mmd: empty sample");

  Eigen::MatrixXd pooled(na.n_rows() + nb.n_rows(), na.n_features());
  pooled << na.values(), nb.values();
  const Standardizer s = Standardizer::fit(pooled);
  const Eigen::MatrixXd z = s.apply(pooled);

  MmdResult r;
  r.sigma = cfg.sigma ? *cfg.sigma : median_heuristic(z);
  if (!(r.sigma > 0.0)) throw DataError("mmd: zero kernel bandwidth (all points identical)");
  r.mmd = mmd_biased(z.topRows(na.n_rows()), z.bottomRows(nb.n_rows()), r.sigma);
  return r;
}

double data_fidelity(double mmd, bool* clamped) {
  constexpr double floor = 1e-15;
  const bool clamp = !(mmd > floor);
  if (clamped) *clamped = clamp;
  return -std::log(clamp ? floor : mmd);
}

std::vector<FidelityResult> data_fidelity_experiment(const Dataset& d, const FidelityConfig& config) {
  if (config.samplers.empty()) throw Error("fidelity experiment needs at least one sampler");
  if (config.n_reps < 1 || config.n_features < 1) throw Error("fidelity experiment needs n_reps, n_features >= 1");
  const Dataset data = d.drop_target().numeric_only();
  if (data.n_features() < config.min_features)
    throw DataError("fidelity experiment needs at least " + std::to_string(config.min_features) +
                    " numeric features, found " + std::to_string(data.n_features()));

  std::vector<Index> order(static_cast<std::size_t>(data.n_features()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng = make_rng(config.seed, {0xfea});
  shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(std::min<Index>(config.n_features, data.n_features())));

  const auto reps = static_cast<std::size_t>(config.n_reps);
  const std::size_t n_samplers = config.samplers.size();
  std::vector<std::vector<FidelityResult>> units(order.size() * reps);
  parallel_for(units.size(), [&](std::size_t u) {
    const Index j = order[u / reps];
    const auto rep = static_cast<Index>(u % reps);
    const std::uint64_t unit_seed =
        derive_seed(config.seed, {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(rep)});
    const Dataset sample = subsample(data, config.max_rows, derive_seed(unit_seed, {1}));
    const auto parts = split(sample, SplitSpec{{0.4, 0.3, 0.3}, derive_seed(unit_seed, {2})});
    const Dataset& train = parts[0];
    const Dataset& test = parts[1];
    const Dataset& ref = parts[2];

    for (std::size_t s = 0; s < n_samplers; ++s) {
      const SamplerSpec& spec = config.samplers[s];
      Dataset perturbed;
      if (spec.kind == SamplerKind::ale_shift) {
        const AleShift shift = ale_shift(train, test, j, spec.ale_intervals);
        perturbed = Dataset::stack(shift.lower, shift.upper);
      } else {
        const auto sampler = train_sampler(spec, train, j, derive_seed(unit_seed, {3, s}));
        perturbed = sampler->perturb(test, j, derive_seed(unit_seed, {4, s}), 0);
      }
      const MmdResult m = mmd(ref, perturbed);
      FidelityResult r;
      r.dataset = config.dataset;
      r.feature = data.column(j).name;
      r.feature_index = j;
      r.sampler = spec.label();
      r.rep = rep;
      r.mmd = m.mmd;
      r.sigma = m.sigma;
      r.data_fidelity = data_fidelity(m.mmd, &r.clamped);
      units[u].push_back(std::move(r));
    }
  });

  std::vector<FidelityResult> out;
  for (auto& u : units)
    for (auto& r : u) out.push_back(std::move(r));
  return out;
}

std::vector<FidelitySummary> summarize_fidelity(const std::vector<FidelityResult>& results) {
  std::vector<std::string> names;
  for (const auto& r : results)
    if (std::find(names.begin(), names.end(), r.sampler) == names.end()) names.push_back(r.sampler);

  std::map<std::tuple<std::string, std::string, Index>, std::vector<const FidelityResult*>> blocks;
  for (const auto& r : results) blocks[{r.dataset, r.feature, r.rep}].push_back(&r);

  std::map<std::string, std::vector<double>> fid, rank;
  for (const auto& r : results) fid[r.sampler].push_back(r.data_fidelity);
  for (const auto& [key, rs] : blocks) {
    std::vector<double> neg;
    for (const auto* r : rs) neg.push_back(-r->data_fidelity);
    const auto rk = stats::ranks(neg);
    for (std::size_t i = 0; i < rs.size(); ++i) rank[rs[i]->sampler].push_back(rk[i]);
  }
  std::vector<FidelitySummary> out;
  for (const auto& name : names) {
    FidelitySummary s;
    s.sampler = name;
    s.mean_fidelity = stats::mean(fid[name]);
    s.sd_fidelity = stats::sd(fid[name]);
    s.mean_rank = stats::mean(rank[name]);
    s.count = static_cast<Index>(fid[name].size());
    out.push_back(s);
  }
  return out;
}

double model_fidelity(const PredictiveModel& model, const EffectCurve& curve, const Dataset& test, Index j) {
  if (curve.grid.empty()) throw Error("model fidelity of an empty curve");
  if (test.n_rows() < 1) throw DataError("model fidelity needs test rows");
  const Eigen::VectorXd pred = model.predict(test);
  double sum = 0.0;
  for (Index i = 0; i < test.n_rows(); ++i) {
    const double diff = pred(i) - curve.evaluate(test(i, j));
    sum += diff * diff;
  }
  return sum / static_cast<double>(test.n_rows());
}

double model_fidelity(const PredictiveModel& model, const std::vector<EffectCurve>& group_curves,
                      const SubgroupPartition& part, const Dataset& test, Index j) {
  if (test.n_rows() < 1) throw DataError("model fidelity needs test rows");
  std::vector<const EffectCurve*> by_group(static_cast<std::size_t>(part.n_groups()), nullptr);
  for (const auto& c : group_curves) {
    if (!c.group) throw Error("per-group model fidelity needs group curves");
    if (c.grid.empty()) throw Error("model fidelity of an empty curve");
    by_group.at(static_cast<std::size_t>(c.group->group_id)) = &c;
  }
  const auto groups = part.assign(test);
  const Eigen::VectorXd pred = model.predict(test);
  double sum = 0.0;
  for (Index i = 0; i < test.n_rows(); ++i) {
    const EffectCurve* c = by_group[static_cast<std::size_t>(groups[static_cast<std::size_t>(i)])];
    if (!c) throw Error("no curve for group " + std::to_string(groups[static_cast<std::size_t>(i)]));
    const double diff = pred(i) - c->evaluate(test(i, j));
    sum += diff * diff;
  }
  return sum / static_cast<double>(test.n_rows());
}

}  // namespace condsub
