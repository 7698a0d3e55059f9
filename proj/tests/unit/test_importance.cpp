#include "doctest.h"
#include "helpers.hpp"

#include "condsub/error.hpp"
#include "condsub/importance.hpp"
#include "condsub/parallel.hpp"

#include <cmath>

using namespace condsub;

TEST_SUITE("importance") {
  TEST_CASE("PFI equals the hand-computed loss difference") {
    const Eigen::MatrixXd x = testing::normal_matrix(80, 2, 1);
    const Eigen::VectorXd y = 3.0 * x.col(0) - x.col(1);
    const Dataset d = testing::numeric_dataset(x, y);
    const auto model = testing::linear_fn({"x1", "x2"}, {2.5, -1.0});
    const auto r = pfi(*model, d, 0, Loss::squared_error, 3, 42);

    double orig = 0.0;
    for (Index i = 0; i < 80; ++i) orig += std::pow(y(i) - (2.5 * x(i, 0) - x(i, 1)), 2);
    orig /= 80;
    double total = 0.0;
    for (Index m = 0; m < 3; ++m) {
      const Eigen::VectorXd xt = marginal_permutation(d, 0, 42, m);
      double l = 0.0;
      for (Index i = 0; i < 80; ++i) l += std::pow(y(i) - (2.5 * xt(i) - x(i, 1)), 2);
      CHECK(r.per_repetition[static_cast<std::size_t>(m)] == doctest::Approx(l / 80 - orig).epsilon(1e-12));
      total += l / 80 - orig;
    }
    CHECK(r.value == doctest::Approx(total / 3).epsilon(1e-12));
    CHECK(r.original_loss == doctest::Approx(orig).epsilon(1e-12));
    CHECK(r.standard_error > 0.0);
  }

  TEST_CASE("unused feature has exactly zero importance") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(100, 3, 2), Eigen::VectorXd::Zero(100));
    const auto model = testing::linear_fn({"x1", "x2"}, {1.0, 1.0});
    const auto r = pfi(*model, d, 2, Loss::squared_error, 4, 1);
    CHECK(r.value == 0.0);
    CHECK(r.standard_error == 0.0);
  }

  TEST_CASE("depth-0 aggregate equals the marginal PFI") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::linear;
    spec.n = 400;
    spec.seed = 3;
    const Dataset d = generate(spec);
    const auto model = true_model(spec);
    const auto r = cs_pfi(*model, single_group_partition(d, 0), d, 0, Loss::squared_error, 5, 8);
    CHECK(r.aggregate == r.marginal.value);
    CHECK(r.aggregate_per_repetition == r.marginal.per_repetition);
    const auto sweep = depth_sweep(*model, d, d, 0, Loss::squared_error, {0, 2}, 5, 8);
    CHECK(sweep[0].aggregate == sweep[0].marginal);
    CHECK(sweep[0].n_groups == 1);
    CHECK(sweep[1].n_groups <= 4);
  }

  TEST_CASE("cs-PFI groups, weights and json shape") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::nonlinear;
    spec.n = 900;
    spec.seed = 4;
    const auto parts = split(generate(spec), SplitSpec{{2.0 / 3.0, 1.0 / 3.0}, 1});
    const auto part = fit_partition(parts[0].drop_target(), 0, PartitionParams{2, 30});
    const auto r = cs_pfi(*true_model(spec), part, parts[1], 0, Loss::squared_error, 3, 5);
    Index total = 0;
    double agg = 0.0;
    for (const auto& g : r.groups) {
      total += g.n_k;
      if (g.cs_pfi) agg += static_cast<double>(g.n_k) / parts[1].n_rows() * *g.cs_pfi;
    }
    CHECK(total == parts[1].n_rows());
    CHECK(agg == r.aggregate);
    // conditioning removes most of the extrapolation penalty
    CHECK(r.aggregate < 0.5 * r.marginal.value);

    const auto j = r.to_json();
    CHECK(j["feature"] == "x1");
    CHECK(j["groups"].size() == static_cast<std::size_t>(part.n_groups()));
    CHECK(j.contains("marginal_pfi"));
    CHECK(j.contains("aggregate_cs_pfi"));
    CHECK_THROWS_AS(cs_pfi(*true_model(spec), part, parts[1], 1, Loss::squared_error, 3, 5), DataError);
  }

  TEST_CASE("results do not depend on the worker count") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::linear;
    spec.n = 500;
    spec.seed = 6;
    const Dataset d = generate(spec);
    const auto part = fit_partition(d.drop_target(), 0, PartitionParams{3, 20});
    set_jobs(1);
    const auto a = cs_pfi(*true_model(spec), part, d, 0, Loss::squared_error, 6, 2).to_json().dump();
    set_jobs(3);
    const auto b = cs_pfi(*true_model(spec), part, d, 0, Loss::squared_error, 6, 2).to_json().dump();
    set_jobs(1);
    CHECK(a == b);
  }

  TEST_CASE("ground truth conditional PFI matches the analytic value") {
    // loss increase is (x1 - x1')^2 (1 + x2)^2 with x1, x1' i.i.d. given the rest:
    // E = 2 E[Var(x1 | x_-1) (1 + x2)^2]
    ScenarioSpec spec;
    spec.kind = ScenarioKind::independent;
    const auto model = true_model(spec);
    CHECK(ground_truth_cpfi(spec, *model, Loss::squared_error, 200000, 1, 1) == doctest::Approx(4.0).epsilon(0.03));
    spec.kind = ScenarioKind::linear;
    CHECK(ground_truth_cpfi(spec, *model, Loss::squared_error, 200000, 1, 2) == doctest::Approx(4.0).epsilon(0.03));

    // truncated normal moments: E[x2 | x2 > 0] = sqrt(2 / pi)
    const double m = std::sqrt(2.0 / M_PI);
    const double pos = 1 + 2 * m + 1, neg = 1 - 2 * m + 1;
    const double nonlinear = 0.5 * 2 * 1 * pos + 0.25 * 2 * 4 * neg + 0.25 * 2 * 25 * neg;
    spec.kind = ScenarioKind::nonlinear;
    CHECK(ground_truth_cpfi(spec, *model, Loss::squared_error, 400000, 1, 3) ==
          doctest::Approx(nonlinear).epsilon(0.03));
  }

  TEST_CASE("misclassification loss needs integer targets") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(20, 2, 7), Eigen::VectorXd::Constant(20, 0.5));
    const auto model = testing::linear_fn({"x1"}, {1.0});
    CHECK_THROWS_AS(pfi(*model, d, 0, Loss::misclassification, 1, 1), DataError);
    CHECK_THROWS_AS(pfi(*model, d, 0, Loss::squared_error, 0, 1), Error);
  }
}
