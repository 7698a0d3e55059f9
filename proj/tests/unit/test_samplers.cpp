#include "doctest.h"
#include "helpers.hpp"

#include "condsub/error.hpp"
#include "condsub/samplers.hpp"
#include "condsub/stats.hpp"

#include <algorithm>
#include <cmath>

using namespace condsub;

TEST_SUITE("samplers") {
  TEST_CASE("within-group permutation preserves each group's values") {
    const Eigen::VectorXd x = testing::normal_matrix(90, 1, 1).col(0);
    std::vector<int> groups(90);
    for (int i = 0; i < 90; ++i) groups[i] = (i * 7) % 4;
    const Eigen::VectorXd p = permute_within_groups(x, groups, 4, 9, 0, 0);
    for (int k = 0; k < 4; ++k) {
      std::vector<double> a, b;
      for (int i = 0; i < 90; ++i)
        if (groups[i] == k) a.push_back(x(i)), b.push_back(p(i));
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
    CHECK(p != x);
    CHECK(permute_within_groups(x, groups, 4, 9, 0, 0) == p);
    CHECK(permute_within_groups(x, groups, 4, 9, 0, 1) != p);
  }

  TEST_CASE("single group reproduces the marginal permutation") {
    const Eigen::MatrixXd m = testing::normal_matrix(50, 3, 2);
    const Dataset d = testing::numeric_dataset(m);
    const auto part = single_group_partition(d, 1);
    CHECK(cs_permutation(part, d, 1, 4, 2) == marginal_permutation(d, 1, 4, 2));
  }

  TEST_CASE("sampler spec parsing") {
    CHECK(SamplerSpec::parse("cs").depth == 30);
    CHECK(SamplerSpec::parse("cs3").depth == 3);
    CHECK(SamplerSpec::parse("cs3").label() == "cs3");
    CHECK(SamplerSpec::parse("perm").kind == SamplerKind::marginal);
    CHECK(SamplerSpec::parse("ale").kind == SamplerKind::ale_shift);
    CHECK_THROWS_AS(SamplerSpec::parse("csx"), Error);
    CHECK_THROWS_AS(SamplerSpec::parse("knockoff"), Error);
  }

  TEST_CASE("samplers check the column they were trained for") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(100, 3, 3));
    const auto s = train_sampler(SamplerSpec::parse("cs2"), d, 0, 1);
    CHECK_NOTHROW(s->sample(d, 0, 1, 0));
    CHECK_THROWS_AS(s->sample(d, 1, 1, 0), DataError);
    CHECK(train_sampler(SamplerSpec::parse("none"), d, 2, 1)->sample(d, 2, 5, 0) == Eigen::VectorXd(d.col(2)));
    CHECK_THROWS_AS(train_sampler(SamplerSpec::parse("ale"), d, 0, 1), Error);
  }

  TEST_CASE("imputation sampler reproduces the conditional spread") {
    // x1 = 2 x2 + N(0, 0.5^2): draws should centre on 2 x2 with residual sd near 0.5
    const Index n = 1500;
    Eigen::MatrixXd m = testing::normal_matrix(n, 3, 4);
    m.col(0) = 2.0 * m.col(1) + 0.5 * m.col(0);
    const auto parts = split(testing::numeric_dataset(m), SplitSpec{{0.5, 0.5}, 1});
    const auto s = fit_impute_residual(parts[0], 0, 3, 50);
    const Eigen::VectorXd draw = s->sample(parts[1], 0, 7, 0);
    const Eigen::VectorXd resid = draw - 2.0 * parts[1].col(1);
    const double sd = std::sqrt((resid.array() - resid.mean()).square().mean());
    CHECK(std::abs(resid.mean()) < 0.1);
    CHECK(sd == doctest::Approx(0.5).epsilon(0.25));
  }

  TEST_CASE("ALE intervals use type-7 quantile edges") {
    Eigen::VectorXd x(101);
    for (int i = 0; i <= 100; ++i) x(i) = i;
    const auto iv = AleIntervals::fit(x, 4);
    CHECK(iv.edges == std::vector<double>{0, 25, 50, 75, 100});
    CHECK(iv.interval_of(0) == 0);
    CHECK(iv.interval_of(25) == 0);
    CHECK(iv.interval_of(25.5) == 1);
    CHECK(iv.interval_of(100) == 3);
    CHECK(iv.interval_of(-5) == 0);
    CHECK(iv.interval_of(500) == 3);
    // duplicates merge
    const auto few = AleIntervals::fit(Eigen::VectorXd::Constant(10, 2.0), 5);
    CHECK(few.n_intervals() == 1);
  }

  TEST_CASE("ALE shift moves each row to its interval edges") {
    Eigen::MatrixXd m(6, 2);
    m << 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6;
    const Dataset d = testing::numeric_dataset(m);
    const auto sh = ale_shift(d, d, 0, 5);
    for (Index i = 0; i < 6; ++i) {
      const auto k = sh.interval[static_cast<std::size_t>(i)];
      CHECK(sh.lower(i, 0) == sh.intervals.lower(k));
      CHECK(sh.upper(i, 0) == sh.intervals.upper(k));
      CHECK(sh.lower(i, 0) <= m(i, 0));
      CHECK(sh.upper(i, 0) >= m(i, 0));
      CHECK(sh.lower(i, 1) == m(i, 1));
    }
  }
}
