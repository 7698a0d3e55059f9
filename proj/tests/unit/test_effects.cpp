#include "doctest.h"
#include "helpers.hpp"

#include "condsub/effects.hpp"
#include "condsub/error.hpp"

#include <cmath>

using namespace condsub;

namespace {

ModelPtr constant_model(double c) {
  return std::make_shared<FunctionModel>(std::vector<std::string>{"x1"}, [c](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(x.rows(), c);
  });
}

// least-squares slope of values on grid
double slope(const EffectCurve& c) {
  const Eigen::Map<const Eigen::VectorXd> g(c.grid.data(), static_cast<Index>(c.grid.size()));
  const Eigen::Map<const Eigen::VectorXd> v(c.values.data(), static_cast<Index>(c.values.size()));
  const Eigen::ArrayXd gc = g.array() - g.mean();
  return (gc * (v.array() - v.mean())).sum() / gc.square().sum();
}

}  // namespace

TEST_SUITE("effects") {
  TEST_CASE("constant model gives flat curves") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(60, 2, 1));
    const auto m = constant_model(2.5);
    for (double v : pdp(*m, d, 0).values) CHECK(v == 2.5);
    for (double v : ale(*m, d, d, 0, 10).values) CHECK(v == doctest::Approx(2.5));
  }

  TEST_CASE("default grid spans the observed range") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(60, 2, 2));
    const auto c = pdp(*constant_model(0), d, 1);
    REQUIRE(c.grid.size() == 20);
    CHECK(c.grid.front() == d.col(1).minCoeff());
    CHECK(c.grid.back() == d.col(1).maxCoeff());
    CHECK(std::is_sorted(c.grid.begin(), c.grid.end()));
  }

  TEST_CASE("additive model: PDP slope is the coefficient and ALE coincides") {
    const Eigen::MatrixXd x = testing::normal_matrix(300, 2, 3);
    const Dataset d = testing::numeric_dataset(x);
    const auto m = std::make_shared<FunctionModel>(std::vector<std::string>{"x1", "x2"},
                                                   [](const Eigen::MatrixXd& z) -> Eigen::VectorXd {
                                                     return 1.7 * z.col(0).array() + z.col(1).array().square();
                                                   });
    const auto p = pdp(*m, d, 0);
    CHECK(slope(p) == doctest::Approx(1.7).epsilon(1e-9));
    const auto a = ale(*m, d, d, 0, 20);
    GridSpec at;
    at.points = a.grid;
    const auto pa = pdp(*m, d, 0, at);
    for (std::size_t g = 0; g < a.grid.size(); ++g) CHECK(std::abs(a.values[g] - pa.values[g]) < 0.05);
  }

  TEST_CASE("PDP of an ignored feature is exactly constant") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(50, 2, 4));
    const auto m = testing::linear_fn({"x1"}, {3.0});
    const auto c = pdp(*m, d, 1);
    for (double v : c.values) CHECK(v == c.values.front());
  }

  TEST_CASE("single-group cs-PDP equals the PDP") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(80, 3, 5));
    const auto m = testing::linear_fn({"x1", "x2"}, {1.0, -2.0});
    const auto p = pdp(*m, d, 0);
    const auto cs = cs_pdp(*m, single_group_partition(d, 0), d, 0);
    REQUIRE(cs.curves.size() == 1);
    CHECK(cs.curves[0].grid == p.grid);
    CHECK(cs.curves[0].values == p.values);
  }

  TEST_CASE("weighted cs-PDPs average to the PDP") {
    const Eigen::MatrixXd x = testing::normal_matrix(400, 3, 6);
    const Dataset d = testing::numeric_dataset(x);
    const auto m = std::make_shared<FunctionModel>(std::vector<std::string>{"x1", "x2", "x3"},
                                                   [](const Eigen::MatrixXd& z) -> Eigen::VectorXd {
                                                     return z.col(0).array() * z.col(1).array() + z.col(2).array();
                                                   });
    const auto part = fit_partition(d, 0, PartitionParams{2, 30});
    GridSpec g;
    g.points = {0.0};
    const auto cs = cs_pdp(*m, part, d, 0, g);
    double weighted = 0.0;
    Index n = 0;
    for (const auto& c : cs.curves) {
      REQUIRE(c.grid.size() == 1);
      weighted += static_cast<double>(c.group->n_k) * c.values[0];
      n += c.group->n_k;
    }
    CHECK(n == 400);
    CHECK(weighted / 400.0 == doctest::Approx(pdp(*m, d, 0, g).values[0]).epsilon(1e-12));
  }

  TEST_CASE("cs-PDP slopes vanish for a feature the model ignores") {
    // y = x1 + noise, x2 correlated with x1 at about 0.72
    const Index n = 1000;
    Eigen::MatrixXd x = testing::normal_matrix(n, 2, 7);
    x.col(1) = x.col(0) + 0.96 * x.col(1);
    const Dataset d = testing::numeric_dataset(x);
    const auto m = testing::linear_fn({"x1"}, {1.0});
    const auto part = fit_partition(d, 1, PartitionParams{2, 30});
    const auto cs = cs_pdp(*m, part, d, 1);
    REQUIRE(cs.curves.size() >= 2);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& c : cs.curves) {
      CHECK(std::abs(slope(c)) < 0.05);
      CHECK(c.grid.front() >= c.support_min);
      CHECK(c.grid.back() <= c.support_max);
      lo = std::min(lo, c.values.front());
      hi = std::max(hi, c.values.front());
    }
    CHECK(hi - lo > 1.0);
    CHECK_THROWS_AS(cs_pdp(*m, fit_partition(d, 0, PartitionParams{2, 30}), d, 1), Error);
  }

  TEST_CASE("boxplot summary") {
    std::vector<double> x(100);
    for (int i = 0; i < 100; ++i) x[i] = i + 1;
    const std::vector<double> grid{0.0, 20.0, 50.0, 90.0};
    const auto b = boxplot_summary(x, grid);
    CHECK(b.q25 == doctest::Approx(25.75));
    CHECK(b.q75 == doctest::Approx(75.25));
    CHECK(b.whisker_lo == doctest::Approx(25.75 - 1.58 * 49.5 / 10.0));
    CHECK(b.whisker_hi == doctest::Approx(75.25 + 1.58 * 49.5 / 10.0));
    CHECK(b.outliers == std::vector<double>{0.0, 90.0});

    const std::vector<double> one{3.0};
    const auto s = boxplot_summary(one, grid);
    CHECK(s.iqr == 0.0);
    CHECK(s.q25 == 3.0);
    CHECK(s.whisker_lo == 3.0);
    CHECK(s.whisker_hi == 3.0);

    // small n: whiskers would pass the data range and are capped
    const std::vector<double> few{1.0, 2.0, 10.0};
    const auto c = boxplot_summary(few, grid);
    CHECK(c.whisker_lo >= 1.0);
    CHECK(c.whisker_hi <= 10.0);
  }

  TEST_CASE("categorical PDP has one value per level") {
    Eigen::MatrixXd v(6, 2);
    v << 0, 1, 1, 2, 2, 3, 0, 4, 1, 5, 2, 6;
    const Dataset d({{"season", ColumnType::categorical, {"a", "b", "c"}}, {"x2", ColumnType::numeric, {}}}, v);
    const auto m = testing::linear_fn({"x2"}, {1.0});
    const auto c = pdp(*m, d, 0);
    CHECK(c.categorical());
    CHECK(c.labels == std::vector<std::string>{"a", "b", "c"});
    CHECK(c.evaluate(1.0) == doctest::Approx(3.5));
  }

  TEST_CASE("curve interpolation clamps at the ends") {
    EffectCurve c;
    c.grid = {0.0, 1.0, 3.0};
    c.values = {0.0, 2.0, 4.0};
    CHECK(c.evaluate(0.5) == 1.0);
    CHECK(c.evaluate(2.0) == 3.0);
    CHECK(c.evaluate(-10) == 0.0);
    CHECK(c.evaluate(10) == 4.0);
  }

  TEST_CASE("csv and svg output") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(200, 2, 8));
    const auto m = testing::linear_fn({"x1", "x2"}, {1.0, 1.0});
    const auto cs = cs_pdp(*m, fit_partition(d, 1, PartitionParams{2, 20}), d, 1);
    const std::string svg = curves_to_svg(cs.curves, "t");
    std::size_t polylines = 0;
    for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
    CHECK(polylines == cs.curves.size());
    for (const auto& c : cs.curves) {
      std::string rule = c.group->rule;
      for (auto p = rule.find('<'); p != std::string::npos; p = rule.find('<', p)) rule.replace(p, 1, "&lt;");
      for (auto p = rule.find('>'); p != std::string::npos; p = rule.find('>', p)) rule.replace(p, 1, "&gt;");
      CHECK(svg.find(rule) != std::string::npos);
    }
    const std::string csv = curves_to_csv(cs.curves);
    CHECK(csv.rfind("grid,value,group_id,curve\n", 0) == 0);
  }
}
