#include "doctest.h"
#include "helpers.hpp"

#include "condsub/error.hpp"
#include "condsub/parallel.hpp"
#include "condsub/tree.hpp"

#include <cmath>
#include <numeric>

using namespace condsub;

TEST_SUITE("models") {
  TEST_CASE("ols recovers exact coefficients") {
    const Eigen::MatrixXd x = testing::normal_matrix(50, 3, 11);
    const Eigen::VectorXd y = (1.5 + 2.0 * x.col(0).array() - 0.5 * x.col(2).array()).matrix();
    const auto m = fit_ols(testing::numeric_dataset(x, y));
    CHECK(m->intercept() == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(m->coefficients()(0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(std::abs(m->coefficients()(1)) < 1e-10);
    CHECK(m->coefficients()(2) == doctest::Approx(-0.5).epsilon(1e-10));
  }

  TEST_CASE("ols names collinear columns") {
    Eigen::MatrixXd x = testing::normal_matrix(30, 3, 12);
    x.col(2) = 2.0 * x.col(0) - x.col(1);
    try {
      fit_ols(testing::numeric_dataset(x, Eigen::VectorXd(x.col(0))));
      FAIL("no error");
    } catch (const ModelError& e) {
      CHECK(std::string(e.what()).find("'x3'") != std::string::npos);
    }
    CHECK_THROWS_AS(fit_ols(testing::numeric_dataset(testing::normal_matrix(3, 3, 1), Eigen::VectorXd::Zero(3))),
                    ModelError);
  }

  TEST_CASE("knn with k = 1 reproduces training targets") {
    const Eigen::MatrixXd x = testing::normal_matrix(40, 2, 13);
    const Eigen::VectorXd y = x.rowwise().sum();
    const Dataset d = testing::numeric_dataset(x, y);
    const auto m = fit_knn(d, 1);
    CHECK(m->predict(d) == y);
    // k = n averages everything
    CHECK(fit_knn(d, 40)->predict(d).array().isApprox(Eigen::ArrayXd::Constant(40, y.mean())));
    CHECK_THROWS_AS(fit_knn(d, 41), ModelError);
  }

  TEST_CASE("models resolve features by name") {
    const Eigen::MatrixXd x = testing::normal_matrix(10, 2, 14);
    const auto m = testing::linear_fn({"x2"}, {3.0});
    const Dataset d = testing::numeric_dataset(x);
    const std::vector<Index> order{1, 0};
    CHECK(m->predict(d.select_columns(order)) == m->predict(d));
    CHECK_THROWS_AS(m->predict(d.drop_column(1)), DataError);
  }

  TEST_CASE("single regression tree matches the best split by exhaustive search") {
    // y is a step in x1; the root split must put the threshold between 0.4 and 0.6
    Eigen::MatrixXd x(10, 1);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
      x(i, 0) = i / 10.0;
      y(i) = i < 5 ? 0.0 : 1.0;
    }
    tree::GrowParams p;
    p.min_node_size = 1;
    p.max_depth = 1;
    std::vector<Index> rows(10);
    std::iota(rows.begin(), rows.end(), 0);
    const auto t = tree::Tree::grow(testing::numeric_dataset(x), y, rows, p, nullptr);
    REQUIRE(t.nodes().size() == 3);
    CHECK(t.nodes()[0].threshold == doctest::Approx(0.45));
    CHECK(t.predict(testing::numeric_dataset(x)) == y);
  }

  TEST_CASE("forest is deterministic and independent of the worker count") {
    const Eigen::MatrixXd x = testing::normal_matrix(200, 4, 15);
    const Eigen::VectorXd y = x.col(0).array().square() + x.col(1).array();
    const Dataset d = testing::numeric_dataset(x, y);
    ForestOptions o;
    o.n_trees = 20;
    set_jobs(1);
    const Eigen::VectorXd a = fit_forest(d, 3, o)->predict(d);
    set_jobs(4);
    const Eigen::VectorXd b = fit_forest(d, 3, o)->predict(d);
    set_jobs(1);
    CHECK(a == b);
    CHECK(fit_forest(d, 4, o)->predict(d) != a);
    // in-sample fit must beat the mean by a wide margin
    CHECK((a - y).squaredNorm() < 0.3 * (y.array() - y.mean()).square().sum());
  }

  TEST_CASE("out-of-bag predictions are honest") {
    // pure noise target: in-sample fit is optimistic, out-of-bag is not
    const Eigen::MatrixXd x = testing::normal_matrix(300, 3, 16);
    const Eigen::VectorXd y = testing::normal_matrix(300, 1, 17).col(0);
    const Dataset d = testing::numeric_dataset(x, y);
    ForestOptions o;
    o.n_trees = 50;
    const auto f = fit_forest(d, 5, o);
    const double var = (y.array() - y.mean()).square().mean();
    CHECK((f->predict(d) - y).squaredNorm() / 300 < 0.7 * var);
    CHECK((f->oob_predict(d) - y).squaredNorm() / 300 > 0.9 * var);
  }

  TEST_CASE("classification forest votes class codes") {
    const Eigen::MatrixXd x = testing::normal_matrix(200, 2, 18);
    Eigen::VectorXd codes(200);
    for (Index i = 0; i < 200; ++i) codes(i) = x(i, 0) > 0 ? 1.0 : 0.0;
    ForestOptions o;
    o.n_trees = 15;
    const auto f = fit_forest_classifier(testing::numeric_dataset(x), codes, 2, 1, o);
    const Eigen::VectorXd pred = f->predict(testing::numeric_dataset(x));
    CHECK((pred - codes).cwiseAbs().sum() <= 4);
    CHECK_THROWS_AS(fit_forest_classifier(testing::numeric_dataset(x), codes, 1, 1, o), ModelError);
  }

  TEST_CASE("loss functions") {
    CHECK(pointwise_loss(Loss::squared_error, 1.0, 3.0) == 4.0);
    CHECK(pointwise_loss(Loss::misclassification, 1.0, 1.0) == 0.0);
    CHECK(pointwise_loss(Loss::misclassification, 1.0, 2.0) == 1.0);
    CHECK(parse_loss("mmce") == Loss::misclassification);
    CHECK_THROWS_AS(parse_loss("mae"), Error);
  }
}

TEST_SUITE("bridge") {
  TEST_CASE("external model round trip") {
    const Eigen::MatrixXd x = testing::normal_matrix(300, 2, 19);
    const Dataset d = testing::numeric_dataset(x);
    const auto m = external_model("python3 " + testing::stub("echo_x1.py"), d.columns());
    CHECK(m->predict(d) == Eigen::VectorXd(x.col(0)));
    // second request on the same process
    CHECK(m->predict(d.select_rows(std::vector<Index>{3, 4})) == Eigen::VectorXd(x.col(0).segment(3, 2)));

    const auto e = external_model("python3 " + testing::stub("exp_sum.py"), d.columns());
    const Eigen::VectorXd expected = (x.col(0) + x.col(1)).array().exp();
    CHECK(e->predict(d).isApprox(expected, 1e-15));
  }

  TEST_CASE("external model failures map to bridge error kinds") {
    const Dataset d = testing::numeric_dataset(testing::normal_matrix(5, 2, 20));
    auto kind_of = [&](const std::string& cmd, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
      try {
        external_model(cmd, d.columns(), timeout)->predict(d);
      } catch (const BridgeError& e) {
        return e.kind();
      }
      FAIL("expected a BridgeError");
      return BridgeErrorKind::spawn;
    };
    CHECK(kind_of("python3 " + testing::stub("short_reply.py")) == BridgeErrorKind::count_mismatch);
    CHECK(kind_of("echo hello") == BridgeErrorKind::handshake);
    CHECK(kind_of("true") == BridgeErrorKind::handshake);
    CHECK(kind_of("echo CONDSUB-PREDICT 1; read l; read a; echo oops", std::chrono::seconds(10)) ==
          BridgeErrorKind::malformed_line);
    CHECK(kind_of("echo CONDSUB-PREDICT 1; sleep 5", std::chrono::milliseconds(300)) == BridgeErrorKind::timeout);
  }
}
