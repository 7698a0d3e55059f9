#include "doctest.h"
#include "helpers.hpp"

#include "condsub/error.hpp"
#include "condsub/stats.hpp"

#include <cmath>
#include <set>
#include <sstream>

using namespace condsub;

namespace {

Dataset parse(const std::string& text, CsvOptions opts = {}) {
  std::istringstream in(text);
  return read_csv(in, opts);
}

LoadErrorKind load_error_kind(const std::string& text, CsvOptions opts = {}) {
  try {
    parse(text, opts);
  } catch (const LoadError& e) {
    return e.kind();
  }
  FAIL("expected a LoadError");
  return LoadErrorKind::io;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("csv column types and sorted level codes") {
    const Dataset d = parse("a,season,b\n1.5,winter,2\n-3,autumn,1e3\n0,winter,4\n", {{}, std::string("b")});
    REQUIRE(d.n_rows() == 3);
    REQUIRE(d.n_features() == 2);
    CHECK(d.column(0).is_numeric());
    CHECK(d.column(1).is_categorical());
    CHECK(d.column(1).levels == std::vector<std::string>{"autumn", "winter"});
    CHECK(d(0, 1) == 1.0);
    CHECK(d(1, 1) == 0.0);
    CHECK(d.target()(1) == 1000.0);
    CHECK(d.target_name() == "b");
  }

  TEST_CASE("quoted fields, embedded commas and provenance lines") {
    const Dataset d = parse("# condsub 0.1.0 seed=1\n\"x, y\",lvl\n1,\"a \"\"q\"\", b\"\n2,c\n");
    CHECK(d.column(0).name == "x, y");
    CHECK(d.column(1).levels == std::vector<std::string>{"a \"q\", b", "c"});
  }

  TEST_CASE("schema overrides inference") {
    CsvOptions opts;
    opts.schema = Schema::parse("code:categorical\n");
    const Dataset d = parse("code,v\n3,1\n1,2\n3,3\n", opts);
    CHECK(d.column(0).is_categorical());
    CHECK(d.column(0).levels == std::vector<std::string>{"1", "3"});

    opts.schema = Schema::parse("v:numeric\n");
    CHECK(load_error_kind("v\nabc\n", opts) == LoadErrorKind::unparseable_cell);
    opts.schema = Schema::parse("nope:numeric\n");
    CHECK(load_error_kind("v\n1\n", opts) == LoadErrorKind::schema);
  }

  TEST_CASE("load errors carry their kind and coordinates") {
    CHECK(load_error_kind("") == LoadErrorKind::missing_header);
    CHECK(load_error_kind("a,a\n1,2\n") == LoadErrorKind::duplicate_column);
    CHECK(load_error_kind("a,b\n1,2\n3\n") == LoadErrorKind::ragged_row);
    CHECK(load_error_kind("a,b\n1,\n") == LoadErrorKind::missing_value);
    CHECK(load_error_kind("a,b\nx,1\n", {{}, std::string("a")}) == LoadErrorKind::schema);
    try {
      parse("a,b\n1,2\n3,\n");
      FAIL("no error");
    } catch (const LoadError& e) {
      CHECK(e.row() == 2);
      CHECK(e.column() == 2);
    }
  }

  TEST_CASE("write_csv round trips doubles exactly") {
    const Eigen::MatrixXd x = testing::normal_matrix(20, 3, 1);
    const Dataset d = testing::numeric_dataset(x, Eigen::VectorXd(x.col(0) * 3.0));
    std::ostringstream out;
    write_csv(d, out);
    const Dataset back = parse(out.str(), {{}, std::string("y")});
    CHECK(back.values() == d.values());
    CHECK(back.target() == d.target());
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.0})
      CHECK(std::stod(format_double(v)) == v);
  }

  TEST_CASE("split_indices sizes and disjointness") {
    const auto parts = split_indices(10, SplitSpec{{0.4, 0.3, 0.3}, 5});
    REQUIRE(parts.size() == 3);
    // floor sizes 4, 3, 3 and no leftover
    CHECK(parts[0].size() == 4);
    CHECK(parts[1].size() == 3);
    CHECK(parts[2].size() == 3);
    std::set<Index> all;
    for (const auto& p : parts) {
      CHECK(std::is_sorted(p.begin(), p.end()));
      all.insert(p.begin(), p.end());
    }
    CHECK(all.size() == 10);

    const auto odd = split_indices(7, SplitSpec{{0.5, 0.5}, 5});
    CHECK(odd[0].size() == 4);
    CHECK(odd[1].size() == 3);
    CHECK(split_indices(7, SplitSpec{{0.5, 0.5}, 5}) == odd);
  }

  TEST_CASE("subsample keeps ascending distinct rows") {
    const auto rows = subsample_indices(100, 30, 3);
    CHECK(rows.size() == 30);
    CHECK(std::is_sorted(rows.begin(), rows.end()));
    CHECK(std::set<Index>(rows.begin(), rows.end()).size() == 30);
    CHECK(subsample_indices(10, 30, 3).size() == 10);
  }

  TEST_CASE("standardizer uses the sample standard deviation") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 5, 2, 5, 3, 5, 4, 5;
    const auto s = Standardizer::fit(x);
    CHECK(s.mean(0) == doctest::Approx(2.5));
    // sqrt(((1.5^2 + 0.5^2) * 2) / 3)
    CHECK(s.scale(0) == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.scale(1) == 1.0);
    const Eigen::MatrixXd z = s.apply(x);
    CHECK(z.col(1).isZero());
  }

  TEST_CASE("dataset transformations leave other columns untouched") {
    const Eigen::MatrixXd x = testing::normal_matrix(8, 3, 2);
    const Dataset d = testing::numeric_dataset(x);
    const Dataset w = d.with_column(1, Eigen::VectorXd::Zero(8));
    CHECK(w.col(0) == d.col(0));
    CHECK(w.col(2) == d.col(2));
    CHECK(w.col(1).isZero());
    CHECK(d.drop_column(1).column_names() == std::vector<std::string>{"x1", "x3"});
    CHECK(d.index_of("x3") == 2);
    CHECK_THROWS_AS(d.index_of("zz"), DataError);
    CHECK_THROWS_AS(d.target(), DataError);
    CHECK(Dataset::stack(d, d).n_rows() == 16);
  }

  TEST_CASE("type-7 quantiles") {
    std::vector<double> x(100);
    for (int i = 0; i < 100; ++i) x[i] = i + 1;
    CHECK(stats::quantile(x, 0.25) == doctest::Approx(25.75));
    CHECK(stats::quantile(x, 0.75) == doctest::Approx(75.25));
    CHECK(stats::median(std::vector<double>{3, 1, 2, 10}) == doctest::Approx(2.5));
  }
}
