#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tvpmai/error.hpp"
#include "tvpmai/panel.hpp"

using namespace tvpmai;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

}  // namespace

TEST_SUITE("panel") {

TEST_CASE("load attaches the tcode row") {
  const auto path = write_temp("panel_tcode.csv",
                               "date,GDP,CPI\n"
                               "tcode,1,5\n"
                               "1960Q1,1.0,2.0\n"
                               "1960Q2,1.1,2.1\n"
                               "1960Q3,1.2,2.2\n"
                               "1960Q4,1.3,2.3\n"
                               "1961Q1,1.4,2.4\n");
  const TimeSeriesPanel p = load_panel(path);
  CHECK(p.rows() == 5);
  CHECK(p.cols() == 2);
  CHECK(p.tcodes == std::vector<int>{1, 5});
  CHECK(p.values(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("missing tcode row defaults to level transforms") {
  const auto path = write_temp("panel_notc.csv",
                               "date,A,B\n"
                               "1990-03-31,1,4\n"
                               "1990-06-30,2,5\n"
                               "1990-09-30,3,6\n");
  const TimeSeriesPanel p = load_panel(path);
  CHECK(p.tcodes == std::vector<int>{1, 1});
  CHECK(p.dates[0].str() == "1990Q1");
  CHECK(p.dates[2].str() == "1990Q3");
}

TEST_CASE("non-numeric cell names its row and column") {
  const auto path = write_temp("panel_bad.csv",
                               "date,GDP,CPI\n"
                               "1960Q1,1,2\n"
                               "1960Q2,1,2\n"
                               "1960Q3,1,2\n"
                               "1960Q4,abc,2\n"
                               "1961Q1,1,2\n");
  CHECK_THROWS_WITH_AS(load_panel(path),
                       doctest::Contains("(4, GDP)"), ParseError);
}

TEST_CASE("ragged row is a structural error") {
  const auto path = write_temp("panel_ragged.csv",
                               "date,A,B\n"
                               "1960Q1,1,2\n"
                               "1960Q2,1\n");
  CHECK_THROWS_AS(load_panel(path), ParseError);
}

TEST_CASE("unequal date spacing is rejected") {
  const auto path = write_temp("panel_gap.csv",
                               "date,A\n"
                               "1960Q1,1\n"
                               "1960Q2,2\n"
                               "1960Q4,3\n");
  CHECK_THROWS_AS(load_panel(path), ValidationError);
}

TEST_CASE("transform codes") {
  Eigen::VectorXd x(3);

  SUBCASE("dln of a doubling sequence") {
    x << 1, 2, 4;
    const Eigen::VectorXd out = apply_transform(x, 5);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("first difference of a constant") {
    x << 3, 3, 3;
    const Eigen::VectorXd out = apply_transform(x, 2);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 0.0);
  }
  SUBCASE("d2ln by direct evaluation") {
    // ln x = (0, 1, 3); first difference (1, 2); second difference 1.
    x << 1.0, std::exp(1.0), std::exp(3.0);
    const Eigen::VectorXd out = apply_transform(x, 6);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("log codes reject non-positive values") {
    x << 1, -2, 3;
    CHECK_THROWS_WITH_AS(apply_transform(x, 4), doctest::Contains("index 1"),
                         ValidationError);
  }
  SUBCASE("output lengths per code") {
    Eigen::VectorXd y(5);
    y << 1, 2, 3, 4, 5;
    CHECK(apply_transform(y, 1).size() == 5);
    CHECK(apply_transform(y, 2).size() == 4);
    CHECK(apply_transform(y, 3).size() == 3);
    CHECK(apply_transform(y, 4).size() == 5);
    CHECK(apply_transform(y, 5).size() == 4);
    CHECK(apply_transform(y, 6).size() == 3);
    CHECK(apply_transform(y, 7).size() == 3);
  }
}

namespace {

TimeSeriesPanel tiny_panel(const Eigen::MatrixXd& values,
                           std::vector<int> tcodes) {
  TimeSeriesPanel p;
  p.values = values;
  const int N = static_cast<int>(values.cols());
  for (int i = 0; i < N; ++i) p.series_ids.push_back("V" + std::to_string(i + 1));
  p.tcodes = std::move(tcodes);
  const QuarterDate start{1960, 1};
  for (int t = 0; t < values.rows(); ++t)
    p.dates.push_back(QuarterDate::from_serial(start.serial() + t));
  return p;
}

}  // namespace

TEST_CASE("standardize symmetric three points") {
  Eigen::MatrixXd v(3, 1);
  v << 1, 2, 3;
  const TimeSeriesPanel out = standardize_panel(tiny_panel(v, {1}));
  CHECK(out.values(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.values(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.values(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.means[0] == doctest::Approx(2.0));
  CHECK(out.stds[0] == doctest::Approx(1.0));  // T-1 denominator
}

TEST_CASE("standardize is idempotent and invertible") {
  Eigen::MatrixXd v(6, 2);
  v << 1, 10, 4, 9, 2, 14, 8, 11, 3, 13, 5, 12;
  const TimeSeriesPanel p = tiny_panel(v, {1, 1});
  const TimeSeriesPanel s1 = standardize_panel(p);
  const TimeSeriesPanel s2 = standardize_panel(s1);
  CHECK((s2.values - s1.values).cwiseAbs().maxCoeff() < 1e-12);

  const TimeSeriesPanel back = destandardize_panel(s1);
  CHECK((back.values - p.values).cwiseAbs().maxCoeff() < 1e-10);

  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(s1.values.col(i).mean()) < 1e-10);
    const double sd = std::sqrt(
        (s1.values.col(i).array() - s1.values.col(i).mean()).square().sum() /
        (s1.rows() - 1));
    CHECK(std::abs(sd - 1.0) < 1e-10);
  }
}

TEST_CASE("zero-variance column names the series") {
  Eigen::MatrixXd v(4, 2);
  v << 1, 7, 2, 7, 3, 7, 4, 7;
  CHECK_THROWS_WITH_AS(standardize_panel(tiny_panel(v, {1, 1})),
                       doctest::Contains("V2"), ValidationError);
}

TEST_CASE("transform trims all columns to a common date support") {
  Eigen::MatrixXd v(6, 3);
  v << 1, 1, 1, 2, 2, 2, 3, 4, 3, 4, 8, 4, 5, 16, 5, 6, 32, 6;
  TimeSeriesPanel p = tiny_panel(v, {1, 5, 6});
  const TimeSeriesPanel out = transform_panel(p);
  CHECK(out.rows() == 4);  // max loss 2
  CHECK(out.dates[0] == p.dates[2]);
  // Level column keeps its last 4 values.
  CHECK(out.values(0, 0) == doctest::Approx(3.0));
  CHECK(out.values(3, 0) == doctest::Approx(6.0));
  // dln of the doubling column is ln 2 everywhere.
  for (int t = 0; t < 4; ++t)
    CHECK(out.values(t, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("normalized panel file round-trips exactly") {
  Eigen::MatrixXd v(5, 2);
  v << 0.1, -3, 0.7, 2, -1.3, 5, 2.2, 1, 0.9, -2;
  TimeSeriesPanel p = tiny_panel(v, {1, 2});
  p.group_labels = {"RI", "FI"};
  const TimeSeriesPanel s = standardize_panel(p);

  const auto path =
      (std::filesystem::temp_directory_path() / "norm_panel.csv").string();
  write_normalized_panel(s, path);
  const TimeSeriesPanel r = read_normalized_panel(path);

  CHECK(r.series_ids == s.series_ids);
  CHECK(r.tcodes == s.tcodes);
  CHECK(r.group_labels == s.group_labels);
  CHECK((r.values - s.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.means - s.means).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.stds - s.stds).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.dates[0] == s.dates[0]);
}

TEST_CASE("date parsing accepts quarter and month forms") {
  CHECK(QuarterDate::parse("1987Q3").serial() == QuarterDate{1987, 3}.serial());
  CHECK(QuarterDate::parse("1987:Q3") == QuarterDate{1987, 3});
  CHECK(QuarterDate::parse("1987-09") == QuarterDate{1987, 3});
  CHECK(QuarterDate::parse("1987-07-01") == QuarterDate{1987, 3});
  CHECK_THROWS_AS(QuarterDate::parse("Q3 87"), ParseError);
  CHECK_THROWS_AS(QuarterDate::parse("1987Q5"), ParseError);
}

}  // TEST_SUITE
