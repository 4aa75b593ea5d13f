// Copyright 2026 The areltrend Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "areltrend/areal_data.hpp"
#include "areltrend/error.hpp"
#include "areltrend/rng.hpp"
#include "fixtures.hpp"

using namespace areltrend;

TEST_SUITE("areal_data") {
  TEST_CASE("ihs golden values") {
    CHECK(ihs(std::int64_t{0}) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(std::abs(ihs(std::int64_t{1}) - 0.1882264) < 1e-6);
    CHECK(std::abs(ihs(std::int64_t{100}) - 4.6051952) < 1e-6);
    // Independent closed forms.
    CHECK(std::abs(ihs(1.0) - (std::log(1.0 + std::sqrt(2.0)) - std::log(2.0))) < 1e-15);
    CHECK(std::abs(ihs(100.0) - std::log(100.0)) < 2.5e-5);
  }

  TEST_CASE("ihs is strictly increasing and approaches log c") {
    double previous = ihs(0.0);
    for (int c = 1; c <= 5000; ++c) {
      const double v = ihs(static_cast<double>(c));
      CHECK(v > previous);
      previous = v;
      if (c >= 10) CHECK(std::abs(v - std::log(static_cast<double>(c))) < 1.0 / (4.0 * c * c) + 1e-12);
    }
    CHECK(ihs_inverse(ihs(37.0)) == doctest::Approx(37.0).epsilon(1e-12));
  }

  TEST_CASE("segregation examples") {
    const std::vector<double> city{0.2, 0.2, 0.2, 0.2, 0.2};
    CHECK(segregation(city, city) == 0.0);
    CHECK(segregation(std::vector<double>{1, 0, 0, 0, 0}, city) == doctest::Approx(0.8));
    CHECK(segregation(std::vector<double>{0, 1, 0, 0, 0}, std::vector<double>{1, 0, 0, 0, 0}) == 1.0);
    CHECK_THROWS_AS(segregation(std::vector<double>{1, 0, 0, 0}, city), InputError);
    CHECK_THROWS_AS(segregation(std::vector<double>{0.5, 0, 0, 0, 0}, city), InputError);
  }

  TEST_CASE("poverty index examples") {
    CHECK(poverty_index(std::vector<double>{1, 0, 0, 0, 0, 0, 0}) == 1.0);
    CHECK(poverty_index(std::vector<double>{0, 0, 0, 0, 0, 0, 1}) == 0.0);
    const std::vector<double> uniform(7, 1.0 / 7.0);
    CHECK(poverty_index(uniform) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(poverty_index(std::vector<double>{1, 0, 0}), InputError);
    CHECK_THROWS_AS(poverty_index(std::vector<double>{1.5, -0.5, 0, 0, 0, 0, 0}), InputError);
  }

  TEST_CASE("segregation and poverty stay in [0,1] on random simplex draws") {
    Rng rng(11);
    for (int rep = 0; rep < 2000; ++rep) {
      std::vector<double> a(5), b(5), q(7);
      auto fill = [&](std::vector<double>& v) {
        double s = 0.0;
        for (auto& x : v) s += (x = rng.gamma(0.3));
        for (auto& x : v) x /= s;
      };
      fill(a);
      fill(b);
      fill(q);
      const double s = segregation(a, b);
      const double p = poverty_index(q);
      CHECK((s >= 0.0 && s <= 1.0));
      CHECK((p >= 0.0 && p <= 1.0));
    }
  }

  TEST_CASE("land-use ratios") {
    CHECK(*landuse_ratios({10.0, 10.0, 0.0, 5.0}).vacancy == 1.0);
    CHECK(*landuse_ratios({10.0, 1.0, 30.0, 70.0}).comresprop == doctest::Approx(0.3));
    const auto missing = landuse_ratios({10.0, 1.0, 0.0, 0.0});
    CHECK_FALSE(missing.comresprop.has_value());
    CHECK_FALSE(landuse_ratios({0.0, 0.0, 1.0, 1.0}).vacancy.has_value());
  }

  TEST_CASE("standardize: log income e, e^2, e^3 gives -1, 0, 1") {
    Eigen::MatrixXd values(3, 1);
    values << std::log(std::exp(1.0)), std::log(std::exp(2.0)), std::log(std::exp(3.0));
    const auto cov = standardize(values, {"a", "b", "c"}, {"log_income"});
    CHECK(cov.Z(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(cov.Z(1, 0)) < 1e-12);
    CHECK(cov.Z(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("standardize rejects a constant column") {
    Eigen::MatrixXd values = Eigen::MatrixXd::Constant(4, 1, 3.0);
    CHECK_THROWS_AS(standardize(values, {"a", "b", "c", "d"}, {"x"}), InputError);
  }

  TEST_CASE("standardized columns have mean 0, SD 1 and round-trip") {
    Rng rng(5);
    Eigen::MatrixXd values(40, 3);
    for (Eigen::Index k = 0; k < values.size(); ++k) values.data()[k] = 50.0 + 10.0 * rng.normal();
    std::vector<std::string> ids(40);
    for (int i = 0; i < 40; ++i) ids[i] = "u" + std::to_string(i);
    const auto cov = standardize(values, ids, {"a", "b", "c"});
    for (int j = 0; j < 3; ++j) {
      const double mean = cov.Z.col(j).mean();
      const double sd = std::sqrt((cov.Z.col(j).array() - mean).square().sum() / 39.0);
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(sd - 1.0) < 1e-10);
    }
    CHECK((cov.destandardize() - values).cwiseAbs().maxCoeff() < 1e-10);
  }

  RawUnitDemographics raw_unit(const std::string& id, double income, double poverty_top,
                               double white, double black) {
    RawUnitDemographics u;
    u.unit_id = id;
    u.pop_total = static_cast<std::int64_t>(white + black);
    u.ethnic_counts = {white, black, 0.0, 0.0, 0.0};
    u.poverty_bracket_props = std::array<double, 7>{poverty_top, 0, 0, 0, 0, 0, 1.0 - poverty_top};
    u.income_per_capita = income;
    u.land = {100.0, 10.0 + poverty_top * 10.0, 20.0 + white / 10.0, 50.0};
    return u;
  }

  TEST_CASE("build_covariates applies the transforms before standardizing") {
    std::vector<RawUnitDemographics> raw = {raw_unit("a", 10000, 0.25, 80, 20),
                                            raw_unit("b", 20000, 0.64, 30, 90),
                                            raw_unit("c", 40000, 0.09, 50, 50)};
    CovariateOptions options;
    options.standardize = false;
    const auto plain = build_covariates(raw, options);
    CHECK(plain.d() == 6);
    CHECK(plain.Z(0, 3) == doctest::Approx(0.5));  // sqrt of poverty 0.25
    CHECK(plain.Z(1, 2) == doctest::Approx(std::log(20000.0)));
    CHECK(plain.transform_log[2]);
    CHECK(plain.transform_sqrt[4]);
    const auto standardized = build_covariates(raw);
    CHECK(standardized.standardized);
    CHECK((standardized.destandardize() - plain.Z).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("build_covariates names the unit with non-positive income") {
    std::vector<RawUnitDemographics> raw = {raw_unit("a", 10000, 0.25, 80, 20),
                                            raw_unit("bad", 0.0, 0.5, 30, 70)};
    try {
      build_covariates(raw);
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
  }

  TEST_CASE("exclusions") {
    CountMatrix counts(3, 2);
    counts << 1, 2, 3, 4, 5, 6;
    const auto panel = ArealPanel::from_counts({"a", "b", "c"}, {2006, 2007}, counts);
    std::vector<RawUnitDemographics> raw = {raw_unit("a", 1, 0.1, 1, 1), raw_unit("b", 2, 0.2, 1, 2),
                                            raw_unit("c", 3, 0.3, 2, 1)};
    const auto same = apply_exclusions(panel, raw, {});
    CHECK(same.panel.n() == 3);
    CHECK(same.excluded_ids.empty());

    raw[1].income_per_capita.reset();
    const std::vector<std::string> listed{"c"};
    const auto out = apply_exclusions(panel, raw, listed);
    CHECK(out.panel.n() == 1);
    CHECK(out.excluded_ids == std::vector<std::string>{"b", "c"});
    CHECK(out.raw.size() == 1);

    const std::vector<std::string> unknown{"zz"};
    CHECK_THROWS_AS(apply_exclusions(panel, raw, unknown), InputError);
    CHECK_THROWS_AS(exclude_units(panel, unknown), InputError);
  }

  TEST_CASE("panel invariants") {
    CountMatrix counts(2, 2);
    counts << 0, 5, 7, 1000;
    const auto panel = ArealPanel::from_counts({"x", "y"}, {2010, 2011}, counts);
    for (int i = 0; i < 2; ++i) {
      for (int k = 0; k < 2; ++k) CHECK(panel.y()(i, k) == ihs(counts(i, k)));
    }
    CHECK(ArealPanel::t_index(0) == 1);
    CHECK(panel.column_of(2011) == 1);
    CHECK_THROWS_AS(panel.column_of(1999), InputError);
    CountMatrix negative = counts;
    negative(0, 0) = -1;
    CHECK_THROWS_AS(ArealPanel::from_counts({"x", "y"}, {2010, 2011}, negative), InputError);
    CHECK_THROWS_AS(ArealPanel::from_counts({"x", "x"}, {2010, 2011}, counts), InputError);
  }

  TEST_CASE("crimes.csv round trip and missing rows") {
    const auto dir = testing::scratch_dir("crimes");
    CountMatrix counts(2, 3);
    counts << 0, 1, 2, 30, 40, 50;
    const auto panel = ArealPanel::from_counts({"b", "a"}, {2006, 2007, 2008}, counts);
    write_crimes_csv(dir / "crimes.csv", panel);
    const auto back = read_crimes_csv(dir / "crimes.csv");
    CHECK(back.periods() == std::vector<int>{2006, 2007, 2008});
    const int ia = *back.find_unit("a");
    CHECK((*back.counts())(ia, back.column_of(2006)) == 30);
    CHECK((*back.counts())(ia, back.column_of(2008)) == 50);

    std::ofstream(dir / "gap.csv") << "unit_id,year,count\na,2006,1\na,2007,2\nb,2006,3\n";
    CHECK_THROWS_AS(read_crimes_csv(dir / "gap.csv"), InputError);
    std::ofstream(dir / "neg.csv") << "unit_id,year,count\na,2006,-1\n";
    CHECK_THROWS_AS(read_crimes_csv(dir / "neg.csv"), InputError);
    std::ofstream(dir / "dup.csv") << "unit_id,year,count\na,2006,1\na,2006,1\n";
    CHECK_THROWS_AS(read_crimes_csv(dir / "dup.csv"), InputError);
  }

  TEST_CASE("raw covariates with an ethnicity mapping") {
    const auto dir = testing::scratch_dir("raw");
    std::ofstream(dir / "raw.csv")
        << "unit_id,pop_total,white,black,hispanic,asian,other,pov1,pov2,pov3,pov4,pov5,pov6,pov7,"
           "income,area_total,area_vacant,area_commercial,area_residential,eth_pacific\n"
        << "a,10,5,3,1,0,0,0.2,0.2,0.2,0.2,0.2,0,0,15000,100,5,10,40,1\n"
        << "b,12,2,6,2,1,0,0.1,0.1,0.1,0.1,0.1,0.25,0.25,,100,5,10,40,1\n";
    CHECK_THROWS_AS(read_covariates_raw_csv(dir / "raw.csv"), InputError);
    std::ofstream(dir / "map.csv") << "label,category\npacific,other\n";
    const auto raw = read_covariates_raw_csv(dir / "raw.csv", read_ethnicity_map(dir / "map.csv"));
    REQUIRE(raw.size() == 2);
    CHECK(raw[0].ethnic_counts[4] == 1.0);
    CHECK_FALSE(raw[1].income_per_capita.has_value());
    CHECK(has_missing_covariates(raw[1]));
  }
}
