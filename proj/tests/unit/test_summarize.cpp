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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "areltrend/error.hpp"
#include "areltrend/summarize.hpp"
#include "areltrend/synthgen.hpp"
#include "fixtures.hpp"

using namespace areltrend;

namespace {

ChainOutput constant_draws(int draws, int n, double value) {
  ChainOutput out;
  out.family = ModelFamily::GlobalShrinkage;
  out.alpha = Eigen::MatrixXd::Constant(draws, n, value);
  out.beta = Eigen::MatrixXd::Constant(draws, n, -value);
  out.gamma.resize(draws, 0);
  out.alpha0.assign(draws, 0.0);
  out.beta0.assign(draws, 0.0);
  out.sigma2.assign(draws, 1.0);
  return out;
}

std::vector<std::string> ids_of(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("u" + std::to_string(i));
  return ids;
}

UnitGeometry square(const std::string& id, double x, double y) {
  return {id, {{{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}, {x, y}}}, {}};
}

}  // namespace

TEST_SUITE("summarize") {
  TEST_CASE("quantile rule on 1..100") {
    std::vector<double> x(100);
    for (int k = 0; k < 100; ++k) x[k] = k + 1.0;
    // h = 99 p; x_(2) = 3, x_(3) = 4 (zero-based) for p = 0.025.
    CHECK(quantile_sorted(x, 0.025) == doctest::Approx(3.475).epsilon(1e-14));
    CHECK(quantile_sorted(x, 0.975) == doctest::Approx(97.525).epsilon(1e-14));
    CHECK(quantile_sorted(x, 0.0) == 1.0);
    CHECK(quantile_sorted(x, 1.0) == 100.0);
    CHECK(quantile_sorted(x, 0.5) == 50.5);

    ChainOutput draws = constant_draws(100, 1, 0.0);
    for (int k = 0; k < 100; ++k) draws.alpha(99 - k, 0) = k + 1.0;
    const auto s = summarize_units(draws, ids_of(1));
    CHECK(s.units[0].alpha.q025 == doctest::Approx(3.475));
    CHECK(s.units[0].alpha.q975 == doctest::Approx(97.525));
    CHECK(s.units[0].alpha.ci_width == doctest::Approx(94.05));
    CHECK(s.units[0].alpha.mean == doctest::Approx(50.5));
  }

  TEST_CASE("identical draws give zero-width intervals") {
    const auto s = summarize_units(constant_draws(150, 3, 1.7), ids_of(3));
    for (const auto& u : s.units) {
      CHECK(u.alpha.mean == 1.7);
      CHECK(u.alpha.ci_width == 0.0);
      CHECK(u.alpha.sd == 0.0);
      CHECK(u.beta.q025 == -1.7);
    }
  }

  TEST_CASE("too few draws") {
    CHECK_THROWS_AS(summarize_units(constant_draws(99, 2, 0.0), ids_of(2)), InputError);
  }

  TEST_CASE("significance is shift invariant") {
    Rng rng(6);
    ChainOutput draws = constant_draws(400, 6, 0.0);
    for (int s = 0; s < 400; ++s) {
      draws.alpha0[s] = 1.0 + 0.1 * rng.normal();
      for (int i = 0; i < 6; ++i) draws.alpha(s, i) = 0.6 + 0.2 * i + 0.15 * rng.normal();
    }
    const auto before = summarize_units(draws, ids_of(6));
    draws.alpha.array() += 5.0;
    for (auto& a : draws.alpha0) a += 5.0;
    const auto after = summarize_units(draws, ids_of(6));
    int flagged = 0;
    for (int i = 0; i < 6; ++i) {
      CHECK(before.units[i].alpha.significant == after.units[i].alpha.significant);
      flagged += before.units[i].alpha.significant;
    }
    CHECK(flagged > 0);
    CHECK(flagged < 6);
  }

  TEST_CASE("units without a slope effect are rarely flagged") {
    int flagged = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      SyntheticSpec spec;
      spec.seed = seed;
      spec.tau2_beta = 0.0;
      const auto data = simulate(spec);
      ModelConfig config;
      config.family = ModelFamily::SpatialCAR;
      config.chain.seed = seed;
      const auto run = run_model(data.exact, data.covariates, data.graph, config,
                                 std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});
      const auto s = summarize_units(run.merged, run.unit_ids);
      for (const auto& u : s.units) flagged += u.beta.significant;
      total += static_cast<int>(s.units.size());
    }
    CHECK(flagged <= 0.06 * total);
  }

  TEST_CASE("barrier thresholds are strict") {
    const AdjacencyGraph g({"a", "b", "c"}, {{0, 1}, {1, 2}});
    const std::vector<double> pa{0.61, 0.6};
    const auto report = make_barrier_report(g, pa, std::nullopt);
    CHECK(report.edges[0].flag_alpha);
    CHECK_FALSE(report.edges[1].flag_alpha);
    CHECK_FALSE(report.edges[0].p_beta.has_value());
    BarrierThresholds strict;
    strict.alpha = 0.7;
    CHECK_FALSE(make_barrier_report(g, pa, std::nullopt, strict).edges[0].flag_alpha);
    CHECK_THROWS_AS(make_barrier_report(g, std::nullopt, std::nullopt), IncompleteRunError);
  }

  TEST_CASE("barrier probabilities from draws") {
    ChainOutput::BorderDraws w(4, 2);
    w << 1, 0, 1, 1, 1, 0, 1, 0;
    const auto p = barrier_probabilities(w);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 0.75);
    ChainOutput draws = constant_draws(4, 3, 0.0);
    draws.family = ModelFamily::VariableBordersAlphaOnly;
    draws.w_alpha = w;
    const AdjacencyGraph g({"a", "b", "c"}, {{0, 1}, {1, 2}});
    const auto report = barrier_report(draws, g);
    CHECK_FALSE(report.edges[0].flag_alpha);
    CHECK(report.edges[1].flag_alpha);
    draws.family = ModelFamily::SpatialCAR;
    CHECK_THROWS_AS(barrier_report(draws, g), IncompleteRunError);
  }

  TEST_CASE("barrier probabilities are exchangeable under unit relabeling") {
    SyntheticSpec spec;
    spec.rows = 4;
    spec.cols = 4;
    spec.seed = 14;
    spec.gamma = Eigen::VectorXd::Constant(1, 0.3);
    spec.tau2_alpha = 0.05;
    spec.alpha_offset.assign(16, 0.0);
    spec.alpha_offset[0] = 2.5;
    const auto data = simulate(spec);
    ModelConfig config;
    config.family = ModelFamily::VariableBordersAlphaOnly;
    config.chain.n_iter = 4050;
    const std::vector<int> train{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

    auto probabilities = [&](const ArealPanel& panel, const CovariateMatrix& cov, const AdjacencyGraph& graph) {
      const auto run = run_model(panel, cov, graph, config, train);
      const auto p = barrier_probabilities(run.merged.w_alpha);
      std::map<std::pair<std::string, std::string>, double> by_pair;
      for (int e = 0; e < graph.edge_count(); ++e) {
        auto a = graph.unit_ids()[graph.edges()[e].i];
        auto b = graph.unit_ids()[graph.edges()[e].j];
        if (b < a) std::swap(a, b);
        by_pair[std::pair{a, b}] = p[e];
      }
      return by_pair;
    };
    std::vector<std::string> shuffled = data.graph.unit_ids();
    Rng rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto original = probabilities(data.exact, data.covariates, data.graph);
    const auto relabeled = probabilities(data.exact.select_units(shuffled), data.covariates.select_units(shuffled),
                                         data.graph.restricted_to(shuffled));
    REQUIRE(original.size() == relabeled.size());
    double worst = 0.0, largest = 0.0;
    for (const auto& [pair, p] : original) {
      worst = std::max(worst, std::abs(p - relabeled.at(pair)));
      largest = std::max(largest, p);
    }
    CHECK(largest > 0.5);
    CHECK(worst < 0.15);
  }

  TEST_CASE("extremes ranking and ties") {
    UnitSummaries s;
    for (const auto& [id, a] : std::vector<std::pair<std::string, double>>{
             {"d", 1.0}, {"b", 3.0}, {"a", 3.0}, {"c", -2.0}}) {
      UnitSummary u;
      u.unit_id = id;
      u.alpha.mean = a;
      u.beta.mean = -a;
      s.units.push_back(u);
    }
    const auto all = extremes(s, 4);
    CHECK(all.top_alpha == std::vector<int>{2, 1, 0, 3});
    CHECK(all.bottom_alpha == std::vector<int>{3, 0, 2, 1});
    CHECK(all.bottom_beta == std::vector<int>{2, 1, 0, 3});
    CHECK(extremes(s, 1).top_alpha == std::vector<int>{2});
    CHECK_THROWS_AS(extremes(s, 5), InputError);
  }

  TEST_CASE("planted extremes are recovered") {
    SyntheticSpec spec;
    spec.seed = 4;
    spec.alpha_offset.assign(100, 0.0);
    for (int i : {7, 42, 88}) spec.alpha_offset[i] = 4.0;
    for (int i : {13, 61}) spec.alpha_offset[i] = -4.0;
    const auto data = simulate(spec);
    ModelConfig config;
    config.family = ModelFamily::SpatialCAR;
    const auto run = run_model(data.exact, data.covariates, data.graph, config,
                               std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});
    const auto ex = extremes(summarize_units(run.merged, run.unit_ids), 3);
    const std::set<int> top(ex.top_alpha.begin(), ex.top_alpha.end());
    CHECK(top == std::set<int>{7, 42, 88});
    const std::set<int> bottom(ex.bottom_alpha.begin(), ex.bottom_alpha.begin() + 2);
    CHECK(bottom == std::set<int>{13, 61});
  }

  TEST_CASE("summary.csv round trip") {
    Rng rng(1);
    ChainOutput draws = constant_draws(120, 4, 0.0);
    for (Eigen::Index k = 0; k < draws.alpha.size(); ++k) draws.alpha.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < draws.beta.size(); ++k) draws.beta.data()[k] = 0.1 * rng.normal();
    const auto s = summarize_units(draws, ids_of(4));
    const auto dir = testing::scratch_dir("summary");
    write_summary_csv(dir / "summary.csv", s);
    const auto back = read_summary_csv(dir / "summary.csv");
    REQUIRE(back.units.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(back.units[i].unit_id == s.units[i].unit_id);
      CHECK(std::abs(back.units[i].alpha.q975 - s.units[i].alpha.q975) < 1e-12);
      CHECK(std::abs(back.units[i].beta.sd - s.units[i].beta.sd) < 1e-12);
      CHECK(back.units[i].beta.significant == s.units[i].beta.significant);
    }
    const auto header = testing::read_file(dir / "summary.csv");
    CHECK(header.rfind(
              "unit_id,alpha_mean,alpha_sd,alpha_q025,alpha_q975,alpha_ci_width,alpha_significant,"
              "beta_mean,beta_sd,beta_q025,beta_q975,beta_ci_width,beta_significant\n",
              0) == 0);
  }

  TEST_CASE("GeoJSON export") {
    Rng rng(2);
    ChainOutput draws = constant_draws(100, 3, 0.0);
    for (Eigen::Index k = 0; k < draws.alpha.size(); ++k) draws.alpha.data()[k] = rng.normal();
    const auto s = summarize_units(draws, ids_of(3));
    const std::vector<UnitGeometry> polygons{square("u0", 0, 0), square("u1", 1, 0), square("u2", 2, 1)};
    const AdjacencyGraph g(ids_of(3), {{0, 1}, {1, 2}});
    const auto dir = testing::scratch_dir("geojson_export");

    export_geojson(dir / "none.geojson", s, nullptr, polygons);
    const auto plain = nlohmann::json::parse(testing::read_file(dir / "none.geojson"));
    CHECK(plain["type"] == "FeatureCollection");
    REQUIRE(plain["features"].size() == 3);
    std::set<std::string> keys;
    for (const auto& [k, v] : plain["features"][0]["properties"].items()) keys.insert(k);
    const std::set<std::string> expected{
        "unit_id",    "alpha_mean", "alpha_sd", "alpha_q025", "alpha_q975", "alpha_ci_width",
        "alpha_significant", "beta_mean", "beta_sd", "beta_q025", "beta_q975", "beta_ci_width",
        "beta_significant"};
    CHECK(keys == expected);
    for (int i = 0; i < 3; ++i) {
      const auto& p = plain["features"][i]["properties"];
      CHECK(p["unit_id"] == s.units[i].unit_id);
      CHECK(std::abs(p["alpha_mean"].get<double>() - s.units[i].alpha.mean) < 1e-9);
      CHECK(std::abs(p["alpha_q025"].get<double>() - s.units[i].alpha.q025) < 1e-9);
      CHECK(p["alpha_significant"].get<bool>() == s.units[i].alpha.significant);
    }

    const auto empty = make_barrier_report(g, std::vector<double>{0.1, 0.2}, std::nullopt);
    export_geojson(dir / "empty.geojson", s, &empty, polygons);
    CHECK(nlohmann::json::parse(testing::read_file(dir / "empty.geojson"))["features"].size() == 3);

    const auto flagged = make_barrier_report(g, std::vector<double>{0.9, 0.7}, std::vector<double>{0.2, 0.55});
    export_geojson(dir / "barriers.geojson", s, &flagged, polygons);
    const auto doc = nlohmann::json::parse(testing::read_file(dir / "barriers.geojson"));
    REQUIRE(doc["features"].size() == 6);
    const auto& line = doc["features"][3];
    CHECK(line["properties"]["kind"] == "barrier");
    CHECK(line["properties"]["parameter"] == "alpha");
    CHECK(line["properties"]["unit_a"] == "u0");
    CHECK(line["properties"]["unit_b"] == "u1");
    CHECK(line["properties"]["probability"].get<double>() == doctest::Approx(0.9));
    CHECK(line["geometry"]["type"] == "LineString");
    // u1 and u2 touch at one corner: the centroid segment is used.
    const auto& corner = doc["features"][4]["geometry"]["coordinates"];
    CHECK(corner[0][0].get<double>() == doctest::Approx(1.5));
    CHECK(corner[1][1].get<double>() == doctest::Approx(1.5));
  }

  TEST_CASE("barriers.csv leaves fixed borders empty") {
    const AdjacencyGraph g({"a", "b"}, {{0, 1}});
    const auto report = make_barrier_report(g, std::vector<double>{0.65}, std::nullopt);
    const auto dir = testing::scratch_dir("barriers");
    write_barriers_csv(dir / "barriers.csv", report);
    CHECK(testing::read_file(dir / "barriers.csv") ==
          "edge,unit_a,unit_b,p_alpha,p_beta,flag_alpha,flag_beta\n0,a,b,0.65,,1,\n");
  }
}
