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

#include <Eigen/Dense>

#include "areltrend/error.hpp"
#include "areltrend/synthgen.hpp"
#include "fixtures.hpp"

using namespace areltrend;

TEST_SUITE("synthgen") {
  TEST_CASE("graph shapes") {
    SyntheticSpec spec;
    spec.rows = 3;
    spec.cols = 4;
    const auto grid = make_graph(spec);
    CHECK(grid.size() == 12);
    CHECK(grid.edge_count() == 3 * 3 + 2 * 4);
    CHECK(grid.unit_ids().front() == "u00");
    spec.shape = GraphShape::Cycle;
    spec.nodes = 4;
    const auto cycle = make_graph(spec);
    CHECK(cycle.edge_count() == 4);
    CHECK(cycle.edge_index(0, 3).has_value());
    spec.shape = GraphShape::Path;
    CHECK(make_graph(spec).edge_count() == 3);
    spec.shape = GraphShape::Custom;
    spec.custom_edges = {{0, 2}};
    CHECK(make_graph(spec).edge_count() == 1);
  }

  TEST_CASE("spec validation") {
    SyntheticSpec spec;
    spec.rho = 1.0;
    CHECK_THROWS_AS(spec.validate(), InputError);
    spec = {};
    spec.sigma2 = -1.0;
    CHECK_THROWS_AS(spec.validate(), InputError);
    spec = {};
    spec.barriers_alpha = {1000};
    CHECK_THROWS_AS(simulate(spec), InputError);
    spec = {};
    spec.alpha_offset = {1.0, 2.0};
    CHECK_THROWS_AS(simulate(spec), InputError);
    spec = {};
    spec.periods = 0;
    CHECK_THROWS_AS(spec.validate(), InputError);
  }

  TEST_CASE("simulation is deterministic and records the truth") {
    SyntheticSpec spec;
    spec.gamma = Eigen::VectorXd::Constant(2, 0.4);
    spec.barriers_alpha = {0, 5};
    const auto a = simulate(spec);
    const auto b = simulate(spec);
    CHECK(a.exact.y() == b.exact.y());
    CHECK(*a.counts.counts() == *b.counts.counts());
    CHECK(a.truth.gamma == spec.gamma);
    CHECK(a.truth.w_alpha[0] == 0);
    CHECK(a.truth.w_alpha[1] == 1);
    CHECK(a.truth.w_beta[0] == 1);
    CHECK(a.covariates.d() == 2);
    CHECK(a.exact.periods().front() == 2006);
    spec.seed = 2;
    CHECK(simulate(spec).exact.y() != a.exact.y());
  }

  TEST_CASE("counts back-transform the exact responses") {
    const auto data = simulate(SyntheticSpec{});
    const auto& counts = *data.counts.counts();
    for (int i = 0; i < data.exact.n(); ++i) {
      for (int k = 0; k < data.exact.periods_count(); ++k) {
        const double raw = std::round(std::sinh(data.exact.y()(i, k) + std::log(2.0)));
        CHECK(counts(i, k) == static_cast<std::int64_t>(std::max(0.0, raw)));
        CHECK(data.counts.y()(i, k) == ihs(counts(i, k)));
      }
    }
  }

  TEST_CASE("zero prior variance pins the coefficients") {
    SyntheticSpec spec;
    spec.tau2_alpha = 0.0;
    spec.tau2_beta = 0.0;
    const auto data = simulate(spec);
    CHECK((data.truth.alpha.array() == spec.alpha0).all());
    CHECK((data.truth.beta.array() == spec.beta0).all());
  }

  TEST_CASE("zero noise gives exactly linear units") {
    SyntheticSpec spec;
    spec.sigma2 = 0.0;
    spec.gamma = Eigen::VectorXd::Constant(1, 0.5);
    const auto data = simulate(spec);
    const auto& y = data.exact.y();
    for (int i = 0; i < data.exact.n(); ++i) {
      const double z = data.covariates.Z(i, 0) * 0.5;
      for (int k = 0; k < spec.periods; ++k) {
        CHECK(std::abs(y(i, k) - (z + data.truth.alpha[i] + data.truth.beta[i] * (k + 1))) < 1e-12);
      }
    }
  }

  TEST_CASE("CAR draws have covariance tau2 Sigma") {
    SyntheticSpec spec;
    spec.rows = 3;
    spec.cols = 3;
    const auto graph = make_graph(spec);
    const double tau2 = 0.5;
    const auto precision = laplacian_precision(graph, 0.9);
    const Eigen::MatrixXd sigma = tau2 * oracle::precision(graph, {}, 0.9).inverse();
    Rng rng(99);
    const int m = 10000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 9);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(9);
    std::vector<Eigen::VectorXd> draws;
    for (int s = 0; s < m; ++s) {
      draws.push_back(draw_car(precision, 1.5, tau2, rng));
      mean += draws.back();
    }
    mean /= m;
    for (const auto& d : draws) sum += (d - mean) * (d - mean).transpose();
    const Eigen::MatrixXd empirical = sum / (m - 1);
    for (int i = 0; i < 9; ++i) {
      CHECK(std::abs(mean[i] - 1.5) < 4.0 * std::sqrt(sigma(i, i) / m));
      for (int j = 0; j < 9; ++j) {
        // Entrywise, relative to the entry's scale sqrt(S_ii S_jj).
        CHECK(std::abs(empirical(i, j) - sigma(i, j)) < 0.05 * std::sqrt(sigma(i, i) * sigma(j, j)));
      }
    }
  }

  TEST_CASE("oracle precision and log determinant") {
    const AdjacencyGraph two({"a", "b"}, {{0, 1}});
    const Eigen::MatrixXd q = oracle::precision(two, {}, 0.5);
    CHECK(oracle::log_det(q) == doctest::Approx(std::log(0.75)).epsilon(1e-14));
    Rng rng(5);
    const auto g = testing::random_graph(9, 6, rng);
    std::vector<std::uint8_t> w(g.edge_count());
    for (auto& x : w) x = rng.bernoulli(0.6) ? 1 : 0;
    CHECK((oracle::precision(g, w, 0.8) - Eigen::MatrixXd(car_precision(g, w, 0.8))).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((oracle::precision(g, {}, 0.3) - Eigen::MatrixXd(laplacian_precision(g, 0.3))).cwiseAbs().maxCoeff() ==
          0.0);
  }

  TEST_CASE("enumeration oracle bounds") {
    SyntheticSpec spec;
    spec.shape = GraphShape::Cycle;
    spec.nodes = 8;
    const auto cycle = make_graph(spec);
    const Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
    CHECK_THROWS_AS(oracle::enumerate_w_posterior(cycle, v, 0.0, 1.0, 0.5, 0.9), InputError);
    spec.nodes = 4;
    const auto small = make_graph(spec);
    const auto table = oracle::enumerate_w_posterior(small, Eigen::VectorXd::Zero(4), 0.0, 1.0, 0.5, 0.9);
    CHECK(table.log_density.size() == 16);
    // Equal values: no data evidence beyond the determinant term.
    for (int e = 0; e < 4; ++e) CHECK(table.marginal(e) > 0.5);
  }
}
