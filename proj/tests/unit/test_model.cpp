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
#include "areltrend/model.hpp"
#include "areltrend/sampler.hpp"
#include "areltrend/synthgen.hpp"
#include "fixtures.hpp"

using namespace areltrend;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("family names round trip") {
    for (auto family : {ModelFamily::GlobalTrend, ModelFamily::NoShrinkage, ModelFamily::GlobalShrinkage,
                        ModelFamily::SpatialCAR, ModelFamily::VariableBorders,
                        ModelFamily::VariableBordersAlphaOnly}) {
      CHECK(parse_model_family(cli_name(family)) == family);
      CHECK(parse_model_family(to_string(family)) == family);
    }
    CHECK_THROWS_AS(parse_model_family("kriging"), InputError);
    CHECK_FALSE(is_bayesian(ModelFamily::NoShrinkage));
    CHECK(has_variable_alpha(ModelFamily::VariableBordersAlphaOnly));
    CHECK_FALSE(has_variable_beta(ModelFamily::VariableBordersAlphaOnly));
  }

  TEST_CASE("inverse gamma from a mean and CV") {
    const auto unit = inverse_gamma_from_mean(1.0);
    CHECK(unit.shape == doctest::Approx(102.0).epsilon(1e-15));
    CHECK(unit.rate == doctest::Approx(101.0).epsilon(1e-15));
    CHECK(unit.mean() == doctest::Approx(1.0).epsilon(1e-15));
    // SD / mean of IG(a, b) is 1 / sqrt(a - 2).
    CHECK(1.0 / std::sqrt(unit.shape - 2.0) == doctest::Approx(0.1));
    CHECK(inverse_gamma_from_mean(0.05).rate == doctest::Approx(5.05).epsilon(1e-14));
    CHECK_THROWS_AS(inverse_gamma_from_mean(0.0), NumericalError);
  }

  TEST_CASE("phi prior switch") {
    ModelConfig config;
    CHECK(config.phi_beta_prior().a == 9.0);
    CHECK(config.phi_beta_prior().b == 1.0);
    config.phi_prior = PhiPrior::MostlyBarriers;
    CHECK(config.phi_beta_prior().a == 1.0);
    CHECK(config.phi_beta_prior().b == 9.0);
  }

  TEST_CASE("config validation") {
    ModelConfig config;
    CHECK_NOTHROW(config.validate());
    config.chain.burn_in = config.chain.n_iter;
    CHECK_THROWS_AS(config.validate(), InputError);
    config = {};
    config.chain.thin = 0;
    CHECK_THROWS_AS(config.validate(), InputError);
    config = {};
    config.prior_cv = -1.0;
    CHECK_THROWS_AS(config.validate(), InputError);
  }

  TEST_CASE("joint prior precision by family") {
    const auto f = testing::path_fixture();
    auto state = f.state;
    const auto global = build_joint_prior(ModelFamily::GlobalShrinkage, f.graph, state, 1);
    Eigen::VectorXd diag(9);
    diag << 1.0 / 1.5, Eigen::VectorXd::Constant(4, 1.0 / 0.4), Eigen::VectorXd::Constant(4, 1.0 / 0.02);
    CHECK((dense(global.omega0) - Eigen::MatrixXd(diag.asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(global.theta0[0] == 0.0);
    CHECK(global.theta0[1] == 1.05);
    CHECK(global.theta0[8] == 0.01);

    state.rho = 0.0;
    const auto car0 = build_joint_prior(ModelFamily::SpatialCAR, f.graph, state, 1);
    CHECK((dense(car0.omega0) - dense(global.omega0)).cwiseAbs().maxCoeff() == 0.0);

    state.rho = 0.7;
    state.w_alpha.assign(3, 0);
    state.w_beta.assign(3, 0);
    const auto off = build_joint_prior(ModelFamily::VariableBorders, f.graph, state, 1);
    Eigen::MatrixXd scaled = dense(global.omega0);
    scaled.bottomRightCorner(8, 8) *= 0.3;
    CHECK((dense(off.omega0) - scaled).cwiseAbs().maxCoeff() < 1e-13);

    const auto flat = build_joint_prior(ModelFamily::GlobalShrinkage, f.graph, state, 1, true);
    CHECK(dense(flat.omega0)(0, 0) == 0.0);
  }

  TEST_CASE("joint prior is linear in the inverse variances") {
    const auto f = testing::path_fixture();
    auto state = f.state;
    const auto base = dense(build_joint_prior(ModelFamily::VariableBorders, f.graph, state, 1).omega0);
    state.tau2_alpha *= 2.0;
    const auto doubled = dense(build_joint_prior(ModelFamily::VariableBorders, f.graph, state, 1).omega0);
    CHECK((doubled.block(1, 1, 4, 4) - 0.5 * base.block(1, 1, 4, 4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((doubled.bottomRightCorner(4, 4) - base.bottomRightCorner(4, 4)).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::LLT<Eigen::MatrixXd> llt(base);
    CHECK(llt.info() == Eigen::Success);
  }

  TEST_CASE("alpha-only borders keep the base beta block") {
    const auto f = testing::path_fixture();
    Rng rng(2);
    for (int rep = 0; rep < 10; ++rep) {
      auto state = f.state;
      state.rho = rng.uniform() * 0.95;
      for (auto& w : state.w_alpha) w = rng.bernoulli(0.5) ? 1 : 0;
      state.w_beta.clear();
      const auto a = dense(build_joint_prior(ModelFamily::VariableBordersAlphaOnly, f.graph, state, 1).omega0);
      const auto c = dense(build_joint_prior(ModelFamily::SpatialCAR, f.graph, state, 1).omega0);
      CHECK((a.bottomRightCorner(4, 4) - c.bottomRightCorner(4, 4)).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("noninformative conditional shapes agree with grid integration") {
    // sigma^2 | rest has density ~ p(s2) s2^(-N/2) exp(-RSS / (2 s2)); integrate
    // E[1 / s2] numerically and compare with shape / rate of the IG used.
    const auto f = testing::path_fixture();
    ModelConfig config;
    config.family = ModelFamily::SpatialCAR;
    config.prior_mode = PriorMode::Noninformative;
    const auto prior = noninformative_prior(config);
    const DesignMatrix design(f.y, f.Z, f.columns);
    const auto sa = coefficient_precision(config.family, f.graph, f.state, true);
    const auto sb = coefficient_precision(config.family, f.graph, f.state, false);
    const auto laws = variance_conditionals(f.state, design, prior, sa, sb);
    const double rss = design.residual_sum_squares(f.state);
    const int N = design.observations();

    auto grid_precision_mean = [](auto log_density) {
      // Integrate on log scale: x = e^u, dx = x du.
      double z = 0.0, m = 0.0;
      for (double u = -30.0; u < 30.0; u += 1e-4) {
        const double x = std::exp(u);
        const double w = std::exp(log_density(x) + u);
        z += w;
        m += w / x;
      }
      return m / z;
    };
    const double sigma_precision = grid_precision_mean([&](double s2) {
      return -std::log(s2) - 0.5 * N * std::log(s2) - rss / (2.0 * s2);
    });
    CHECK(laws.sigma.shape == doctest::Approx(0.5 * N));
    CHECK(laws.sigma.shape / laws.sigma.rate == doctest::Approx(sigma_precision).epsilon(1e-6));

    const Eigen::VectorXd da = f.state.alpha.array() - f.state.alpha0;
    const double qa = da.dot(sa * da);
    const double tau_precision = grid_precision_mean([&](double t2) {
      return -0.5 * std::log(t2) - 0.5 * 4 * std::log(t2) - qa / (2.0 * t2);
    });
    CHECK(laws.alpha.shape == doctest::Approx(4 / 2.0 - 0.5));
    CHECK(laws.alpha.shape / laws.alpha.rate == doctest::Approx(tau_precision).epsilon(1e-6));
  }

  TEST_CASE("empirical Bayes tuning from the no-shrinkage fit") {
    SyntheticSpec spec;
    spec.rows = 5;
    spec.cols = 5;
    spec.gamma = Eigen::VectorXd::Constant(2, 0.3);
    const auto data = simulate(spec);
    const std::vector<int> train{0, 1, 2, 3, 4, 5, 6, 7, 8};
    const auto hyper = tune_empirical_bayes(data.exact, data.covariates, train);
    CHECK(hyper.sigma.shape == doctest::Approx(102.0));
    CHECK(hyper.sigma.mean() > 0.0);
    CHECK(hyper.sigma.mean() == doctest::Approx(spec.sigma2).epsilon(0.3));
    CHECK(hyper.gamma.mean() > 0.0);
  }
}
