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

#include "areltrend/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <boost/math/distributions/fisher_f.hpp>
#include <spdlog/spdlog.h>

#include "areltrend/error.hpp"
#include "areltrend/sampler.hpp"

namespace areltrend {

double FitResult::predict(const Eigen::MatrixXd& Z, int unit, int column) const {
  double value = alpha(unit) + beta(unit) * ArealPanel::t_index(column);
  if (gamma.size() > 0) value += Z.row(unit).dot(gamma);
  return value;
}

Eigen::MatrixXd FitResult::predictions(const Eigen::MatrixXd& Z, int periods) const {
  Eigen::MatrixXd out(alpha.size(), periods);
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    for (int k = 0; k < periods; ++k) out(i, k) = predict(Z, static_cast<int>(i), k);
  }
  return out;
}

namespace {

void check_inputs(const ArealPanel& panel, const CovariateMatrix& covariates,
                  std::span<const int> columns) {
  if (covariates.n() != panel.n()) {
    throw DimensionError("covariates have " + std::to_string(covariates.n()) + " units, panel has " +
                         std::to_string(panel.n()));
  }
  if (columns.empty()) throw InputError("no training periods");
  for (const int c : columns) {
    if (c < 0 || c >= panel.periods_count()) throw InputError("period column out of range");
  }
}

// Least squares with a rank check; throws NumericalError when X is singular.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const char* what) {
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    throw NumericalError(std::string("singular design in ") + what);
  }
  return qr.solve(y);
}

}  // namespace

NoShrinkageFit fit_no_shrinkage(const ArealPanel& panel, const CovariateMatrix& covariates,
                                std::span<const int> train_columns) {
  check_inputs(panel, covariates, train_columns);
  const int n = panel.n();
  const int d = covariates.d();
  const int T = static_cast<int>(train_columns.size());
  if (T < 2) {
    throw NumericalError("singular design: per-unit slopes need at least two training periods");
  }
  const Eigen::MatrixXd& y = panel.y();

  // Stage one: pooled y on (1, z). The covariates are static, so this equals
  // the regression of the unit means.
  Eigen::VectorXd unit_mean(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (const int c : train_columns) s += y(i, c);
    unit_mean(i) = s / T;
  }
  Eigen::MatrixXd A(n, 1 + d);
  A.col(0).setOnes();
  if (d > 0) A.rightCols(d) = covariates.Z;
  const Eigen::VectorXd coef = least_squares(A, unit_mean, "the stage-one covariate regression");

  NoShrinkageFit out;
  out.stage1_intercept = coef(0);
  out.stage1_gamma = coef.tail(d);

  // Stage two: per-unit residual lines on (1, t).
  double t_bar = 0.0;
  for (const int c : train_columns) t_bar += ArealPanel::t_index(c);
  t_bar /= T;
  double s_tt = 0.0;
  for (const int c : train_columns) {
    const double dt = ArealPanel::t_index(c) - t_bar;
    s_tt += dt * dt;
  }
  out.fit.family = ModelFamily::NoShrinkage;
  out.fit.gamma = out.stage1_gamma;
  out.fit.alpha.resize(n);
  out.fit.beta.resize(n);
  out.unit_intercepts.resize(n);
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double offset = coef(0) + (d > 0 ? covariates.Z.row(i).dot(out.stage1_gamma) : 0.0);
    const double r_bar = unit_mean(i) - offset;
    double s_tr = 0.0;
    for (const int c : train_columns) s_tr += (ArealPanel::t_index(c) - t_bar) * (y(i, c) - offset - r_bar);
    const double b = s_tr / s_tt;
    const double a = r_bar - b * t_bar;
    out.unit_intercepts(i) = a;
    out.fit.alpha(i) = coef(0) + a;
    out.fit.beta(i) = b;
    for (const int c : train_columns) {
      const double e = y(i, c) - offset - a - b * ArealPanel::t_index(c);
      rss += e * e;
    }
  }
  out.rss = rss;
  out.observations = n * T;
  out.residual_dof = n * T - 2 * n;
  return out;
}

FitResult fit_ols(const ArealPanel& panel, const CovariateMatrix& covariates, ModelFamily family,
                  std::span<const int> train_columns) {
  if (family == ModelFamily::NoShrinkage) {
    return fit_no_shrinkage(panel, covariates, train_columns).fit;
  }
  if (family != ModelFamily::GlobalTrend) {
    throw InputError("fit_ols supports GlobalTrend and NoShrinkage only");
  }
  check_inputs(panel, covariates, train_columns);
  const int n = panel.n();
  const int d = covariates.d();
  const int T = static_cast<int>(train_columns.size());
  Eigen::MatrixXd X(n * T, 2 + d);
  Eigen::VectorXd y(n * T);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < T; ++k) {
      const int row = i * T + k;
      X(row, 0) = 1.0;
      if (d > 0) X.row(row).segment(1, d) = covariates.Z.row(i);
      X(row, 1 + d) = ArealPanel::t_index(train_columns[k]);
      y(row) = panel.y()(i, train_columns[k]);
    }
  }
  const Eigen::VectorXd coef = least_squares(X, y, "the global trend regression");
  FitResult fit;
  fit.family = family;
  fit.gamma = coef.segment(1, d);
  fit.alpha = Eigen::VectorXd::Constant(n, coef(0));
  fit.beta = Eigen::VectorXd::Constant(n, coef(1 + d));
  return fit;
}

FTestResult f_test_units(const ArealPanel& panel, const CovariateMatrix& covariates,
                         std::span<const int> train_columns) {
  const int n = panel.n();
  const int d = covariates.d();
  const int N = n * static_cast<int>(train_columns.size());
  FTestResult out;
  out.df_numerator = 2 * n - (d + 2);
  out.df_denominator = N - 2 * n;
  if (out.df_numerator <= 0 || out.df_denominator <= 0) {
    throw InputError("models are not nested with positive degrees of freedom");
  }
  const FitResult restricted = fit_ols(panel, covariates, ModelFamily::GlobalTrend, train_columns);
  const auto full = fit_no_shrinkage(panel, covariates, train_columns);
  double rss_r = 0.0;
  for (int i = 0; i < n; ++i) {
    for (const int c : train_columns) {
      const double e = panel.y()(i, c) - restricted.predict(covariates.Z, i, c);
      rss_r += e * e;
    }
  }
  out.rss_restricted = rss_r;
  out.rss_full = full.rss;
  const double gain = rss_r - full.rss;
  const double scale = std::max(1.0, rss_r);
  if (gain <= 1e-12 * scale) {
    out.f = 0.0;
    out.p_value = 1.0;
    return out;
  }
  if (full.rss <= 0.0) {
    out.f = std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
    return out;
  }
  out.f = (gain / out.df_numerator) / (full.rss / out.df_denominator);
  const boost::math::fisher_f_distribution<double> dist(out.df_numerator, out.df_denominator);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.f));
  return out;
}

double mse(const ArealPanel& panel, const CovariateMatrix& covariates, const FitResult& fit,
           std::span<const int> target_columns) {
  if (target_columns.empty()) throw InputError("no target periods");
  for (const int c : target_columns) {
    if (c < 0 || c >= panel.periods_count()) throw InputError("target period missing from panel");
  }
  if (fit.alpha.size() != panel.n() || fit.beta.size() != panel.n()) {
    throw DimensionError("fit does not match the panel");
  }
  double total = 0.0;
  for (int i = 0; i < panel.n(); ++i) {
    for (const int c : target_columns) {
      const double e = panel.y()(i, c) - fit.predict(covariates.Z, i, c);
      total += e * e;
    }
  }
  return total / (static_cast<double>(panel.n()) * target_columns.size());
}

FitResult posterior_mean_fit(const PosteriorRun& run) {
  const auto& m = run.merged;
  if (m.draws() == 0) throw IncompleteRunError("posterior run has no draws");
  FitResult fit;
  fit.family = run.config.family;
  fit.gamma = m.gamma.colwise().mean().transpose();
  fit.alpha = m.alpha.colwise().mean().transpose();
  fit.beta = m.beta.colwise().mean().transpose();
  return fit;
}

FitResult fit_model(const ArealPanel& panel, const CovariateMatrix& covariates,
                    const AdjacencyGraph* graph, const ModelConfig& config,
                    std::span<const int> train_columns) {
  if (!is_bayesian(config.family)) {
    return fit_ols(panel, covariates, config.family, train_columns);
  }
  if (graph == nullptr) {
    if (has_spatial_prior(config.family)) {
      throw DimensionError(std::string(cli_name(config.family)) + " needs an adjacency graph");
    }
    const AdjacencyGraph empty(panel.unit_ids(), {});
    return posterior_mean_fit(run_model(panel, covariates, empty, config, train_columns));
  }
  return posterior_mean_fit(run_model(panel, covariates, *graph, config, train_columns));
}

std::vector<int> training_columns(int periods, int holdout_column) {
  std::vector<int> out;
  for (int c = 0; c < periods; ++c) {
    if (c != holdout_column) out.push_back(c);
  }
  return out;
}

CvResult mse_cv(const ArealPanel& panel, const CovariateMatrix& covariates,
                const AdjacencyGraph* graph, const ModelConfig& config) {
  const int T = panel.periods_count();
  if (T < 2) throw InputError("cross-validation needs at least two periods");
  CvResult out;
  out.fold_periods = panel.periods();
  out.fold_mse.assign(T, 0.0);
  std::vector<std::exception_ptr> errors(T);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < T; ++k) {
    try {
      try {
        const auto train = training_columns(T, k);
        const FitResult fit = fit_model(panel, covariates, graph, config, train);
        const int target[] = {k};
        out.fold_mse[k] = mse(panel, covariates, fit, target);
      } catch (...) {
        rethrow_with_context("cross-validation fold " + std::to_string(panel.periods()[k]));
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double total = 0.0;
  for (const double v : out.fold_mse) total += v;
  out.mse_cv = total / T;
  return out;
}

ComparisonTable compare_models(const ArealPanel& panel, const CovariateMatrix& covariates,
                               const AdjacencyGraph* graph, std::span<const ModelFamily> families,
                               const ModelConfig& config, const EvaluationOptions& options) {
  if (families.empty()) throw InputError("no model families requested");
  const int T = panel.periods_count();
  if (T < 2) throw InputError("evaluation needs at least two periods");
  const int holdout = options.holdout_period ? panel.column_of(*options.holdout_period) : T - 1;
  const auto train = training_columns(T, holdout);
  const int in_sample = train.back();

  ComparisonTable table;
  table.holdout_period = panel.periods()[holdout];
  table.in_sample_period = panel.periods()[in_sample];
  table.rows.resize(families.size());

  const int jobs = static_cast<int>(families.size());
  std::vector<std::exception_ptr> errors(jobs);
#pragma omp parallel for schedule(dynamic, 1)
  for (int f = 0; f < jobs; ++f) {
    try {
      try {
        ModelConfig cfg = config;
        cfg.family = families[f];
        auto& row = table.rows[f];
        row.family = families[f];
        const FitResult fit = fit_model(panel, covariates, graph, cfg, train);
        const int in_cols[] = {in_sample};
        const int out_cols[] = {holdout};
        row.mse_in = mse(panel, covariates, fit, in_cols);
        row.mse_out = mse(panel, covariates, fit, out_cols);
        // A single global slope has no spatial variation to measure.
        if (graph != nullptr && graph->edge_count() > 0 && families[f] != ModelFamily::GlobalTrend) {
          const std::vector<double> b(fit.beta.data(), fit.beta.data() + fit.beta.size());
          row.moran_beta = morans_i(b, *graph).statistic;
        }
        if (options.cross_validate) row.cv = mse_cv(panel, covariates, graph, cfg);
        spdlog::info("{}: MSE_in {:.4f}, MSE_out {:.4f}", to_string(families[f]), row.mse_in,
                     row.mse_out);
      } catch (...) {
        rethrow_with_context(std::string(to_string(families[f])));
      }
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const auto base = std::find_if(table.rows.begin(), table.rows.end(), [](const ComparisonRow& r) {
    return r.family == ModelFamily::NoShrinkage;
  });
  if (base != table.rows.end()) {
    const double ref = base->mse_out;
    for (auto& row : table.rows) row.pct_change = 100.0 * (row.mse_out - ref) / ref;
  }
  return table;
}

}  // namespace areltrend
