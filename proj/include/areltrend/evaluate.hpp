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

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "areltrend/areal_data.hpp"
#include "areltrend/graph.hpp"
#include "areltrend/model.hpp"

namespace areltrend {

struct PosteriorRun;

// Point estimates of one fitted model. Predictions always follow
// y_hat_it = z_i'gamma + alpha_i + beta_i t; global-trend fits store the
// common intercept and slope in every alpha_i / beta_i.
struct FitResult {
  ModelFamily family = ModelFamily::NoShrinkage;
  Eigen::VectorXd gamma;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  double predict(const Eigen::MatrixXd& Z, int unit, int column) const;
  Eigen::MatrixXd predictions(const Eigen::MatrixXd& Z, int periods) const;
};

struct NoShrinkageFit {
  FitResult fit;
  double stage1_intercept = 0.0;
  Eigen::VectorXd stage1_gamma;
  Eigen::VectorXd unit_intercepts;  // stage-two intercepts, before adding the stage-one intercept
  double rss = 0.0;
  int observations = 0;
  int residual_dof = 0;  // N - 2n
};

// Two-stage no-shrinkage fit: y on (1, z), then per-unit residuals on (1, t).
NoShrinkageFit fit_no_shrinkage(const ArealPanel& panel, const CovariateMatrix& covariates,
                                std::span<const int> train_columns);

// Ordinary least squares for GlobalTrend or NoShrinkage. Throws NumericalError
// on a singular design (e.g. per-unit slopes with one training period).
FitResult fit_ols(const ArealPanel& panel, const CovariateMatrix& covariates, ModelFamily family,
                  std::span<const int> train_columns);

struct FTestResult {
  double f = 0.0;
  double p_value = 1.0;
  int df_numerator = 0;
  int df_denominator = 0;
  double rss_restricted = 0.0;
  double rss_full = 0.0;
};

// Nested F-test of GlobalTrend against per-unit intercepts and slopes.
FTestResult f_test_units(const ArealPanel& panel, const CovariateMatrix& covariates,
                         std::span<const int> train_columns);

// Mean over units (and target columns) of (y - y_hat)^2 on the IHS scale.
double mse(const ArealPanel& panel, const CovariateMatrix& covariates, const FitResult& fit,
           std::span<const int> target_columns);

// Posterior means of gamma, alpha and beta.
FitResult posterior_mean_fit(const PosteriorRun& run);

// Fits any family. Bayesian families report posterior means.
FitResult fit_model(const ArealPanel& panel, const CovariateMatrix& covariates,
                    const AdjacencyGraph* graph, const ModelConfig& config,
                    std::span<const int> train_columns);

struct CvResult {
  double mse_cv = 0.0;
  std::vector<int> fold_periods;
  std::vector<double> fold_mse;
};

// Leave-one-period-out cross-validation.
CvResult mse_cv(const ArealPanel& panel, const CovariateMatrix& covariates,
                const AdjacencyGraph* graph, const ModelConfig& config);

struct ComparisonRow {
  ModelFamily family = ModelFamily::NoShrinkage;
  double mse_in = 0.0;
  double mse_out = 0.0;
  std::optional<double> pct_change;  // vs NoShrinkage; requires a NoShrinkage row
  std::optional<CvResult> cv;
  std::optional<double> moran_beta;  // Moran's I of the estimated slopes
};

struct ComparisonTable {
  int holdout_period = 0;
  int in_sample_period = 0;
  std::vector<ComparisonRow> rows;
};

struct EvaluationOptions {
  std::optional<int> holdout_period;  // default: the last period
  bool cross_validate = false;
};

// Fits every family on the same split with the same seed policy. Families and
// cross-validation folds run concurrently.
ComparisonTable compare_models(const ArealPanel& panel, const CovariateMatrix& covariates,
                               const AdjacencyGraph* graph, std::span<const ModelFamily> families,
                               const ModelConfig& config, const EvaluationOptions& options = {});

// Every column except `holdout_column`.
std::vector<int> training_columns(int periods, int holdout_column);

}  // namespace areltrend
