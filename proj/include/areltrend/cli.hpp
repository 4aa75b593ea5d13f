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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "areltrend/areal_data.hpp"
#include "areltrend/graph.hpp"
#include "areltrend/model.hpp"

namespace areltrend::cli {

inline constexpr const char* kVersion = "0.1.0";

// Input files shared by fit and evaluate.
struct InputArgs {
  std::filesystem::path crimes;
  std::optional<std::filesystem::path> covariates;      // precomputed covariates.csv
  std::optional<std::filesystem::path> covariates_raw;  // raw demographics
  std::optional<std::filesystem::path> ethnicity_map;
  std::optional<std::filesystem::path> exclusions;
  std::optional<std::filesystem::path> edges;
  std::optional<std::filesystem::path> polygons;
};

// Model settings. Unset fields fall back to the --config file, then to the
// built-in defaults.
struct ModelArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> model;
  std::optional<int> iters;
  std::optional<int> burnin;
  std::optional<int> thin;
  std::optional<int> chains;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> prior;      // eb | noninf
  std::optional<std::string> phi_prior;  // connected | barriers
  bool two_stage = false;
};

struct FitArgs {
  InputArgs inputs;
  ModelArgs model;
  std::filesystem::path out;
  std::optional<std::string> holdout;  // period label or "none"; default: last period
  bool save_draws = false;
  int jobs = 0;
};

struct EvaluateArgs {
  InputArgs inputs;
  ModelArgs model;
  std::filesystem::path out;
  std::vector<std::string> models;  // empty: every family except variable-borders-alpha
  std::optional<int> holdout;
  bool cv = false;
  int jobs = 0;
};

struct SummarizeArgs {
  std::filesystem::path fit_dir;
  std::optional<std::filesystem::path> out;  // default: fit_dir
  std::optional<std::filesystem::path> polygons;
  bool barriers = false;
  double alpha_threshold = 0.6;
  double beta_threshold = 0.5;
  int top = 50;
};

struct SimulateArgs {
  std::filesystem::path out;
  std::string shape = "grid";  // grid | cycle | path
  int rows = 10;
  int cols = 10;
  int nodes = 4;
  double alpha0 = 2.0;
  double beta0 = -0.05;
  double tau2_alpha = 0.5;
  double tau2_beta = 0.003;
  double sigma2 = 0.08;
  double rho = 0.9;
  std::vector<double> gamma;
  std::vector<int> barriers_alpha;
  std::vector<int> barriers_beta;
  int periods = 10;
  int first_period = 2006;
  std::uint64_t seed = 1;
};

struct ContiguityArgs {
  std::filesystem::path polygons;
  std::filesystem::path out;
  double snap = kDefaultSnapTolerance;
};

struct BuildCovariatesArgs {
  std::filesystem::path crimes;
  std::filesystem::path covariates_raw;
  std::optional<std::filesystem::path> ethnicity_map;
  std::optional<std::filesystem::path> exclusions;
  std::filesystem::path out;
};

// Each command throws areltrend::Error subclasses; run() maps them to exit codes.
void cmd_fit(const FitArgs& args);
void cmd_evaluate(const EvaluateArgs& args);
void cmd_summarize(const SummarizeArgs& args);
void cmd_simulate(const SimulateArgs& args);
void cmd_contiguity(const ContiguityArgs& args);
void cmd_build_covariates(const BuildCovariatesArgs& args);

// Defaults, then the --config JSON file, then explicit flags.
ModelConfig resolve_config(const ModelArgs& args);

// Panel, covariates and (optional) graph aligned on the retained units.
struct LoadedInputs {
  ArealPanel panel;
  CovariateMatrix covariates;
  std::optional<AdjacencyGraph> graph;
  std::vector<std::string> excluded_ids;
  std::vector<std::filesystem::path> files;
};
LoadedInputs load_inputs(const InputArgs& args);

// Hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& path);

// Reads ARELTREND_LOG (trace, debug, info, warn, error, off; default warn).
void configure_logging();

// Parses argv, runs the subcommand and returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace areltrend::cli
