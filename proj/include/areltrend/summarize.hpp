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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "areltrend/graph.hpp"
#include "areltrend/sampler.hpp"

namespace areltrend {

inline constexpr int kMinSummaryDraws = 100;

// Empirical quantile by linear interpolation between order statistics:
// h = (m - 1) p, q = x_(floor h) + (h - floor h) (x_(floor h + 1) - x_(floor h)).
double quantile_sorted(std::span<const double> sorted, double p);

struct ParameterSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ci_width = 0.0;
  bool significant = false;  // the 95% interval excludes the global mean
};

struct UnitSummary {
  std::string unit_id;
  ParameterSummary alpha;
  ParameterSummary beta;
};

struct UnitSummaries {
  double alpha0_mean = 0.0;
  double beta0_mean = 0.0;
  std::vector<UnitSummary> units;
};

// Per-unit summaries of alpha and beta. Significance compares each interval
// with the posterior mean of alpha0 (resp. beta0). Throws InputError with
// fewer than kMinSummaryDraws draws.
UnitSummaries summarize_units(const ChainOutput& draws, std::span<const std::string> unit_ids);

struct BarrierThresholds {
  double alpha = 0.6;
  double beta = 0.5;
};

struct EdgeBarrier {
  int edge = 0;
  std::string unit_a;
  std::string unit_b;
  std::optional<double> p_alpha;  // posterior P(w = 0); empty when W^alpha is fixed
  std::optional<double> p_beta;
  bool flag_alpha = false;  // p_alpha > threshold
  bool flag_beta = false;
};

struct BarrierReport {
  BarrierThresholds thresholds;
  std::vector<EdgeBarrier> edges;  // one per base edge, in edge order
};

// Throws IncompleteRunError for a family with fixed borders.
BarrierReport barrier_report(const ChainOutput& draws, const AdjacencyGraph& graph,
                             const BarrierThresholds& thresholds = {});

struct ExtremeUnits {
  std::vector<int> top_alpha;  // unit indices, largest mean first
  std::vector<int> bottom_alpha;
  std::vector<int> top_beta;
  std::vector<int> bottom_beta;
};

// Report from per-edge probabilities already computed (e.g. read back from a
// fit directory). Throws IncompleteRunError when both are empty.
BarrierReport make_barrier_report(const AdjacencyGraph& graph,
                                  const std::optional<std::vector<double>>& p_alpha,
                                  const std::optional<std::vector<double>>& p_beta,
                                  const BarrierThresholds& thresholds = {});

// Posterior P(w_e = 0) for every base edge.
std::vector<double> barrier_probabilities(const ChainOutput::BorderDraws& w);

// Ties are broken by the lexicographically smaller unit_id first.
ExtremeUnits extremes(const UnitSummaries& summaries, int k);

// FeatureCollection with one polygon feature per unit (properties unit_id,
// alpha_mean, alpha_sd, alpha_q025, alpha_q975, alpha_ci_width,
// alpha_significant and the beta_ counterparts) and one line feature per
// flagged barrier (properties kind = "barrier", parameter, unit_a, unit_b,
// probability). Barrier geometry is the shared boundary, or the segment
// between centroids when the units touch only at points.
void export_geojson(const std::filesystem::path& path, const UnitSummaries& summaries,
                    const BarrierReport* barriers, std::span<const UnitGeometry> polygons);

// summary.csv columns:
//   unit_id,alpha_mean,alpha_sd,alpha_q025,alpha_q975,alpha_ci_width,alpha_significant,
//   beta_mean,beta_sd,beta_q025,beta_q975,beta_ci_width,beta_significant
void write_summary_csv(const std::filesystem::path& path, const UnitSummaries& summaries);
UnitSummaries read_summary_csv(const std::filesystem::path& path);

// barriers.csv columns: edge,unit_a,unit_b,p_alpha,p_beta,flag_alpha,flag_beta
// (empty probability and flag fields for a fixed border vector).
void write_barriers_csv(const std::filesystem::path& path, const BarrierReport& report);

}  // namespace areltrend
