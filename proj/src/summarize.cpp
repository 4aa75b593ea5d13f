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

#include "areltrend/summarize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "areltrend/csv.hpp"
#include "areltrend/error.hpp"

namespace areltrend {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

// Two-pass mean; exact for constant samples.
double mean_of(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double first = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double correction = 0.0;
  for (const double x : v) correction += x - first;
  return first + correction / n;
}

ParameterSummary summarize_column(const Eigen::MatrixXd& draws, Eigen::Index column,
                                  double global_mean, std::vector<double>& scratch) {
  const auto m = draws.rows();
  scratch.resize(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) scratch[r] = draws(r, column);
  ParameterSummary s;
  s.mean = mean_of(scratch);
  double ss = 0.0;
  for (const double x : scratch) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(m - 1));
  std::sort(scratch.begin(), scratch.end());
  s.q025 = quantile_sorted(scratch, 0.025);
  s.q975 = quantile_sorted(scratch, 0.975);
  s.ci_width = s.q975 - s.q025;
  s.significant = global_mean < s.q025 || global_mean > s.q975;
  return s;
}

}  // namespace

UnitSummaries summarize_units(const ChainOutput& draws, std::span<const std::string> unit_ids) {
  if (draws.draws() < kMinSummaryDraws) {
    throw InputError("summaries need at least " + std::to_string(kMinSummaryDraws) +
                     " retained draws, got " + std::to_string(draws.draws()));
  }
  if (static_cast<std::size_t>(draws.alpha.cols()) != unit_ids.size()) {
    throw DimensionError("draws do not match the unit list");
  }
  UnitSummaries out;
  out.alpha0_mean = mean_of(draws.alpha0);
  out.beta0_mean = mean_of(draws.beta0);
  out.units.resize(unit_ids.size());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < unit_ids.size(); ++i) {
    auto& u = out.units[i];
    u.unit_id = unit_ids[i];
    u.alpha = summarize_column(draws.alpha, static_cast<Eigen::Index>(i), out.alpha0_mean, scratch);
    u.beta = summarize_column(draws.beta, static_cast<Eigen::Index>(i), out.beta0_mean, scratch);
  }
  return out;
}

std::vector<double> barrier_probabilities(const ChainOutput::BorderDraws& w) {
  std::vector<double> p(static_cast<std::size_t>(w.cols()), 0.0);
  if (w.rows() == 0) return p;
  for (Eigen::Index e = 0; e < w.cols(); ++e) {
    long long off = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) off += w(r, e) == 0 ? 1 : 0;
    p[e] = static_cast<double>(off) / static_cast<double>(w.rows());
  }
  return p;
}

BarrierReport make_barrier_report(const AdjacencyGraph& graph,
                                  const std::optional<std::vector<double>>& p_alpha,
                                  const std::optional<std::vector<double>>& p_beta,
                                  const BarrierThresholds& thresholds) {
  if (!p_alpha && !p_beta) {
    throw IncompleteRunError("the fit has fixed borders; barrier probabilities need a "
                             "variable-borders model");
  }
  const auto m = static_cast<std::size_t>(graph.edge_count());
  for (const auto* p : {&p_alpha, &p_beta}) {
    if (*p && (*p)->size() != m) throw DimensionError("barrier probabilities do not match the edges");
  }
  BarrierReport report;
  report.thresholds = thresholds;
  report.edges.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    auto& b = report.edges[e];
    b.edge = static_cast<int>(e);
    b.unit_a = graph.unit_ids()[graph.edges()[e].i];
    b.unit_b = graph.unit_ids()[graph.edges()[e].j];
    if (p_alpha) {
      b.p_alpha = (*p_alpha)[e];
      b.flag_alpha = *b.p_alpha > thresholds.alpha;
    }
    if (p_beta) {
      b.p_beta = (*p_beta)[e];
      b.flag_beta = *b.p_beta > thresholds.beta;
    }
  }
  return report;
}

BarrierReport barrier_report(const ChainOutput& draws, const AdjacencyGraph& graph,
                             const BarrierThresholds& thresholds) {
  std::optional<std::vector<double>> pa, pb;
  if (has_variable_alpha(draws.family)) pa = barrier_probabilities(draws.w_alpha);
  if (has_variable_beta(draws.family)) pb = barrier_probabilities(draws.w_beta);
  return make_barrier_report(graph, pa, pb, thresholds);
}

ExtremeUnits extremes(const UnitSummaries& summaries, int k) {
  const int n = static_cast<int>(summaries.units.size());
  if (k < 0 || k > n) throw InputError("k must lie in [0, n]");
  const auto& units = summaries.units;
  auto ranked = [&](auto key, bool descending) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      const double ka = key(units[a]);
      const double kb = key(units[b]);
      if (ka != kb) return descending ? ka > kb : ka < kb;
      return units[a].unit_id < units[b].unit_id;
    });
    idx.resize(k);
    return idx;
  };
  const auto alpha = [](const UnitSummary& u) { return u.alpha.mean; };
  const auto beta = [](const UnitSummary& u) { return u.beta.mean; };
  return {ranked(alpha, true), ranked(alpha, false), ranked(beta, true), ranked(beta, false)};
}

// ---- export ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json point_json(const Point& p) { return json::array({p.x, p.y}); }

json ring_json(const Ring& ring) {
  json out = json::array();
  for (const auto& p : ring) out.push_back(point_json(p));
  return out;
}

json polygon_geometry(const UnitGeometry& unit) {
  std::vector<int> parts = unit.parts;
  if (parts.empty()) parts.assign(unit.rings.size(), 1);
  json polygons = json::array();
  std::size_t r = 0;
  for (const int count : parts) {
    json poly = json::array();
    for (int k = 0; k < count && r < unit.rings.size(); ++k) poly.push_back(ring_json(unit.rings[r++]));
    polygons.push_back(std::move(poly));
  }
  if (polygons.size() == 1) return {{"type", "Polygon"}, {"coordinates", polygons[0]}};
  return {{"type", "MultiPolygon"}, {"coordinates", polygons}};
}

void add_summary(json& props, const std::string& prefix, const ParameterSummary& s) {
  props[prefix + "_mean"] = s.mean;
  props[prefix + "_sd"] = s.sd;
  props[prefix + "_q025"] = s.q025;
  props[prefix + "_q975"] = s.q975;
  props[prefix + "_ci_width"] = s.ci_width;
  props[prefix + "_significant"] = s.significant;
}

json barrier_geometry(const UnitGeometry& a, const UnitGeometry& b) {
  const auto pieces = shared_boundary(a, b);
  if (pieces.empty()) {
    return {{"type", "LineString"},
            {"coordinates", json::array({point_json(centroid(a)), point_json(centroid(b))})}};
  }
  json lines = json::array();
  for (const auto& piece : pieces) lines.push_back(ring_json(piece));
  if (lines.size() == 1) return {{"type", "LineString"}, {"coordinates", lines[0]}};
  return {{"type", "MultiLineString"}, {"coordinates", lines}};
}

}  // namespace

void export_geojson(const std::filesystem::path& path, const UnitSummaries& summaries,
                    const BarrierReport* barriers, std::span<const UnitGeometry> polygons) {
  std::map<std::string, const UnitGeometry*> by_id;
  for (const auto& g : polygons) by_id[g.unit_id] = &g;
  auto geometry_of = [&](const std::string& id) -> const UnitGeometry& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw InputError("unit '" + id + "' has no geometry");
    return *it->second;
  };

  json features = json::array();
  for (const auto& u : summaries.units) {
    json props = {{"unit_id", u.unit_id}};
    add_summary(props, "alpha", u.alpha);
    add_summary(props, "beta", u.beta);
    features.push_back(
        {{"type", "Feature"}, {"properties", props}, {"geometry", polygon_geometry(geometry_of(u.unit_id))}});
  }
  if (barriers != nullptr) {
    for (const auto& b : barriers->edges) {
      for (const auto& [name, flag, p] : {std::tuple{"alpha", b.flag_alpha, b.p_alpha},
                                          std::tuple{"beta", b.flag_beta, b.p_beta}}) {
        if (!flag) continue;
        json props = {{"kind", "barrier"}, {"parameter", name}, {"unit_a", b.unit_a},
                      {"unit_b", b.unit_b}, {"probability", *p}};
        features.push_back({{"type", "Feature"},
                            {"properties", props},
                            {"geometry", barrier_geometry(geometry_of(b.unit_a), geometry_of(b.unit_b))}});
      }
    }
  }
  const json doc = {{"type", "FeatureCollection"}, {"features", features}};
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

// ---- CSV -------------------------------------------------------------------------------

namespace {

constexpr const char* kSummaryHeader =
    "unit_id,alpha_mean,alpha_sd,alpha_q025,alpha_q975,alpha_ci_width,alpha_significant,"
    "beta_mean,beta_sd,beta_q025,beta_q975,beta_ci_width,beta_significant";

void write_parameter(std::ostream& out, const ParameterSummary& s) {
  out << ',' << csv::format_double(s.mean) << ',' << csv::format_double(s.sd) << ','
      << csv::format_double(s.q025) << ',' << csv::format_double(s.q975) << ','
      << csv::format_double(s.ci_width) << ',' << (s.significant ? 1 : 0);
}

}  // namespace

void write_summary_csv(const std::filesystem::path& path, const UnitSummaries& summaries) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << kSummaryHeader << '\n';
  for (const auto& u : summaries.units) {
    out << csv::escape(u.unit_id);
    write_parameter(out, u.alpha);
    write_parameter(out, u.beta);
    out << '\n';
  }
}

UnitSummaries read_summary_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const int id_col = table.column("unit_id", path);
  UnitSummaries out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int line = table.line_numbers[r];
    UnitSummary u;
    u.unit_id = row[id_col];
    for (auto [prefix, target] : {std::pair{"alpha", &u.alpha}, std::pair{"beta", &u.beta}}) {
      const std::string p = prefix;
      auto value = [&](const char* suffix) {
        return csv::parse_double(row[table.column(p + suffix, path)], path, line);
      };
      target->mean = value("_mean");
      target->sd = value("_sd");
      target->q025 = value("_q025");
      target->q975 = value("_q975");
      target->ci_width = value("_ci_width");
      target->significant = value("_significant") != 0.0;
    }
    out.units.push_back(std::move(u));
  }
  return out;
}

void write_barriers_csv(const std::filesystem::path& path, const BarrierReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "edge,unit_a,unit_b,p_alpha,p_beta,flag_alpha,flag_beta\n";
  for (const auto& b : report.edges) {
    out << b.edge << ',' << csv::escape(b.unit_a) << ',' << csv::escape(b.unit_b) << ','
        << (b.p_alpha ? csv::format_double(*b.p_alpha) : "") << ','
        << (b.p_beta ? csv::format_double(*b.p_beta) : "") << ','
        << (b.p_alpha ? (b.flag_alpha ? "1" : "0") : "") << ','
        << (b.p_beta ? (b.flag_beta ? "1" : "0") : "") << '\n';
  }
}

}  // namespace areltrend
