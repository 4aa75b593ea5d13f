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

#include "areltrend/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "areltrend/csv.hpp"
#include "areltrend/error.hpp"
#include "areltrend/kernels.hpp"

namespace areltrend {

// ---- AdjacencyGraph ----------------------------------------------------------------

AdjacencyGraph::AdjacencyGraph(std::vector<std::string> unit_ids, std::vector<Edge> edges)
    : unit_ids_(std::move(unit_ids)), edges_(std::move(edges)) {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    if (!id_map_.emplace(unit_ids_[i], i).second) {
      throw InputError("duplicate unit_id '" + unit_ids_[i] + "' in graph");
    }
  }
  for (auto& e : edges_) {
    if (e.i == e.j) throw InputError("self-loop on unit '" + unit_ids_.at(e.i) + "'");
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.i < 0 || e.j >= n) throw DimensionError("edge endpoint out of range");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  degree_.assign(n, 0);
  for (const auto& e : edges_) {
    ++degree_[e.i];
    ++degree_[e.j];
  }
  offsets_.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + degree_[i];
  incidence_.resize(offsets_[n]);
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (int k = 0; k < edge_count(); ++k) {
    const auto& e = edges_[k];
    incidence_[fill[e.i]++] = {e.j, k};
    incidence_[fill[e.j]++] = {e.i, k};
  }
  for (int i = 0; i < n; ++i) {
    std::sort(incidence_.begin() + offsets_[i], incidence_.begin() + offsets_[i + 1],
              [](const Incidence& a, const Incidence& b) { return a.neighbor < b.neighbor; });
  }
}

AdjacencyGraph AdjacencyGraph::from_id_pairs(
    std::vector<std::string> unit_ids, std::span<const std::pair<std::string, std::string>> pairs) {
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(unit_ids.size()); ++i) index.emplace(unit_ids[i], i);
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const auto ia = index.find(a);
    const auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      throw DimensionError("edge (" + a + ", " + b + ") references an unknown unit");
    }
    edges.push_back({ia->second, ib->second});
  }
  return AdjacencyGraph(std::move(unit_ids), std::move(edges));
}

std::optional<int> AdjacencyGraph::index_of(const std::string& id) const {
  const auto it = id_map_.find(id);
  if (it == id_map_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> AdjacencyGraph::edge_index(int a, int b) const {
  if (a > b) std::swap(a, b);
  const auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{a, b});
  if (it == edges_.end() || *it != Edge{a, b}) return std::nullopt;
  return static_cast<int>(it - edges_.begin());
}

AdjacencyGraph AdjacencyGraph::restricted_to(std::span<const std::string> ids) const {
  std::vector<int> new_index(size(), -1);
  std::vector<std::string> kept;
  kept.reserve(ids.size());
  for (const auto& id : ids) {
    const auto old = index_of(id);
    if (!old) throw DimensionError("unit '" + id + "' is not in the adjacency graph");
    new_index[*old] = static_cast<int>(kept.size());
    kept.push_back(id);
  }
  std::vector<Edge> edges;
  for (const auto& e : edges_) {
    if (new_index[e.i] >= 0 && new_index[e.j] >= 0) edges.push_back({new_index[e.i], new_index[e.j]});
  }
  return AdjacencyGraph(std::move(kept), std::move(edges));
}

// ---- precision matrices ---------------------------------------------------------------

SparseMatrix car_precision(const AdjacencyGraph& graph, EdgeMask active, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw InputError("rho must lie in [0, 1), got " + std::to_string(rho));
  }
  if (!active.empty() && static_cast<int>(active.size()) != graph.edge_count()) {
    throw DimensionError("edge mask length does not match edge count");
  }
  const int n = graph.size();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n + 2 * graph.edge_count()));
  std::vector<double> diag(n, 1.0 - rho);
  const auto edges = graph.edges();
  for (int k = 0; k < graph.edge_count(); ++k) {
    const bool on = active.empty() || active[k];
    const double w = on ? rho : 0.0;
    triplets.emplace_back(edges[k].i, edges[k].j, -w);
    triplets.emplace_back(edges[k].j, edges[k].i, -w);
    diag[edges[k].i] += w;
    diag[edges[k].j] += w;
  }
  for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, diag[i]);
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

SparseMatrix laplacian_precision(const AdjacencyGraph& graph, double rho) {
  return car_precision(graph, {}, rho);
}

// ---- Moran's I -------------------------------------------------------------------------

MoranResult morans_i(std::span<const double> x, const AdjacencyGraph& graph) {
  const int n = graph.size();
  if (static_cast<int>(x.size()) != n) throw DimensionError("Moran's I: vector length mismatch");
  if (graph.edge_count() == 0) throw InputError("Moran's I: graph has no edges");
  if (n < 2) throw InputError("Moran's I: need at least two units");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  std::vector<double> centered(x.size());
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    centered[i] = x[i] - mean;
    ss += centered[i] * centered[i];
  }
  if (!(ss > 0.0)) throw InputError("Moran's I: input has zero variance");

  const double s0 = 2.0 * graph.edge_count();
  const double cross = kernels::parallel::moran_cross_sum(graph, centered);

  MoranResult result;
  result.statistic = (n / s0) * cross / ss;
  result.null_mean = -1.0 / (n - 1);
  const double s1 = 2.0 * s0;
  double s2 = 0.0;
  for (const int deg : graph.degree()) s2 += 4.0 * deg * deg;
  const double nn = static_cast<double>(n);
  const double second_moment =
      (nn * nn * s1 - nn * s2 + 3.0 * s0 * s0) / ((nn * nn - 1.0) * s0 * s0);
  const double variance = std::max(0.0, second_moment - result.null_mean * result.null_mean);
  result.null_sd = std::sqrt(variance);
  result.z_score = result.null_sd > 0.0 ? (result.statistic - result.null_mean) / result.null_sd
                                        : std::numeric_limits<double>::quiet_NaN();
  return result;
}

PermutationMoments morans_i_permutation(std::span<const double> x, const AdjacencyGraph& graph,
                                        int n_perm, std::uint64_t seed) {
  if (n_perm < 100) throw InputError("permutation Moran's I needs at least 100 permutations");
  // Validates the input exactly as the analytic statistic does.
  (void)morans_i(x, graph);
  const auto stats = kernels::parallel::moran_permutations(x, graph, n_perm, seed);
  PermutationMoments m;
  m.mean = std::accumulate(stats.begin(), stats.end(), 0.0) / n_perm;
  double ss = 0.0;
  for (const double s : stats) ss += (s - m.mean) * (s - m.mean);
  m.sd = std::sqrt(ss / (n_perm - 1));
  return m;
}

double morans_i_permutation_sd(std::span<const double> x, const AdjacencyGraph& graph, int n_perm,
                               std::uint64_t seed) {
  return morans_i_permutation(x, graph, n_perm, seed).sd;
}

// ---- geometry -------------------------------------------------------------------------

namespace {

struct GridPoint {
  std::int64_t x;
  std::int64_t y;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

struct GridPointHash {
  std::size_t operator()(const GridPoint& p) const {
    return std::hash<std::int64_t>()(p.x) * 0x9E3779B97F4A7C15ULL ^ std::hash<std::int64_t>()(p.y);
  }
};

struct Segment {
  GridPoint a;
  GridPoint b;
};

struct Box {
  std::int64_t min_x = std::numeric_limits<std::int64_t>::max();
  std::int64_t min_y = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_x = std::numeric_limits<std::int64_t>::min();
  std::int64_t max_y = std::numeric_limits<std::int64_t>::min();

  void add(const GridPoint& p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  bool overlaps(const Box& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
};

struct SnappedUnit {
  std::vector<Segment> segments;
  std::unordered_set<GridPoint, GridPointHash> vertices;
  Box box;
};

std::int64_t snap(double v, double tol) {
  const double scaled = std::round(v / tol);
  if (!(std::abs(scaled) < 9.0e18)) throw InputError("coordinate out of range for snap tolerance");
  return static_cast<std::int64_t>(scaled);
}

SnappedUnit snap_unit(const UnitGeometry& unit, double tol) {
  if (unit.rings.empty()) throw InputError("unit '" + unit.unit_id + "' has empty geometry");
  SnappedUnit out;
  for (const auto& ring : unit.rings) {
    if (ring.size() < 4) {
      throw InputError("unit '" + unit.unit_id + "' has a ring with fewer than 4 points");
    }
    if (!(ring.front() == ring.back())) {
      throw InputError("unit '" + unit.unit_id + "' has an unclosed ring");
    }
    GridPoint prev{snap(ring[0].x, tol), snap(ring[0].y, tol)};
    out.vertices.insert(prev);
    out.box.add(prev);
    for (std::size_t k = 1; k < ring.size(); ++k) {
      const GridPoint cur{snap(ring[k].x, tol), snap(ring[k].y, tol)};
      out.vertices.insert(cur);
      out.box.add(cur);
      if (!(cur == prev)) out.segments.push_back({prev, cur});
      prev = cur;
    }
  }
  return out;
}

int orientation(const GridPoint& a, const GridPoint& b, const GridPoint& c) {
  const __int128 v = static_cast<__int128>(b.x - a.x) * (c.y - a.y) -
                     static_cast<__int128>(b.y - a.y) * (c.x - a.x);
  return (v > 0) - (v < 0);
}

bool on_segment(const GridPoint& a, const GridPoint& b, const GridPoint& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(const Segment& s, const Segment& t) {
  const int o1 = orientation(s.a, s.b, t.a);
  const int o2 = orientation(s.a, s.b, t.b);
  const int o3 = orientation(t.a, t.b, s.a);
  const int o4 = orientation(t.a, t.b, s.b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(s.a, s.b, t.a)) return true;
  if (o2 == 0 && on_segment(s.a, s.b, t.b)) return true;
  if (o3 == 0 && on_segment(t.a, t.b, s.a)) return true;
  if (o4 == 0 && on_segment(t.a, t.b, s.b)) return true;
  return false;
}

Box segment_box(const Segment& s) {
  Box b;
  b.add(s.a);
  b.add(s.b);
  return b;
}

bool units_touch(const SnappedUnit& a, const SnappedUnit& b) {
  const auto& small = a.vertices.size() <= b.vertices.size() ? a : b;
  const auto& large = a.vertices.size() <= b.vertices.size() ? b : a;
  for (const auto& v : small.vertices) {
    if (large.vertices.contains(v)) return true;
  }
  std::vector<Segment> sa, sb;
  for (const auto& s : a.segments) {
    if (segment_box(s).overlaps(b.box)) sa.push_back(s);
  }
  for (const auto& s : b.segments) {
    if (segment_box(s).overlaps(a.box)) sb.push_back(s);
  }
  for (const auto& s : sa) {
    const Box bs = segment_box(s);
    for (const auto& t : sb) {
      if (bs.overlaps(segment_box(t)) && segments_touch(s, t)) return true;
    }
  }
  return false;
}

}  // namespace

AdjacencyGraph queen_contiguity(std::span<const UnitGeometry> units, double snap_tolerance) {
  if (!(snap_tolerance > 0.0)) throw InputError("snap tolerance must be positive");
  const int n = static_cast<int>(units.size());
  std::vector<SnappedUnit> snapped;
  snapped.reserve(units.size());
  std::vector<std::string> ids;
  for (const auto& unit : units) {
    snapped.push_back(snap_unit(unit, snap_tolerance));
    ids.push_back(unit.unit_id);
  }
  // Sweep over units sorted by the left edge of their bounding boxes.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::tie(snapped[a].box.min_x, ids[a]) < std::tie(snapped[b].box.min_x, ids[b]);
  });
  std::vector<std::pair<int, int>> candidates;
  for (int p = 0; p < n; ++p) {
    const auto& a = snapped[order[p]];
    for (int q = p + 1; q < n; ++q) {
      const auto& b = snapped[order[q]];
      if (b.box.min_x > a.box.max_x) break;
      if (a.box.overlaps(b.box)) candidates.emplace_back(order[p], order[q]);
    }
  }
  std::vector<std::uint8_t> touches(candidates.size(), 0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    touches[k] = units_touch(snapped[candidates[k].first], snapped[candidates[k].second]) ? 1 : 0;
  }
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (touches[k]) edges.push_back({candidates[k].first, candidates[k].second});
  }
  return AdjacencyGraph(std::move(ids), std::move(edges));
}

std::vector<std::vector<Point>> shared_boundary(const UnitGeometry& a, const UnitGeometry& b,
                                                double snap_tolerance) {
  const auto sa = snap_unit(a, snap_tolerance);
  const auto sb = snap_unit(b, snap_tolerance);
  std::vector<std::vector<Point>> pieces;
  for (const auto& s : sa.segments) {
    for (const auto& t : sb.segments) {
      if (orientation(s.a, s.b, t.a) != 0 || orientation(s.a, s.b, t.b) != 0) continue;
      // Collinear: intersect the projections on the dominant axis of s.
      const bool use_x = std::abs(s.b.x - s.a.x) >= std::abs(s.b.y - s.a.y);
      auto key = [&](const GridPoint& p) { return use_x ? p.x : p.y; };
      GridPoint s_lo = s.a, s_hi = s.b, t_lo = t.a, t_hi = t.b;
      if (key(s_lo) > key(s_hi)) std::swap(s_lo, s_hi);
      if (key(t_lo) > key(t_hi)) std::swap(t_lo, t_hi);
      const GridPoint lo = key(s_lo) >= key(t_lo) ? s_lo : t_lo;
      const GridPoint hi = key(s_hi) <= key(t_hi) ? s_hi : t_hi;
      if (key(lo) >= key(hi)) continue;
      pieces.push_back({{static_cast<double>(lo.x) * snap_tolerance, static_cast<double>(lo.y) * snap_tolerance},
                        {static_cast<double>(hi.x) * snap_tolerance, static_cast<double>(hi.y) * snap_tolerance}});
    }
  }
  return pieces;
}

Point centroid(const UnitGeometry& unit) {
  double area = 0.0, cx = 0.0, cy = 0.0;
  double sx = 0.0, sy = 0.0;
  std::size_t count = 0;
  for (const auto& ring : unit.rings) {
    for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
      const double cross = ring[k].x * ring[k + 1].y - ring[k + 1].x * ring[k].y;
      area += cross;
      cx += (ring[k].x + ring[k + 1].x) * cross;
      cy += (ring[k].y + ring[k + 1].y) * cross;
      sx += ring[k].x;
      sy += ring[k].y;
      ++count;
    }
  }
  if (std::abs(area) > 0.0) return {cx / (3.0 * area), cy / (3.0 * area)};
  if (count == 0) throw InputError("unit '" + unit.unit_id + "' has empty geometry");
  return {sx / count, sy / count};
}

// ---- file formats ----------------------------------------------------------------------

namespace {

Ring parse_ring(const nlohmann::json& coords, const std::string& id) {
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2) throw InputError("unit '" + id + "': malformed position");
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  return ring;
}

}  // namespace

std::vector<UnitGeometry> read_polygons_geojson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw InputError(path.string() + ": expected a FeatureCollection");
  }
  std::vector<UnitGeometry> units;
  std::set<std::string> seen;
  try {
    for (const auto& feature : doc["features"]) {
      const auto& props = feature.at("properties");
      if (!props.contains("unit_id")) throw InputError(path.string() + ": feature without unit_id");
      const auto& raw_id = props["unit_id"];
      UnitGeometry unit;
      unit.unit_id = raw_id.is_string() ? raw_id.get<std::string>() : raw_id.dump();
      if (!seen.insert(unit.unit_id).second) {
        throw InputError(path.string() + ": duplicate unit_id '" + unit.unit_id + "'");
      }
      const auto& geom = feature.at("geometry");
      if (geom.is_null()) throw InputError("unit '" + unit.unit_id + "' has empty geometry");
      const auto type = geom.at("type").get<std::string>();
      const auto& coords = geom.at("coordinates");
      if (type == "Polygon") {
        for (const auto& ring : coords) unit.rings.push_back(parse_ring(ring, unit.unit_id));
        unit.parts.push_back(static_cast<int>(coords.size()));
      } else if (type == "MultiPolygon") {
        for (const auto& poly : coords) {
          for (const auto& ring : poly) unit.rings.push_back(parse_ring(ring, unit.unit_id));
          unit.parts.push_back(static_cast<int>(poly.size()));
        }
      } else {
        throw InputError("unit '" + unit.unit_id + "': unsupported geometry type " + type);
      }
      units.push_back(std::move(unit));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return units;
}

std::vector<std::pair<std::string, std::string>> read_edges_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const int ca = table.column("unit_id_a", path);
  const int cb = table.column("unit_id_b", path);
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(table.rows.size());
  for (const auto& row : table.rows) pairs.emplace_back(row[ca], row[cb]);
  return pairs;
}

void write_edges_csv(const std::filesystem::path& path, const AdjacencyGraph& graph) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& e : graph.edges()) {
    auto a = graph.unit_ids()[e.i];
    auto b = graph.unit_ids()[e.j];
    if (b < a) std::swap(a, b);
    pairs.emplace_back(std::move(a), std::move(b));
  }
  std::sort(pairs.begin(), pairs.end());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "unit_id_a,unit_id_b\n";
  for (const auto& [a, b] : pairs) out << csv::escape(a) << ',' << csv::escape(b) << '\n';
}

}  // namespace areltrend
