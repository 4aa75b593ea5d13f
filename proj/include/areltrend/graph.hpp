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
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

namespace areltrend {

// Unordered unit-index pair stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Symmetric binary neighbour structure W over n units.
//
// Edges are kept sorted, so the edge index of a pair is stable and doubles as
// the coordinate of the variable border vectors W^alpha / W^beta.
class AdjacencyGraph {
 public:
  struct Incidence {
    int neighbor;
    int edge;
  };

  AdjacencyGraph() = default;
  AdjacencyGraph(std::vector<std::string> unit_ids, std::vector<Edge> edges);

  // Builds from id pairs; throws DimensionError for unknown ids.
  static AdjacencyGraph from_id_pairs(std::vector<std::string> unit_ids,
                                      std::span<const std::pair<std::string, std::string>> pairs);

  int size() const { return static_cast<int>(unit_ids_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const int> degree() const { return degree_; }
  std::span<const Incidence> incident(int unit) const {
    return {incidence_.data() + offsets_[unit], incidence_.data() + offsets_[unit + 1]};
  }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  std::optional<int> index_of(const std::string& id) const;
  std::optional<int> edge_index(int a, int b) const;

  // Induced subgraph over the given ids, in that order.
  AdjacencyGraph restricted_to(std::span<const std::string> ids) const;

 private:
  std::vector<std::string> unit_ids_;
  std::unordered_map<std::string, int> id_map_;
  std::vector<Edge> edges_;
  std::vector<int> degree_;
  std::vector<int> offsets_;
  std::vector<Incidence> incidence_;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

// Edge activity mask over graph.edges(); empty span means every edge active.
using EdgeMask = std::span<const std::uint8_t>;

// rho * (D_W - W) + (1 - rho) * I. Throws InputError unless 0 <= rho < 1.
SparseMatrix laplacian_precision(const AdjacencyGraph& graph, double rho);

// Same matrix restricted to the active edges. Inactive base edges stay in the
// sparsity pattern as explicit zeros so every mask yields one pattern.
SparseMatrix car_precision(const AdjacencyGraph& graph, EdgeMask active, double rho);

struct MoranResult {
  double statistic = 0.0;
  double null_mean = 0.0;
  double null_sd = 0.0;
  double z_score = 0.0;
};

// Moran's I with binary weights. The null standard deviation uses the
// closed form under the normality assumption.
MoranResult morans_i(std::span<const double> x, const AdjacencyGraph& graph);

struct PermutationMoments {
  double mean = 0.0;
  double sd = 0.0;
};

// Permutation distribution of Moran's I; deterministic for a given seed and
// independent of the OpenMP thread count.
PermutationMoments morans_i_permutation(std::span<const double> x, const AdjacencyGraph& graph,
                                        int n_perm, std::uint64_t seed);
double morans_i_permutation_sd(std::span<const double> x, const AdjacencyGraph& graph, int n_perm,
                               std::uint64_t seed);

// ---- geometry -----------------------------------------------------------------

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

struct UnitGeometry {
  std::string unit_id;
  std::vector<Ring> rings;  // every ring of every polygon part, closed
  std::vector<int> parts;   // rings per polygon part (outer ring first); empty: one part per ring
};

inline constexpr double kDefaultSnapTolerance = 1e-9;

// Queen contiguity: units are neighbours when their boundaries share at least
// one point after snapping coordinates to a grid of size snap_tolerance.
AdjacencyGraph queen_contiguity(std::span<const UnitGeometry> units,
                                double snap_tolerance = kDefaultSnapTolerance);

// Shared boundary pieces of two units as polylines (after snapping). Returns
// empty when the units touch only at isolated points.
std::vector<std::vector<Point>> shared_boundary(const UnitGeometry& a, const UnitGeometry& b,
                                                double snap_tolerance = kDefaultSnapTolerance);

Point centroid(const UnitGeometry& unit);

// ---- file formats ---------------------------------------------------------------

// FeatureCollection of Polygon / MultiPolygon features with property unit_id.
std::vector<UnitGeometry> read_polygons_geojson(const std::filesystem::path& path);

// edges.csv: unit_id_a,unit_id_b.
std::vector<std::pair<std::string, std::string>> read_edges_csv(const std::filesystem::path& path);

// Writes edges as id pairs with a < b, sorted lexicographically.
void write_edges_csv(const std::filesystem::path& path, const AdjacencyGraph& graph);

}  // namespace areltrend
