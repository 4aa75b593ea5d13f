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

#include "areltrend/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "areltrend/error.hpp"

namespace areltrend {

void SyntheticSpec::validate() const {
  switch (shape) {
    case GraphShape::Grid:
      if (rows < 1 || cols < 1) throw InputError("grid needs positive rows and cols");
      break;
    case GraphShape::Cycle:
      if (nodes < 3) throw InputError("cycle needs at least three nodes");
      break;
    case GraphShape::Path:
    case GraphShape::Custom:
      if (nodes < 1) throw InputError("graph needs at least one node");
      break;
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw InputError("rho must lie in [0, 1)");
  for (const double v : {tau2_alpha, tau2_beta, sigma2}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("variances must be finite and >= 0");
  }
  if (periods < 1) throw InputError("periods must be positive");
}

AdjacencyGraph make_graph(const SyntheticSpec& spec) {
  spec.validate();
  const int n = spec.shape == GraphShape::Grid ? spec.rows * spec.cols : spec.nodes;
  std::vector<Edge> edges;
  switch (spec.shape) {
    case GraphShape::Grid:
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
          const int k = r * spec.cols + c;
          if (c + 1 < spec.cols) edges.push_back({k, k + 1});
          if (r + 1 < spec.rows) edges.push_back({k, k + spec.cols});
        }
      }
      break;
    case GraphShape::Cycle:
      for (int k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1});
      edges.push_back({0, n - 1});
      break;
    case GraphShape::Path:
      for (int k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1});
      break;
    case GraphShape::Custom:
      edges = spec.custom_edges;
      break;
  }
  const int width = static_cast<int>(std::to_string(std::max(n - 1, 0)).size());
  std::vector<std::string> ids(n);
  for (int k = 0; k < n; ++k) {
    std::string digits = std::to_string(k);
    ids[k] = "u" + std::string(width - digits.size(), '0') + digits;
  }
  return AdjacencyGraph(std::move(ids), std::move(edges));
}

Eigen::VectorXd draw_car(const SparseMatrix& precision, double center, double tau2, Rng& rng) {
  const auto n = precision.rows();
  Eigen::VectorXd z(n);
  for (Eigen::Index k = 0; k < n; ++k) z(k) = rng.normal();
  if (tau2 == 0.0) return Eigen::VectorXd::Constant(n, center);
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("CAR precision is not positive definite");
  const Eigen::VectorXd u = llt.matrixU().solve(z);
  const Eigen::VectorXd x = llt.permutationPinv() * u;
  return (center + std::sqrt(tau2) * x.array()).matrix();
}

namespace {

std::vector<std::uint8_t> planted_mask(const std::vector<int>& barriers, int edges) {
  std::vector<std::uint8_t> w(static_cast<std::size_t>(edges), 1);
  for (const int e : barriers) {
    if (e < 0 || e >= edges) throw InputError("planted barrier is not a base edge");
    w[e] = 0;
  }
  return w;
}

}  // namespace

SyntheticData simulate(const SyntheticSpec& spec) {
  SyntheticData out;
  out.graph = make_graph(spec);
  const int n = out.graph.size();
  const int T = spec.periods;
  const int d = static_cast<int>(spec.gamma.size());
  for (const auto* offset : {&spec.alpha_offset, &spec.beta_offset}) {
    if (!offset->empty() && static_cast<int>(offset->size()) != n) {
      throw InputError("offset length must equal the number of units");
    }
  }
  out.truth.w_alpha = planted_mask(spec.barriers_alpha, out.graph.edge_count());
  out.truth.w_beta = planted_mask(spec.barriers_beta, out.graph.edge_count());

  Rng rng(spec.seed, 0);
  out.truth.alpha =
      draw_car(car_precision(out.graph, out.truth.w_alpha, spec.rho), spec.alpha0, spec.tau2_alpha, rng);
  out.truth.beta =
      draw_car(car_precision(out.graph, out.truth.w_beta, spec.rho), spec.beta0, spec.tau2_beta, rng);
  for (int i = 0; i < n && !spec.alpha_offset.empty(); ++i) out.truth.alpha(i) += spec.alpha_offset[i];
  for (int i = 0; i < n && !spec.beta_offset.empty(); ++i) out.truth.beta(i) += spec.beta_offset[i];
  out.truth.gamma = spec.gamma;

  Eigen::MatrixXd raw(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) raw(i, j) = rng.normal();
  }
  std::vector<std::string> names(d);
  for (int j = 0; j < d; ++j) names[j] = "x" + std::to_string(j + 1);
  if (d > 0) {
    out.covariates = standardize(raw, out.graph.unit_ids(), names);
  } else {
    out.covariates.Z.resize(n, 0);
    out.covariates.unit_ids = out.graph.unit_ids();
  }

  Eigen::MatrixXd y(n, T);
  CountMatrix counts(n, T);
  const double sigma = std::sqrt(spec.sigma2);
  for (int i = 0; i < n; ++i) {
    const double level = d > 0 ? out.covariates.Z.row(i).dot(spec.gamma) : 0.0;
    for (int k = 0; k < T; ++k) {
      const double noise = rng.normal();
      y(i, k) = level + out.truth.alpha(i) + out.truth.beta(i) * ArealPanel::t_index(k) + sigma * noise;
      const double c = std::sinh(y(i, k) + std::numbers::ln2);
      counts(i, k) = static_cast<std::int64_t>(std::clamp(std::round(c), 0.0, 1e15));
    }
  }
  std::vector<int> periods(T);
  for (int k = 0; k < T; ++k) periods[k] = spec.first_period + k;
  out.exact = ArealPanel::from_responses(out.graph.unit_ids(), periods, std::move(y));
  out.counts = ArealPanel::from_counts(out.graph.unit_ids(), periods, std::move(counts));
  return out;
}

// ---- oracles -----------------------------------------------------------------------------

namespace oracle {

namespace {

void guard_size(int n) {
  if (n > kMaxDenseUnits) {
    throw InputError("dense oracle supports at most " + std::to_string(kMaxDenseUnits) + " units");
  }
}

Eigen::MatrixXd coefficient_block(ModelFamily family, const AdjacencyGraph& graph,
                                  const ThetaState& state, bool for_alpha) {
  const int n = graph.size();
  if (family == ModelFamily::GlobalShrinkage) return Eigen::MatrixXd::Identity(n, n);
  const bool variable = for_alpha ? has_variable_alpha(family) : has_variable_beta(family);
  const std::vector<std::uint8_t> none;
  return precision(graph, variable ? (for_alpha ? state.w_alpha : state.w_beta) : none, state.rho);
}

double quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& x) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index c = 0; c < A.cols(); ++c) total += x(r) * A(r, c) * x(c);
  }
  return total;
}

double log_density(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                   const Eigen::VectorXd& dev, double tau2) {
  const Eigen::MatrixXd A = precision(graph, w, rho);
  return 0.5 * log_det(A) - quadratic(A, dev) / (2.0 * tau2);
}

}  // namespace

Eigen::MatrixXd precision(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho) {
  const int n = graph.size();
  guard_size(n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) A(k, k) = 1.0 - rho;
  for (int e = 0; e < graph.edge_count(); ++e) {
    if (!w.empty() && w[e] == 0) continue;
    const int i = graph.edges()[e].i;
    const int j = graph.edges()[e].j;
    A(i, i) += rho;
    A(j, j) += rho;
    A(i, j) -= rho;
    A(j, i) -= rho;
  }
  return A;
}

double log_det(const Eigen::MatrixXd& spd) {
  const Eigen::LLT<Eigen::MatrixXd> llt(spd);
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite");
  double total = 0.0;
  for (Eigen::Index k = 0; k < spd.rows(); ++k) total += 2.0 * std::log(llt.matrixL()(k, k));
  return total;
}

Eigen::MatrixXd design(const Eigen::MatrixXd& Z, int n, std::span<const int> columns) {
  const int d = static_cast<int>(Z.cols());
  const int T = static_cast<int>(columns.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n * T, d + 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < T; ++k) {
      const int row = i * T + k;
      for (int j = 0; j < d; ++j) X(row, j) = Z(i, j);
      X(row, d + i) = 1.0;
      X(row, d + n + i) = columns[k] + 1.0;
    }
  }
  return X;
}

namespace {

Eigen::VectorXd stacked_response(const Eigen::MatrixXd& y, std::span<const int> columns) {
  const int n = static_cast<int>(y.rows());
  const int T = static_cast<int>(columns.size());
  Eigen::VectorXd out(n * T);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < T; ++k) out(i * T + k) = y(i, columns[k]);
  }
  return out;
}

}  // namespace

GaussianLaw theta_conditional(const Eigen::MatrixXd& y, const Eigen::MatrixXd& Z,
                              std::span<const int> columns, ModelFamily family,
                              const AdjacencyGraph& graph, const ThetaState& state, bool flat_gamma) {
  const int n = graph.size();
  guard_size(n);
  const int d = static_cast<int>(Z.cols());
  const int p = d + 2 * n;
  const Eigen::MatrixXd X = design(Z, n, columns);
  const Eigen::VectorXd yv = stacked_response(y, columns);

  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < d; ++j) omega(j, j) = flat_gamma ? 0.0 : 1.0 / state.tau2_gamma;
  omega.block(d, d, n, n) = coefficient_block(family, graph, state, true) / state.tau2_alpha;
  omega.block(d + n, d + n, n, n) = coefficient_block(family, graph, state, false) / state.tau2_beta;
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < n; ++i) {
    theta0(d + i) = state.alpha0;
    theta0(d + n + i) = state.beta0;
  }
  const Eigen::MatrixXd Q = omega + X.transpose() * X / state.sigma2;
  GaussianLaw law;
  law.covariance = Q.inverse();
  law.mean = law.covariance * (omega * theta0 + X.transpose() * yv / state.sigma2);
  return law;
}

std::pair<double, double> mean_hyper(ModelFamily family, const AdjacencyGraph& graph,
                                     const ThetaState& state, bool for_alpha) {
  const Eigen::MatrixXd A = coefficient_block(family, graph, state, for_alpha);
  const Eigen::VectorXd& v = for_alpha ? state.alpha : state.beta;
  const double tau2 = for_alpha ? state.tau2_alpha : state.tau2_beta;
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      num += A(r, c) * v(c);
      den += A(r, c);
    }
  }
  return {num / den, tau2 / den};
}

VarianceLaws variance_conditionals(const Eigen::MatrixXd& y, const Eigen::MatrixXd& Z,
                                   std::span<const int> columns, ModelFamily family,
                                   const AdjacencyGraph& graph, const ThetaState& state,
                                   const VarianceHyper& hyper) {
  const int n = graph.size();
  guard_size(n);
  const Eigen::MatrixXd X = design(Z, n, columns);
  const Eigen::VectorXd resid = stacked_response(y, columns) - X * state.theta();
  const double N = static_cast<double>(resid.size());
  VarianceLaws out;
  out.sigma = {hyper.sigma.shape + N / 2.0, hyper.sigma.rate + resid.squaredNorm() / 2.0};
  out.gamma = {hyper.gamma.shape + state.gamma.size() / 2.0,
               hyper.gamma.rate + state.gamma.squaredNorm() / 2.0};
  const Eigen::VectorXd da = (state.alpha.array() - state.alpha0).matrix();
  const Eigen::VectorXd db = (state.beta.array() - state.beta0).matrix();
  out.alpha = {hyper.alpha.shape + n / 2.0,
               hyper.alpha.rate + quadratic(coefficient_block(family, graph, state, true), da) / 2.0};
  out.beta = {hyper.beta.shape + n / 2.0,
              hyper.beta.rate + quadratic(coefficient_block(family, graph, state, false), db) / 2.0};
  return out;
}

double flip_probability(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                        const Eigen::VectorXd& v, double center, double tau2, double phi, int edge) {
  std::vector<std::uint8_t> on(w.begin(), w.end());
  std::vector<std::uint8_t> off(w.begin(), w.end());
  on[edge] = 1;
  off[edge] = 0;
  const Eigen::VectorXd dev = (v.array() - center).matrix();
  const double l1 = log_density(graph, on, rho, dev, tau2) + std::log(phi);
  const double l0 = log_density(graph, off, rho, dev, tau2) + std::log(1.0 - phi);
  return 1.0 / (1.0 + std::exp(l0 - l1));
}

double determinant_ratio(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                         int edge) {
  std::vector<std::uint8_t> on(w.begin(), w.end());
  std::vector<std::uint8_t> off(w.begin(), w.end());
  on[edge] = 1;
  off[edge] = 0;
  return precision(graph, on, rho).determinant() / precision(graph, off, rho).determinant();
}

double BorderEnumeration::conditional(std::span<const std::uint8_t> w, int edge) const {
  std::size_t base = 0;
  for (int e = 0; e < edges; ++e) {
    if (w[e]) base |= std::size_t{1} << e;
  }
  const std::size_t with = base | (std::size_t{1} << edge);
  const std::size_t without = base & ~(std::size_t{1} << edge);
  return 1.0 / (1.0 + std::exp(log_density[without] - log_density[with]));
}

double BorderEnumeration::marginal(int edge) const {
  const double top = *std::max_element(log_density.begin(), log_density.end());
  double on = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < log_density.size(); ++k) {
    const double p = std::exp(log_density[k] - top);
    total += p;
    if (k & (std::size_t{1} << edge)) on += p;
  }
  return on / total;
}

BorderEnumeration enumerate_w_posterior(const AdjacencyGraph& graph, const Eigen::VectorXd& v,
                                        double center, double tau2, double rho, double phi) {
  const int m = graph.edge_count();
  if (m > kMaxEnumeratedEdges) {
    throw InputError("enumeration supports at most " + std::to_string(kMaxEnumeratedEdges) + " edges");
  }
  BorderEnumeration out;
  out.edges = m;
  if (m == 0) return out;
  const Eigen::VectorXd dev = (v.array() - center).matrix();
  out.log_density.resize(std::size_t{1} << m);
  std::vector<std::uint8_t> w(m);
  for (std::size_t k = 0; k < out.log_density.size(); ++k) {
    int active = 0;
    for (int e = 0; e < m; ++e) {
      w[e] = (k >> e) & 1U;
      active += w[e];
    }
    out.log_density[k] = log_density(graph, w, rho, dev, tau2) + active * std::log(phi) +
                         (m - active) * std::log(1.0 - phi);
  }
  return out;
}

}  // namespace oracle

}  // namespace areltrend
