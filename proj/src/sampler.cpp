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

#include "areltrend/sampler.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include <spdlog/spdlog.h>

#include "areltrend/error.hpp"
#include "areltrend/evaluate.hpp"
#include "areltrend/kernels.hpp"

namespace areltrend {

// ---- DesignMatrix ---------------------------------------------------------------------

DesignMatrix::DesignMatrix(Eigen::MatrixXd y, Eigen::MatrixXd Z, std::vector<int> train_columns)
    : y_(std::move(y)), Z_(std::move(Z)), columns_(std::move(train_columns)) {
  if (Z_.rows() != y_.rows()) throw DimensionError("covariate rows do not match panel units");
  if (columns_.empty()) throw InputError("no training periods");
  for (const int c : columns_) {
    if (c < 0 || c >= y_.cols()) throw DimensionError("training column out of range");
  }
  build_crossproducts();
}

void DesignMatrix::build_crossproducts() {
  const int n = this->n();
  const int d = this->d();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (const int c : columns_) {
    const double t = c + 1.0;
    s0 += 1.0;
    s1 += t;
    s2 += t * t;
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(d * d + 4 * d * n + 4 * n));
  if (d > 0) {
    const Eigen::MatrixXd ztz = s0 * (Z_.transpose() * Z_);
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) triplets.emplace_back(a, b, ztz(a, b));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double z = Z_(i, j);
      triplets.emplace_back(j, d + i, s0 * z);
      triplets.emplace_back(d + i, j, s0 * z);
      triplets.emplace_back(j, d + n + i, s1 * z);
      triplets.emplace_back(d + n + i, j, s1 * z);
    }
    triplets.emplace_back(d + i, d + i, s0);
    triplets.emplace_back(d + i, d + n + i, s1);
    triplets.emplace_back(d + n + i, d + i, s1);
    triplets.emplace_back(d + n + i, d + n + i, s2);
  }
  xtx_.resize(parameters(), parameters());
  xtx_.setFromTriplets(triplets.begin(), triplets.end());
  xty_ = kernels::parallel::design_rhs({y_, Z_, columns_});
}

SparseMatrix DesignMatrix::explicit_matrix() const {
  const int n = this->n();
  const int d = this->d();
  const int T = static_cast<int>(columns_.size());
  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < T; ++k) {
      const int row = i * T + k;
      for (int j = 0; j < d; ++j) triplets.emplace_back(row, j, Z_(i, j));
      triplets.emplace_back(row, d + i, 1.0);
      triplets.emplace_back(row, d + n + i, columns_[k] + 1.0);
    }
  }
  SparseMatrix X(observations(), parameters());
  X.setFromTriplets(triplets.begin(), triplets.end());
  return X;
}

double DesignMatrix::residual_sum_squares(const ThetaState& state) const {
  return kernels::parallel::residual_sum_squares({y_, Z_, columns_}, state.gamma, state.alpha,
                                                 state.beta);
}

void DesignMatrix::set_response(Eigen::MatrixXd y) {
  if (y.rows() != y_.rows() || y.cols() != y_.cols()) throw DimensionError("response shape changed");
  y_ = std::move(y);
  xty_ = kernels::parallel::design_rhs({y_, Z_, columns_});
}

// ---- theta -------------------------------------------------------------------------------

void ThetaConditional::condition(const JointPrior& prior, double sigma2) {
  const double inv_s2 = 1.0 / sigma2;
  precision_ = prior.omega0 + design_->xtx() * inv_s2;
  if (precision_.nonZeros() != pattern_nnz_) {
    factor_.analyzePattern(precision_);
    pattern_nnz_ = precision_.nonZeros();
    ++analyses_;
  }
  factor_.factorize(precision_);
  if (factor_.info() != Eigen::Success) {
    throw NumericalError("theta precision is not positive definite (sparse Cholesky failed)");
  }
  const Eigen::VectorXd rhs = prior.omega0 * prior.theta0 + design_->xty() * inv_s2;
  mean_ = factor_.solve(rhs);
}

Eigen::MatrixXd ThetaConditional::covariance() const {
  const auto p = precision_.rows();
  return factor_.solve(Eigen::MatrixXd::Identity(p, p));
}

Eigen::VectorXd ThetaConditional::draw(Rng& rng) const {
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  // Q = P' L L' P, so P' L^{-T} z has covariance Q^{-1}.
  const Eigen::VectorXd u = factor_.matrixU().solve(z);
  return mean_ + factor_.permutationPinv() * u;
}

// ---- mean hyperparameters and variances ---------------------------------------------------

NormalLaw mean_hyper_conditional(const SparseMatrix& sigma_inv, const Eigen::VectorXd& v,
                                 double tau2) {
  const Eigen::VectorXd row_sums = sigma_inv * Eigen::VectorXd::Ones(v.size());
  const double denom = row_sums.sum();
  if (!(denom > 0.0)) throw NumericalError("1' Sigma^{-1} 1 is not positive");
  return {row_sums.dot(v) / denom, tau2 / denom};
}

VarianceConditionals variance_conditionals(const ThetaState& state, const DesignMatrix& design,
                                           const PriorSpec& prior,
                                           const SparseMatrix& sigma_inv_alpha,
                                           const SparseMatrix& sigma_inv_beta) {
  const double n = static_cast<double>(design.n());
  VarianceConditionals out;
  const double rss = design.residual_sum_squares(state);
  out.sigma = {prior.variance.sigma.shape + 0.5 * design.observations(),
               prior.variance.sigma.rate + 0.5 * rss};
  out.gamma = {prior.variance.gamma.shape + 0.5 * static_cast<double>(state.gamma.size()),
               prior.variance.gamma.rate + 0.5 * state.gamma.squaredNorm()};
  const Eigen::VectorXd da = state.alpha.array() - state.alpha0;
  const Eigen::VectorXd db = state.beta.array() - state.beta0;
  out.alpha = {prior.variance.alpha.shape + 0.5 * n,
               prior.variance.alpha.rate + 0.5 * da.dot(sigma_inv_alpha * da)};
  out.beta = {prior.variance.beta.shape + 0.5 * n,
              prior.variance.beta.rate + 0.5 * db.dot(sigma_inv_beta * db)};
  return out;
}

double log_beta_density(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

// ---- rho ----------------------------------------------------------------------------------

RhoUpdater::RhoUpdater(ModelFamily family, const AdjacencyGraph& graph, BetaPrior prior,
                       double mh_b)
    : family_(family), graph_(&graph), prior_(prior), mh_b_(mh_b) {}

double RhoUpdater::log_det(EdgeMask mask, double rho, int slot) {
  const SparseMatrix prec = car_precision(*graph_, mask, rho);
  auto& factor = factors_[slot];
  if (!analyzed_[slot]) {
    factor.analyzePattern(prec);
    analyzed_[slot] = true;
  }
  factor.factorize(prec);
  if (factor.info() != Eigen::Success) throw NumericalError("CAR precision factorization failed");
  const auto& diag = factor.vectorD();
  double total = 0.0;
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    if (!(diag(k) > 0.0)) throw NumericalError("CAR precision is not positive definite");
    total += std::log(diag(k));
  }
  return total;
}

double RhoUpdater::log_target(double rho, const ThetaState& state) {
  if (!(rho > 0.0 && rho < 1.0)) return -std::numeric_limits<double>::infinity();
  const EdgeMask mask_alpha =
      has_variable_alpha(family_) ? EdgeMask(state.w_alpha) : EdgeMask();
  const EdgeMask mask_beta = has_variable_beta(family_) ? EdgeMask(state.w_beta) : EdgeMask();
  const double qa =
      kernels::parallel::car_quadratic_form(*graph_, mask_alpha, rho, state.alpha, state.alpha0);
  const double qb =
      kernels::parallel::car_quadratic_form(*graph_, mask_beta, rho, state.beta, state.beta0);
  return 0.5 * log_det(mask_alpha, rho, 0) - qa / (2.0 * state.tau2_alpha) +
         0.5 * log_det(mask_beta, rho, 1) - qb / (2.0 * state.tau2_beta) +
         log_beta_density(rho, prior_.a, prior_.b);
}

double RhoUpdater::log_proposal(double to, double from) const {
  return log_beta_density(to, mh_b_ * from / (1.0 - from), mh_b_);
}

double RhoUpdater::log_acceptance(double proposed, const ThetaState& state) {
  return log_target(proposed, state) - log_target(state.rho, state) +
         log_proposal(state.rho, proposed) - log_proposal(proposed, state.rho);
}

bool RhoUpdater::update(ThetaState& state, Rng& rng) {
  const double proposed = rng.beta(mh_b_ * state.rho / (1.0 - state.rho), mh_b_);
  if (!(proposed > 0.0 && proposed < 1.0)) return false;
  const double log_a = log_acceptance(proposed, state);
  if (std::log(rng.uniform()) < log_a) {
    state.rho = proposed;
    return true;
  }
  return false;
}

// ---- borders --------------------------------------------------------------------------------

BorderSampler::BorderSampler(const AdjacencyGraph& graph) : graph_(&graph) {}

void BorderSampler::reset(std::span<const std::uint8_t> w, double rho) {
  if (static_cast<int>(w.size()) != graph_->edge_count()) {
    throw DimensionError("border vector length does not match the edge count");
  }
  w_.assign(w.begin(), w.end());
  rho_ = rho;
  refactor();
}

void BorderSampler::refactor() {
  const SparseMatrix prec = car_precision(*graph_, w_, rho_);
  if (!analyzed_) {
    factor_.analyzePattern(prec);
    analyzed_ = true;
  }
  factor_.factorize(prec);
  if (factor_.info() != Eigen::Success) throw NumericalError("CAR precision factorization failed");
  corrections_.clear();
  coefficients_.clear();
  ++refreshes_;
}

Eigen::VectorXd BorderSampler::apply_inverse(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r = factor_.solve(x);
  for (std::size_t k = 0; k < corrections_.size(); ++k) {
    r -= (coefficients_[k] * corrections_[k].dot(x)) * corrections_[k];
  }
  return r;
}

double BorderSampler::edge_quadratic(int edge) const {
  const auto& e = graph_->edges()[edge];
  Eigen::VectorXd u = Eigen::VectorXd::Zero(graph_->size());
  u(e.i) = 1.0;
  u(e.j) = -1.0;
  const Eigen::VectorXd r = apply_inverse(u);
  return r(e.i) - r(e.j);
}

double BorderSampler::determinant_ratio(int edge) const {
  const double q = rho_ * edge_quadratic(edge);
  return w_[edge] ? 1.0 / (1.0 - q) : 1.0 + q;
}

double BorderSampler::flip_probability(int edge, const Eigen::VectorXd& v, double tau2,
                                       double phi) const {
  const auto& e = graph_->edges()[edge];
  const double diff = v(e.i) - v(e.j);
  const double log_odds = 0.5 * std::log(determinant_ratio(edge)) -
                          rho_ * diff * diff / (2.0 * tau2) + std::log(phi) - std::log1p(-phi);
  if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
  const double ex = std::exp(log_odds);
  return ex / (1.0 + ex);
}

void BorderSampler::set(int edge, std::uint8_t value) {
  value = value ? 1 : 0;
  if (w_[edge] == value) return;
  const auto& e = graph_->edges()[edge];
  Eigen::VectorXd u = Eigen::VectorXd::Zero(graph_->size());
  u(e.i) = 1.0;
  u(e.j) = -1.0;
  const double s = value ? rho_ : -rho_;
  Eigen::VectorXd y = apply_inverse(u);
  const double c = s / (1.0 + s * (y(e.i) - y(e.j)));
  w_[edge] = value;
  corrections_.push_back(std::move(y));
  coefficients_.push_back(c);
  if (static_cast<int>(corrections_.size()) >= kMaxPendingFlips) refactor();
}

double flip_probability(const AdjacencyGraph& graph, std::span<const std::uint8_t> w, double rho,
                        const Eigen::VectorXd& v, double tau2, double phi, int edge) {
  BorderSampler sampler(graph);
  sampler.reset(w, rho);
  return sampler.flip_probability(edge, v, tau2, phi);
}

int update_borders(BorderSampler& sampler, std::vector<std::uint8_t>& w, const Eigen::VectorXd& v,
                   double tau2, double phi, double rho, Rng& rng, std::vector<int>& flips) {
  sampler.reset(w, rho);
  int changed = 0;
  for (int e = 0; e < static_cast<int>(w.size()); ++e) {
    const double q = sampler.flip_probability(e, v, tau2, phi);
    const std::uint8_t value = rng.uniform() < q ? 1 : 0;
    if (value != w[e]) {
      sampler.set(e, value);
      w[e] = value;
      ++flips[e];
      ++changed;
    }
  }
  return changed;
}

BetaPrior phi_conditional(std::span<const std::uint8_t> w, BetaPrior prior) {
  double on = 0.0;
  for (const auto x : w) on += x ? 1.0 : 0.0;
  return {prior.a + on, prior.b + static_cast<double>(w.size()) - on};
}

// ---- Gibbs scan ------------------------------------------------------------------------------

GibbsSampler::GibbsSampler(const DesignMatrix& design, const AdjacencyGraph& graph,
                           ModelFamily family, PriorSpec prior, double mh_b)
    : design_(&design),
      graph_(&graph),
      family_(family),
      prior_(prior),
      theta_(design),
      rho_(family, graph, prior.rho, mh_b),
      borders_(graph) {
  if (!is_bayesian(family)) throw InputError("Gibbs sampling needs a Bayesian model family");
  if (graph.size() != design.n()) throw DimensionError("graph size does not match the panel");
  stats_.flips_alpha.assign(has_variable_alpha(family) ? graph.edge_count() : 0, 0);
  stats_.flips_beta.assign(has_variable_beta(family) ? graph.edge_count() : 0, 0);
}

double GibbsSampler::clip(double variance) {
  if (!(variance >= 1e-12)) {
    ++stats_.clipped_variances;
    return 1e-12;
  }
  return variance;
}

void GibbsSampler::step(ThetaState& state, Rng& rng) {
  const int d = design_->d();

  const JointPrior joint = build_joint_prior(family_, *graph_, state, d, prior_.flat_gamma);
  theta_.condition(joint, state.sigma2);
  state.set_theta(theta_.draw(rng));

  const SparseMatrix prec_alpha = coefficient_precision(family_, *graph_, state, true);
  const SparseMatrix prec_beta = coefficient_precision(family_, *graph_, state, false);
  if (update_mean_hyper_) {
    const auto la = mean_hyper_conditional(prec_alpha, state.alpha, state.tau2_alpha);
    state.alpha0 = la.mean + std::sqrt(la.variance) * rng.normal();
    const auto lb = mean_hyper_conditional(prec_beta, state.beta, state.tau2_beta);
    state.beta0 = lb.mean + std::sqrt(lb.variance) * rng.normal();
  }

  const auto vc = variance_conditionals(state, *design_, prior_, prec_alpha, prec_beta);
  state.sigma2 = clip(rng.inverse_gamma(vc.sigma.shape, vc.sigma.rate));
  if (!prior_.flat_gamma && d > 0) {
    state.tau2_gamma = clip(rng.inverse_gamma(vc.gamma.shape, vc.gamma.rate));
  }
  state.tau2_alpha = clip(rng.inverse_gamma(vc.alpha.shape, vc.alpha.rate));
  state.tau2_beta = clip(rng.inverse_gamma(vc.beta.shape, vc.beta.rate));

  if (has_spatial_prior(family_)) {
    ++stats_.rho_proposals;
    if (rho_.update(state, rng)) ++stats_.rho_accepts;
  }
  if (has_variable_alpha(family_)) {
    update_borders(borders_, state.w_alpha, state.alpha, state.tau2_alpha, state.phi_alpha,
                   state.rho, rng, stats_.flips_alpha);
  }
  if (has_variable_beta(family_)) {
    update_borders(borders_, state.w_beta, state.beta, state.tau2_beta, state.phi_beta, state.rho,
                   rng, stats_.flips_beta);
  }
  if (has_variable_alpha(family_)) {
    const auto post = phi_conditional(state.w_alpha, prior_.phi);
    state.phi_alpha = rng.beta(post.a, post.b);
  }
  if (has_variable_beta(family_)) {
    const auto post = phi_conditional(state.w_beta, prior_.phi);
    state.phi_beta = rng.beta(post.a, post.b);
  }
}

// ---- chains ------------------------------------------------------------------------------------

ChainOutput run_chain(const ChainInputs& inputs, int chain_index) {
  const auto& config = inputs.config;
  const auto& design = *inputs.design;
  const auto& graph = *inputs.graph;
  const auto family = config.family;
  const auto start = std::chrono::steady_clock::now();

  Rng rng(config.chain.seed, static_cast<std::uint64_t>(chain_index));
  ThetaState state = inputs.init;
  if (chain_index > 0 && config.disperse_starts) {
    state.sigma2 *= std::exp(rng.normal());
    state.tau2_alpha *= std::exp(rng.normal());
    state.tau2_beta *= std::exp(rng.normal());
    state.alpha0 += std::sqrt(state.tau2_alpha) * rng.normal();
    state.beta0 += std::sqrt(state.tau2_beta) * rng.normal();
    if (has_spatial_prior(family)) state.rho = 0.1 + 0.8 * rng.uniform();
  }

  GibbsSampler sampler(design, graph, family, inputs.prior, config.mh_b);

  const int retained = config.chain.retained();
  const int n = design.n();
  const int d = inputs.fixed_gamma.empty() ? design.d() : static_cast<int>(inputs.fixed_gamma.size());
  const int m = graph.edge_count();
  ChainOutput out;
  out.chain_index = chain_index;
  out.seed = config.chain.seed;
  out.family = family;
  out.gamma.resize(retained, d);
  out.alpha.resize(retained, n);
  out.beta.resize(retained, n);
  for (auto* v : {&out.alpha0, &out.beta0, &out.sigma2, &out.tau2_alpha, &out.tau2_beta,
                  &out.tau2_gamma}) {
    v->reserve(retained);
  }
  if (has_spatial_prior(family)) out.rho.reserve(retained);
  if (has_variable_alpha(family)) out.w_alpha.resize(retained, m);
  if (has_variable_beta(family)) out.w_beta.resize(retained, m);

  int row = 0;
  for (int iter = 0; iter < config.chain.n_iter; ++iter) {
    try {
      sampler.step(state, rng);
    } catch (const Error& e) {
      throw NumericalError("chain " + std::to_string(chain_index) + ", iteration " +
                           std::to_string(iter) + ": " + e.what());
    }
    if (iter < config.chain.burn_in || (iter - config.chain.burn_in + 1) % config.chain.thin != 0) {
      continue;
    }
    if (row >= retained) break;
    if (inputs.fixed_gamma.empty()) {
      out.gamma.row(row) = state.gamma.transpose();
    } else {
      for (int j = 0; j < d; ++j) out.gamma(row, j) = inputs.fixed_gamma[j];
    }
    out.alpha.row(row) = state.alpha.transpose();
    out.beta.row(row) = state.beta.transpose();
    out.alpha0.push_back(state.alpha0);
    out.beta0.push_back(state.beta0);
    out.sigma2.push_back(state.sigma2);
    out.tau2_alpha.push_back(state.tau2_alpha);
    out.tau2_beta.push_back(state.tau2_beta);
    out.tau2_gamma.push_back(state.tau2_gamma);
    if (has_spatial_prior(family)) out.rho.push_back(state.rho);
    if (has_variable_alpha(family)) {
      for (int e = 0; e < m; ++e) out.w_alpha(row, e) = state.w_alpha[e];
      out.phi_alpha.push_back(state.phi_alpha);
    }
    if (has_variable_beta(family)) {
      for (int e = 0; e < m; ++e) out.w_beta(row, e) = state.w_beta[e];
      out.phi_beta.push_back(state.phi_beta);
    }
    ++row;
  }
  out.stats = sampler.stats();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  spdlog::debug("chain {} finished: {} draws, {:.2f} s, rho acceptance {}/{}", chain_index,
                out.draws(), out.seconds, out.stats.rho_accepts, out.stats.rho_proposals);
  return out;
}

ChainOutput merge_chains(std::span<const ChainOutput> chains) {
  if (chains.empty()) throw InputError("no chains to merge");
  if (chains.size() == 1) return chains.front();
  ChainOutput out;
  out.chain_index = -1;
  out.seed = chains.front().seed;
  out.family = chains.front().family;
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.draws();
  auto stack = [&](auto member) {
    using M = std::decay_t<decltype(chains.front().*member)>;
    M result(rows, (chains.front().*member).cols());
    Eigen::Index r = 0;
    for (const auto& c : chains) {
      const auto& part = c.*member;
      if (part.size() > 0) result.middleRows(r, part.rows()) = part;
      r += c.draws();
    }
    return result;
  };
  out.gamma = stack(&ChainOutput::gamma);
  out.alpha = stack(&ChainOutput::alpha);
  out.beta = stack(&ChainOutput::beta);
  if (chains.front().w_alpha.size() > 0) out.w_alpha = stack(&ChainOutput::w_alpha);
  if (chains.front().w_beta.size() > 0) out.w_beta = stack(&ChainOutput::w_beta);
  auto concat = [&](std::vector<double> ChainOutput::*member) {
    std::vector<double> result;
    for (const auto& c : chains) {
      const auto& part = c.*member;
      result.insert(result.end(), part.begin(), part.end());
    }
    return result;
  };
  out.alpha0 = concat(&ChainOutput::alpha0);
  out.beta0 = concat(&ChainOutput::beta0);
  out.sigma2 = concat(&ChainOutput::sigma2);
  out.tau2_alpha = concat(&ChainOutput::tau2_alpha);
  out.tau2_beta = concat(&ChainOutput::tau2_beta);
  out.tau2_gamma = concat(&ChainOutput::tau2_gamma);
  out.rho = concat(&ChainOutput::rho);
  out.phi_alpha = concat(&ChainOutput::phi_alpha);
  out.phi_beta = concat(&ChainOutput::phi_beta);
  out.stats = chains.front().stats;
  for (std::size_t c = 1; c < chains.size(); ++c) {
    const auto& s = chains[c].stats;
    out.stats.rho_proposals += s.rho_proposals;
    out.stats.rho_accepts += s.rho_accepts;
    out.stats.clipped_variances += s.clipped_variances;
    for (std::size_t e = 0; e < s.flips_alpha.size(); ++e) out.stats.flips_alpha[e] += s.flips_alpha[e];
    for (std::size_t e = 0; e < s.flips_beta.size(); ++e) out.stats.flips_beta[e] += s.flips_beta[e];
  }
  for (const auto& c : chains) out.seconds += c.seconds;
  return out;
}

double potential_scale_reduction(std::span<const std::vector<double>> chains) {
  const auto m = chains.size();
  if (m < 2) throw InputError("potential scale reduction needs at least two chains");
  const auto len = chains.front().size();
  if (len < 2) throw InputError("potential scale reduction needs at least two draws per chain");
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    if (chains[c].size() != len) throw DimensionError("chains differ in length");
    means[c] = std::accumulate(chains[c].begin(), chains[c].end(), 0.0) / len;
    double ss = 0.0;
    for (const double x : chains[c]) ss += (x - means[c]) * (x - means[c]);
    vars[c] = ss / (len - 1);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double between = 0.0;
  for (const double mu : means) between += (mu - grand) * (mu - grand);
  between *= static_cast<double>(len) / (m - 1);
  const double within = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  const double pooled = (len - 1.0) / len * within + between / len;
  return std::sqrt(pooled / within);
}

// ---- model runs -----------------------------------------------------------------------------------

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

void check_alignment(const ArealPanel& panel, const CovariateMatrix& covariates,
                     const AdjacencyGraph& graph) {
  if (covariates.n() != panel.n() || covariates.unit_ids != panel.unit_ids()) {
    throw DimensionError("covariate units do not match the crime panel");
  }
  if (graph.size() != panel.n() || graph.unit_ids() != panel.unit_ids()) {
    throw DimensionError("adjacency graph units do not match the crime panel");
  }
}

}  // namespace

ThetaState initial_state(const ArealPanel& panel, const CovariateMatrix& covariates,
                         const AdjacencyGraph& graph, const ModelConfig& config,
                         const PriorSpec& prior, std::span<const int> train_columns) {
  (void)prior;
  ThetaState state;
  NoShrinkageFit fit;
  if (train_columns.size() >= 2) {
    fit = fit_no_shrinkage(panel, covariates, train_columns);
    state.gamma = fit.stage1_gamma;
    state.alpha = fit.fit.alpha;
    state.beta = fit.fit.beta;
  } else {
    // One period: unit levels only, no slopes or covariate effects.
    state.gamma = Eigen::VectorXd::Zero(covariates.d());
    state.alpha = panel.y().col(train_columns.front());
    state.beta = Eigen::VectorXd::Zero(panel.n());
  }
  state.alpha0 = state.alpha.mean();
  state.beta0 = state.beta.mean();
  double sigma2 = fit.residual_dof > 0 ? fit.rss / fit.residual_dof : 0.0;
  if (!(sigma2 > 0.0)) {
    Eigen::MatrixXd y_train = panel.y()(Eigen::all, std::vector<int>(train_columns.begin(), train_columns.end()));
    sigma2 = std::max(1e-6, (y_train.array() - y_train.mean()).square().mean());
  }
  state.sigma2 = sigma2;
  state.tau2_alpha = std::max(1e-6, sample_variance(state.alpha));
  state.tau2_beta = std::max(1e-6, sample_variance(state.beta));
  state.tau2_gamma = state.gamma.size() > 0
                         ? std::max(1e-6, state.gamma.squaredNorm() / static_cast<double>(state.gamma.size()))
                         : 1.0;
  state.rho = 0.5;
  const auto m = static_cast<std::size_t>(graph.edge_count());
  if (has_variable_alpha(config.family)) state.w_alpha.assign(m, 1);
  if (has_variable_beta(config.family)) state.w_beta.assign(m, 1);
  state.phi_alpha = config.phi_beta_prior().mean();
  state.phi_beta = config.phi_beta_prior().mean();
  return state;
}

PosteriorRun run_model(const ArealPanel& panel, const CovariateMatrix& covariates,
                       const AdjacencyGraph& graph, const ModelConfig& config,
                       std::span<const int> train_columns) {
  config.validate();
  if (!is_bayesian(config.family)) throw InputError("run_model needs a Bayesian model family");
  check_alignment(panel, covariates, graph);

  PosteriorRun run;
  run.config = config;
  run.unit_ids = panel.unit_ids();
  run.covariate_names = covariates.names;

  VarianceHyper tuned{};
  if (config.prior_mode == PriorMode::EmpiricalBayes && !config.ig_hyper) {
    tuned = tune_empirical_bayes(panel, covariates, train_columns, config.prior_cv);
  }
  run.prior = make_prior_spec(config, tuned);

  std::vector<double> fixed_gamma;
  ArealPanel work_panel = panel;
  CovariateMatrix work_covariates = covariates;
  if (config.two_stage) {
    const auto stage = fit_no_shrinkage(panel, covariates, train_columns);
    const Eigen::VectorXd offset = covariates.Z * stage.stage1_gamma;
    Eigen::MatrixXd y = panel.y();
    y.colwise() -= offset;
    work_panel = ArealPanel::from_responses(panel.unit_ids(), panel.periods(), std::move(y));
    work_covariates.Z.resize(panel.n(), 0);
    work_covariates.names.clear();
    fixed_gamma.assign(stage.stage1_gamma.data(), stage.stage1_gamma.data() + stage.stage1_gamma.size());
  }

  const DesignMatrix design(work_panel.y(), work_covariates.Z,
                            std::vector<int>(train_columns.begin(), train_columns.end()));
  ChainInputs inputs;
  inputs.design = &design;
  inputs.graph = &graph;
  inputs.config = config;
  inputs.prior = run.prior;
  inputs.init = initial_state(work_panel, work_covariates, graph, config, run.prior, train_columns);
  inputs.fixed_gamma = std::move(fixed_gamma);

  const int chains = config.chain.n_chains;
  run.chains.resize(chains);
  std::vector<std::exception_ptr> errors(chains);
#pragma omp parallel for schedule(dynamic, 1) if (chains > 1)
  for (int c = 0; c < chains; ++c) {
    try {
      run.chains[c] = run_chain(inputs, c);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  run.merged = merge_chains(run.chains);
  return run;
}

}  // namespace areltrend
