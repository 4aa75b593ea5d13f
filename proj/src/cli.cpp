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

#include "areltrend/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "areltrend/csv.hpp"
#include "areltrend/error.hpp"
#include "areltrend/evaluate.hpp"
#include "areltrend/sampler.hpp"
#include "areltrend/summarize.hpp"
#include "areltrend/synthgen.hpp"

namespace areltrend::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- utilities ---------------------------------------------------------------------------

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("areltrend");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
  });
  const char* env = std::getenv("ARELTREND_LOG");
  spdlog::set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &length);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int k = 0; k < length; ++k) {
    std::snprintf(byte, sizeof byte, "%02x", digest[k]);
    hex += byte;
  }
  return hex;
}

namespace {

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void set_jobs(int jobs) {
  if (jobs < 0) throw InputError("--jobs must be non-negative");
  if (jobs > 0) omp_set_num_threads(jobs);
}

json inverse_gamma_json(const InverseGamma& ig) { return json::array({ig.shape, ig.rate}); }

InverseGamma inverse_gamma_from_json(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 2) {
    throw InputError(std::string("config: ig.") + name + " must be [shape, rate]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json config_json(const ModelConfig& c) {
  json j = {{"model", cli_name(c.family)},
            {"iters", c.chain.n_iter},
            {"burnin", c.chain.burn_in},
            {"thin", c.chain.thin},
            {"chains", c.chain.n_chains},
            {"seed", c.chain.seed},
            {"prior", c.prior_mode == PriorMode::EmpiricalBayes ? "eb" : "noninf"},
            {"prior_cv", c.prior_cv},
            {"rho_prior", json::array({c.rho_prior.a, c.rho_prior.b})},
            {"phi_prior", c.phi_prior == PhiPrior::MostlyConnected ? "connected" : "barriers"},
            {"mh_b", c.mh_b},
            {"two_stage", c.two_stage},
            {"disperse_starts", c.disperse_starts}};
  if (c.ig_hyper) {
    j["ig"] = {{"sigma", inverse_gamma_json(c.ig_hyper->sigma)},
               {"alpha", inverse_gamma_json(c.ig_hyper->alpha)},
               {"beta", inverse_gamma_json(c.ig_hyper->beta)},
               {"gamma", inverse_gamma_json(c.ig_hyper->gamma)}};
  }
  return j;
}

PriorMode parse_prior(const std::string& text) {
  if (text == "eb") return PriorMode::EmpiricalBayes;
  if (text == "noninf") return PriorMode::Noninformative;
  throw InputError("--prior must be eb or noninf, got '" + text + "'");
}

PhiPrior parse_phi_prior(const std::string& text) {
  if (text == "connected") return PhiPrior::MostlyConnected;
  if (text == "barriers") return PhiPrior::MostlyBarriers;
  throw InputError("--phi-prior must be connected or barriers, got '" + text + "'");
}

void apply_config_file(const fs::path& path, ModelConfig& c) {
  const json j = read_json(path);
  if (!j.is_object()) throw InputError(path.string() + ": expected a JSON object");
  static const std::set<std::string> known = {
      "model", "iters", "burnin", "thin", "chains", "seed", "prior", "prior_cv", "rho_prior",
      "phi_prior", "mh_b", "two_stage", "disperse_starts", "ig"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw InputError(path.string() + ": unknown key '" + key + "'");
    }
    if (j.contains("model")) c.family = parse_model_family(j["model"].get<std::string>());
    if (j.contains("iters")) c.chain.n_iter = j["iters"].get<int>();
    if (j.contains("burnin")) c.chain.burn_in = j["burnin"].get<int>();
    if (j.contains("thin")) c.chain.thin = j["thin"].get<int>();
    if (j.contains("chains")) c.chain.n_chains = j["chains"].get<int>();
    if (j.contains("seed")) c.chain.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("prior")) c.prior_mode = parse_prior(j["prior"].get<std::string>());
    if (j.contains("prior_cv")) c.prior_cv = j["prior_cv"].get<double>();
    if (j.contains("rho_prior")) {
      const auto& r = j["rho_prior"];
      if (!r.is_array() || r.size() != 2) throw InputError("config: rho_prior must be [a, b]");
      c.rho_prior = {r[0].get<double>(), r[1].get<double>()};
    }
    if (j.contains("phi_prior")) c.phi_prior = parse_phi_prior(j["phi_prior"].get<std::string>());
    if (j.contains("mh_b")) c.mh_b = j["mh_b"].get<double>();
    if (j.contains("two_stage")) c.two_stage = j["two_stage"].get<bool>();
    if (j.contains("disperse_starts")) c.disperse_starts = j["disperse_starts"].get<bool>();
    if (j.contains("ig")) {
      const auto& ig = j["ig"];
      VarianceHyper h;
      h.sigma = inverse_gamma_from_json(ig.at("sigma"), "sigma");
      h.alpha = inverse_gamma_from_json(ig.at("alpha"), "alpha");
      h.beta = inverse_gamma_from_json(ig.at("beta"), "beta");
      h.gamma = ig.contains("gamma") ? inverse_gamma_from_json(ig["gamma"], "gamma")
                                     : InverseGamma{102.0, 101.0};
      c.ig_hyper = h;
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

ModelConfig resolve_config(const ModelArgs& args) {
  ModelConfig c;
  if (args.config) apply_config_file(*args.config, c);
  if (args.model) c.family = parse_model_family(*args.model);
  if (args.iters) c.chain.n_iter = *args.iters;
  if (args.burnin) c.chain.burn_in = *args.burnin;
  if (args.thin) c.chain.thin = *args.thin;
  if (args.chains) c.chain.n_chains = *args.chains;
  if (args.seed) c.chain.seed = *args.seed;
  if (args.prior) c.prior_mode = parse_prior(*args.prior);
  if (args.phi_prior) c.phi_prior = parse_phi_prior(*args.phi_prior);
  if (args.two_stage) c.two_stage = true;
  c.validate();
  return c;
}

// ---- inputs --------------------------------------------------------------------------------

namespace {

AdjacencyGraph graph_from_edges(const fs::path& path, const ArealPanel& panel,
                                const std::vector<std::string>& excluded) {
  const auto pairs = read_edges_csv(path);
  std::set<std::string> dropped(excluded.begin(), excluded.end());
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& [a, b] : pairs) {
    const bool ka = panel.find_unit(a).has_value();
    const bool kb = panel.find_unit(b).has_value();
    if (ka && kb) {
      kept.emplace_back(a, b);
      continue;
    }
    for (const auto& [id, known] : {std::pair{a, ka}, std::pair{b, kb}}) {
      if (!known && !dropped.contains(id)) {
        throw DimensionError(path.string() + ": edge references unit '" + id +
                             "' absent from the crime panel");
      }
    }
  }
  return AdjacencyGraph::from_id_pairs(panel.unit_ids(), kept);
}

AdjacencyGraph graph_from_polygons(const fs::path& path, const ArealPanel& panel) {
  const auto all = read_polygons_geojson(path);
  std::map<std::string, const UnitGeometry*> by_id;
  for (const auto& g : all) by_id[g.unit_id] = &g;
  std::vector<UnitGeometry> units;
  units.reserve(panel.unit_ids().size());
  for (const auto& id : panel.unit_ids()) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DimensionError(path.string() + ": unit '" + id + "' has no polygon");
    units.push_back(*it->second);
  }
  return queen_contiguity(units);
}

}  // namespace

LoadedInputs load_inputs(const InputArgs& args) {
  LoadedInputs out;
  out.files.push_back(args.crimes);
  ArealPanel panel = read_crimes_csv(args.crimes);
  std::vector<std::string> listed;
  if (args.exclusions) {
    listed = read_id_list(*args.exclusions);
    out.files.push_back(*args.exclusions);
  }
  if (args.covariates && args.covariates_raw) {
    throw InputError("pass either --covariates or --covariates-raw, not both");
  }
  if (args.covariates_raw) {
    out.files.push_back(*args.covariates_raw);
    std::map<std::string, std::string> ethnicity;
    if (args.ethnicity_map) {
      ethnicity = read_ethnicity_map(*args.ethnicity_map);
      out.files.push_back(*args.ethnicity_map);
    }
    const auto raw = read_covariates_raw_csv(*args.covariates_raw, ethnicity);
    auto result = apply_exclusions(panel, raw, listed);
    out.panel = std::move(result.panel);
    out.covariates = build_covariates(result.raw);
    out.excluded_ids = std::move(result.excluded_ids);
  } else {
    out.panel = exclude_units(panel, listed);
    out.excluded_ids = listed;
    if (args.covariates) {
      out.files.push_back(*args.covariates);
      out.covariates = read_covariates_csv(*args.covariates).select_units(out.panel.unit_ids());
    } else {
      spdlog::warn("no covariates given; fitting without predictors");
      out.covariates.Z.resize(out.panel.n(), 0);
      out.covariates.unit_ids = out.panel.unit_ids();
    }
  }
  if (args.edges && args.polygons) throw InputError("pass either --edges or --polygons, not both");
  if (args.edges) {
    out.files.push_back(*args.edges);
    out.graph = graph_from_edges(*args.edges, out.panel, out.excluded_ids);
  } else if (args.polygons) {
    out.files.push_back(*args.polygons);
    out.graph = graph_from_polygons(*args.polygons, out.panel);
  }
  spdlog::info("{} units, {} periods, {} covariates, {} excluded", out.panel.n(),
               out.panel.periods_count(), out.covariates.d(), out.excluded_ids.size());
  return out;
}

namespace {

void require_graph(const LoadedInputs& in, ModelFamily family) {
  if (has_spatial_prior(family) && !in.graph) {
    throw DimensionError("--model " + std::string(cli_name(family)) +
                         " needs an adjacency graph: pass --edges or --polygons");
  }
}

json manifest_json(const std::string& command, const std::vector<fs::path>& files,
                   const json& config, double seconds) {
  json inputs = json::array();
  for (const auto& f : files) inputs.push_back({{"path", f.string()}, {"sha256", sha256_file(f)}});
  return {{"software", "areltrend"},
          {"version", kVersion},
          {"command", command},
          {"config", config},
          {"inputs", inputs},
          {"seconds", seconds}};
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string edge_label(const AdjacencyGraph& g, int e) {
  return g.unit_ids()[g.edges()[e].i] + "|" + g.unit_ids()[g.edges()[e].j];
}

void write_draws_csv(const fs::path& path, const PosteriorRun& run, const AdjacencyGraph& graph) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  const auto family = run.config.family;
  std::vector<std::string> header = {"chain", "draw", "alpha0", "beta0", "sigma2", "tau2_alpha",
                                     "tau2_beta", "tau2_gamma"};
  if (has_spatial_prior(family)) header.push_back("rho");
  if (has_variable_alpha(family)) header.push_back("phi_alpha");
  if (has_variable_beta(family)) header.push_back("phi_beta");
  for (const auto& name : run.covariate_names) header.push_back("gamma:" + name);
  for (const auto& id : run.unit_ids) header.push_back("alpha:" + id);
  for (const auto& id : run.unit_ids) header.push_back("beta:" + id);
  if (has_variable_alpha(family)) {
    for (int e = 0; e < graph.edge_count(); ++e) header.push_back("w_alpha:" + edge_label(graph, e));
  }
  if (has_variable_beta(family)) {
    for (int e = 0; e < graph.edge_count(); ++e) header.push_back("w_beta:" + edge_label(graph, e));
  }
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << csv::escape(header[k]);
  out << '\n';
  const auto f = [](double v) { return csv::format_double(v); };
  for (const auto& c : run.chains) {
    for (int r = 0; r < c.draws(); ++r) {
      out << c.chain_index << ',' << r << ',' << f(c.alpha0[r]) << ',' << f(c.beta0[r]) << ','
          << f(c.sigma2[r]) << ',' << f(c.tau2_alpha[r]) << ',' << f(c.tau2_beta[r]) << ','
          << f(c.tau2_gamma[r]);
      if (has_spatial_prior(family)) out << ',' << f(c.rho[r]);
      if (has_variable_alpha(family)) out << ',' << f(c.phi_alpha[r]);
      if (has_variable_beta(family)) out << ',' << f(c.phi_beta[r]);
      for (Eigen::Index j = 0; j < c.gamma.cols(); ++j) out << ',' << f(c.gamma(r, j));
      for (Eigen::Index j = 0; j < c.alpha.cols(); ++j) out << ',' << f(c.alpha(r, j));
      for (Eigen::Index j = 0; j < c.beta.cols(); ++j) out << ',' << f(c.beta(r, j));
      for (Eigen::Index j = 0; j < c.w_alpha.cols(); ++j) out << ',' << int{c.w_alpha(r, j)};
      for (Eigen::Index j = 0; j < c.w_beta.cols(); ++j) out << ',' << int{c.w_beta(r, j)};
      out << '\n';
    }
  }
}

json chain_meta_json(const PosteriorRun& run) {
  json chains = json::array();
  for (const auto& c : run.chains) {
    json flips_a = c.stats.flips_alpha;
    json flips_b = c.stats.flips_beta;
    chains.push_back({{"chain", c.chain_index},
                      {"seed", c.seed},
                      {"stream", c.chain_index},
                      {"draws", c.draws()},
                      {"seconds", c.seconds},
                      {"rho_proposals", c.stats.rho_proposals},
                      {"rho_accepts", c.stats.rho_accepts},
                      {"clipped_variances", c.stats.clipped_variances},
                      {"border_changes_alpha", flips_a},
                      {"border_changes_beta", flips_b}});
  }
  json meta = {{"model", cli_name(run.config.family)},
               {"iters", run.config.chain.n_iter},
               {"burnin", run.config.chain.burn_in},
               {"thin", run.config.chain.thin},
               {"chains", chains},
               {"prior",
                {{"sigma", inverse_gamma_json(run.prior.variance.sigma)},
                 {"tau_alpha", inverse_gamma_json(run.prior.variance.alpha)},
                 {"tau_beta", inverse_gamma_json(run.prior.variance.beta)},
                 {"tau_gamma", inverse_gamma_json(run.prior.variance.gamma)},
                 {"flat_gamma", run.prior.flat_gamma},
                 {"rho", json::array({run.prior.rho.a, run.prior.rho.b})},
                 {"phi", json::array({run.prior.phi.a, run.prior.phi.b})}}}};
  if (run.chains.size() >= 2) {
    json rhat;
    for (const auto& [name, member] :
         {std::pair{"sigma2", &ChainOutput::sigma2}, std::pair{"alpha0", &ChainOutput::alpha0},
          std::pair{"beta0", &ChainOutput::beta0}, std::pair{"tau2_alpha", &ChainOutput::tau2_alpha},
          std::pair{"tau2_beta", &ChainOutput::tau2_beta}}) {
      std::vector<std::vector<double>> parts;
      for (const auto& c : run.chains) parts.push_back(c.*member);
      rhat[name] = potential_scale_reduction(parts);
    }
    meta["potential_scale_reduction"] = rhat;
  }
  return meta;
}

void write_estimates_csv(const fs::path& path, const std::vector<std::string>& ids,
                         const FitResult& fit) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "unit_id,alpha,beta\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << csv::escape(ids[i]) << ',' << csv::format_double(fit.alpha(i)) << ','
        << csv::format_double(fit.beta(i)) << '\n';
  }
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

// ---- fit ------------------------------------------------------------------------------------

void cmd_fit(const FitArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  set_jobs(args.jobs);
  const ModelConfig config = resolve_config(args.model);
  const auto family = config.family;
  if (is_bayesian(family)) {
    const long long draws = static_cast<long long>(config.chain.retained()) * config.chain.n_chains;
    if (draws < kMinSummaryDraws) {
      throw InputError("--iters/--burnin/--thin/--chains retain " + std::to_string(draws) +
                       " draws; summaries need at least " + std::to_string(kMinSummaryDraws));
    }
  }
  const LoadedInputs in = load_inputs(args.inputs);
  require_graph(in, family);
  const ArealPanel& panel = in.panel;
  const int T = panel.periods_count();

  std::optional<int> holdout;
  if (!args.holdout) {
    holdout = T - 1;
  } else if (*args.holdout != "none") {
    try {
      holdout = panel.column_of(std::stoi(*args.holdout));
    } catch (const std::logic_error&) {
      throw InputError("--holdout must be a period label or none, got '" + *args.holdout + "'");
    }
  }
  const auto train = holdout ? training_columns(T, *holdout) : training_columns(T, -1);
  if (train.empty()) throw InputError("no training periods left after the holdout");

  prepare_output(args.out);
  const AdjacencyGraph graph = in.graph ? *in.graph : AdjacencyGraph(panel.unit_ids(), {});

  FitResult fit;
  json state = {{"model", cli_name(family)},
                {"unit_ids", panel.unit_ids()},
                {"periods", panel.periods()},
                {"covariate_names", in.covariates.names},
                {"excluded_ids", in.excluded_ids}};
  std::vector<int> train_periods;
  for (const int c : train) train_periods.push_back(panel.periods()[c]);
  state["train_periods"] = train_periods;
  json edges = json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back(json::array({graph.unit_ids()[e.i], graph.unit_ids()[e.j]}));
  }
  state["edges"] = edges;

  if (is_bayesian(family)) {
    const PosteriorRun run = run_model(panel, in.covariates, graph, config, train);
    fit = posterior_mean_fit(run);
    const auto summaries = summarize_units(run.merged, run.unit_ids);
    write_summary_csv(args.out / "summary.csv", summaries);
    state["alpha0_mean"] = summaries.alpha0_mean;
    state["beta0_mean"] = summaries.beta0_mean;
    state["draws"] = run.merged.draws();
    if (has_variable_alpha(family)) state["p_barrier_alpha"] = barrier_probabilities(run.merged.w_alpha);
    if (has_variable_beta(family)) state["p_barrier_beta"] = barrier_probabilities(run.merged.w_beta);
    write_json(args.out / "chain_meta.json", chain_meta_json(run));
    if (args.save_draws) write_draws_csv(args.out / "draws.csv", run, graph);
  } else {
    fit = fit_ols(panel, in.covariates, family, train);
    write_estimates_csv(args.out / "estimates.csv", panel.unit_ids(), fit);
  }
  state["gamma_mean"] = to_vector(fit.gamma);
  state["alpha_mean"] = to_vector(fit.alpha);
  state["beta_mean"] = to_vector(fit.beta);
  const int in_cols[] = {train.back()};
  state["mse_in"] = {{"period", panel.periods()[train.back()]},
                     {"value", mse(panel, in.covariates, fit, in_cols)}};
  if (holdout) {
    const int out_cols[] = {*holdout};
    state["mse_out"] = {{"period", panel.periods()[*holdout]},
                        {"value", mse(panel, in.covariates, fit, out_cols)}};
  }
  write_json(args.out / "fit_state.json", state);
  json cfg = config_json(config);
  cfg["holdout"] = holdout ? json(panel.periods()[*holdout]) : json("none");
  write_json(args.out / "manifest.json", manifest_json("fit", in.files, cfg, elapsed(start)));
  spdlog::info("fit written to {}", args.out.string());
}

// ---- evaluate -------------------------------------------------------------------------------

void cmd_evaluate(const EvaluateArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  set_jobs(args.jobs);
  const ModelConfig config = resolve_config(args.model);
  std::vector<ModelFamily> families;
  if (args.models.empty()) {
    families = {ModelFamily::GlobalTrend, ModelFamily::NoShrinkage, ModelFamily::GlobalShrinkage,
                ModelFamily::SpatialCAR, ModelFamily::VariableBorders};
  } else {
    for (const auto& m : args.models) families.push_back(parse_model_family(m));
  }
  const LoadedInputs in = load_inputs(args.inputs);
  for (const auto f : families) require_graph(in, f);

  EvaluationOptions options;
  options.holdout_period = args.holdout;
  options.cross_validate = args.cv;
  const AdjacencyGraph* graph = in.graph ? &*in.graph : nullptr;
  const auto table = compare_models(in.panel, in.covariates, graph, families, config, options);

  prepare_output(args.out);
  {
    std::ofstream out(args.out / "comparison.csv");
    if (!out) throw InputError("cannot write comparison.csv");
    out << "model,mse_in,mse_out,pct_change,mse_cv,morans_i\n";
    const auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; };
    for (const auto& r : table.rows) {
      out << to_string(r.family) << ',' << csv::format_double(r.mse_in) << ','
          << csv::format_double(r.mse_out) << ',' << opt(r.pct_change) << ','
          << (r.cv ? csv::format_double(r.cv->mse_cv) : "") << ',' << opt(r.moran_beta) << '\n';
    }
  }
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row = {{"model", to_string(r.family)}, {"mse_in", r.mse_in}, {"mse_out", r.mse_out}};
    if (r.pct_change) row["pct_change"] = *r.pct_change;
    if (r.moran_beta) row["morans_i"] = *r.moran_beta;
    if (r.cv) {
      json folds = json::array();
      for (std::size_t k = 0; k < r.cv->fold_periods.size(); ++k) {
        folds.push_back({{"holdout_period", r.cv->fold_periods[k]}, {"mse", r.cv->fold_mse[k]}});
      }
      row["mse_cv"] = r.cv->mse_cv;
      row["folds"] = folds;
    }
    rows.push_back(row);
  }
  write_json(args.out / "evaluation.json", {{"holdout_period", table.holdout_period},
                                            {"in_sample_period", table.in_sample_period},
                                            {"units", in.panel.n()},
                                            {"rows", rows}});
  json cfg = config_json(config);
  cfg["models"] = json::array();
  for (const auto f : families) cfg["models"].push_back(cli_name(f));
  cfg["cv"] = args.cv;
  write_json(args.out / "manifest.json", manifest_json("evaluate", in.files, cfg, elapsed(start)));
}

// ---- summarize ------------------------------------------------------------------------------

void cmd_summarize(const SummarizeArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  for (const char* name : {"manifest.json", "fit_state.json"}) {
    if (!fs::exists(args.fit_dir / name)) {
      throw IncompleteRunError(args.fit_dir.string() + " is not a completed fit directory (missing " +
                               name + ")");
    }
  }
  const json state = read_json(args.fit_dir / "fit_state.json");
  const auto family = parse_model_family(state.at("model").get<std::string>());
  if (!is_bayesian(family)) {
    throw IncompleteRunError("the fit in " + args.fit_dir.string() + " is " +
                             std::string(cli_name(family)) + " and has no posterior draws to summarize");
  }
  if (!fs::exists(args.fit_dir / "summary.csv")) {
    throw IncompleteRunError(args.fit_dir.string() + " is missing summary.csv");
  }
  if (args.barriers && !has_variable_alpha(family)) {
    throw IncompleteRunError("--barriers needs a variable-borders fit; " +
                             std::string(cli_name(family)) + " keeps every border fixed");
  }
  UnitSummaries summaries = read_summary_csv(args.fit_dir / "summary.csv");
  summaries.alpha0_mean = state.at("alpha0_mean").get<double>();
  summaries.beta0_mean = state.at("beta0_mean").get<double>();

  const auto ids = state.at("unit_ids").get<std::vector<std::string>>();
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& e : state.at("edges")) pairs.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  const auto graph = AdjacencyGraph::from_id_pairs(ids, pairs);

  const fs::path out = args.out.value_or(args.fit_dir);
  prepare_output(out);
  if (out != args.fit_dir) write_summary_csv(out / "summary.csv", summaries);

  std::optional<BarrierReport> report;
  if (has_variable_alpha(family)) {
    std::optional<std::vector<double>> pa, pb;
    if (state.contains("p_barrier_alpha")) pa = state["p_barrier_alpha"].get<std::vector<double>>();
    if (state.contains("p_barrier_beta")) pb = state["p_barrier_beta"].get<std::vector<double>>();
    report = make_barrier_report(graph, pa, pb, {args.alpha_threshold, args.beta_threshold});
    write_barriers_csv(out / "barriers.csv", *report);
  }

  const int k = std::min<int>(args.top, static_cast<int>(summaries.units.size()));
  const auto ext = extremes(summaries, k);
  {
    std::ofstream f(out / "extremes.csv");
    if (!f) throw InputError("cannot write extremes.csv");
    f << "list,rank,unit_id,mean\n";
    const auto emit = [&](const char* name, const std::vector<int>& idx, bool alpha) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& u = summaries.units[idx[r]];
        f << name << ',' << r + 1 << ',' << csv::escape(u.unit_id) << ','
          << csv::format_double(alpha ? u.alpha.mean : u.beta.mean) << '\n';
      }
    };
    emit("top_alpha", ext.top_alpha, true);
    emit("bottom_alpha", ext.bottom_alpha, true);
    emit("top_beta", ext.top_beta, false);
    emit("bottom_beta", ext.bottom_beta, false);
  }

  std::vector<fs::path> files = {args.fit_dir / "fit_state.json", args.fit_dir / "summary.csv"};
  if (args.polygons) {
    files.push_back(*args.polygons);
    const auto polygons = read_polygons_geojson(*args.polygons);
    export_geojson(out / "results.geojson", summaries, report ? &*report : nullptr, polygons);
  }
  const json cfg = {{"alpha_threshold", args.alpha_threshold},
                    {"beta_threshold", args.beta_threshold},
                    {"top", k}};
  const fs::path manifest_name = out == args.fit_dir ? "summarize_manifest.json" : "manifest.json";
  write_json(out / manifest_name, manifest_json("summarize", files, cfg, elapsed(start)));
}

// ---- simulate ----------------------------------------------------------------------------------

namespace {

void write_grid_polygons(const fs::path& path, const SyntheticSpec& spec, const AdjacencyGraph& g) {
  const int cols = spec.shape == GraphShape::Grid ? spec.cols : spec.nodes;
  json features = json::array();
  for (int k = 0; k < g.size(); ++k) {
    const double x = k % cols;
    const double y = k / cols;
    const json ring = json::array({json::array({x, y}), json::array({x + 1, y}),
                                   json::array({x + 1, y + 1}), json::array({x, y + 1}),
                                   json::array({x, y})});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"unit_id", g.unit_ids()[k]}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
  }
  write_json(path, {{"type", "FeatureCollection"}, {"features", features}});
}

}  // namespace

void cmd_simulate(const SimulateArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  if (args.shape == "grid") {
    spec.shape = GraphShape::Grid;
  } else if (args.shape == "cycle") {
    spec.shape = GraphShape::Cycle;
  } else if (args.shape == "path") {
    spec.shape = GraphShape::Path;
  } else {
    throw InputError("--shape must be grid, cycle or path, got '" + args.shape + "'");
  }
  spec.rows = args.rows;
  spec.cols = args.cols;
  spec.nodes = args.nodes;
  spec.alpha0 = args.alpha0;
  spec.beta0 = args.beta0;
  spec.tau2_alpha = args.tau2_alpha;
  spec.tau2_beta = args.tau2_beta;
  spec.sigma2 = args.sigma2;
  spec.rho = args.rho;
  spec.gamma = Eigen::Map<const Eigen::VectorXd>(args.gamma.data(), static_cast<Eigen::Index>(args.gamma.size()));
  spec.barriers_alpha = args.barriers_alpha;
  spec.barriers_beta = args.barriers_beta;
  spec.periods = args.periods;
  spec.first_period = args.first_period;
  spec.seed = args.seed;
  const SyntheticData data = simulate(spec);

  prepare_output(args.out);
  write_crimes_csv(args.out / "crimes.csv", data.counts);
  if (data.covariates.d() > 0) write_covariates_csv(args.out / "covariates.csv", data.covariates);
  write_edges_csv(args.out / "edges.csv", data.graph);
  {
    std::ofstream f(args.out / "truth.csv");
    if (!f) throw InputError("cannot write truth.csv");
    f << "unit_id,alpha,beta\n";
    for (int i = 0; i < data.graph.size(); ++i) {
      f << data.graph.unit_ids()[i] << ',' << csv::format_double(data.truth.alpha(i)) << ','
        << csv::format_double(data.truth.beta(i)) << '\n';
    }
  }
  {
    std::ofstream f(args.out / "y_exact.csv");
    if (!f) throw InputError("cannot write y_exact.csv");
    f << "unit_id,year,y\n";
    for (int i = 0; i < data.exact.n(); ++i) {
      for (int k = 0; k < data.exact.periods_count(); ++k) {
        f << data.exact.unit_ids()[i] << ',' << data.exact.periods()[k] << ','
          << csv::format_double(data.exact.y()(i, k)) << '\n';
      }
    }
  }
  if (spec.shape != GraphShape::Cycle) write_grid_polygons(args.out / "polygons.geojson", spec, data.graph);
  const json cfg = {{"shape", args.shape}, {"rows", args.rows}, {"cols", args.cols},
                    {"nodes", args.nodes}, {"alpha0", args.alpha0}, {"beta0", args.beta0},
                    {"tau2_alpha", args.tau2_alpha}, {"tau2_beta", args.tau2_beta},
                    {"sigma2", args.sigma2}, {"rho", args.rho}, {"gamma", args.gamma},
                    {"barriers_alpha", args.barriers_alpha}, {"barriers_beta", args.barriers_beta},
                    {"periods", args.periods}, {"first_period", args.first_period},
                    {"seed", args.seed}};
  write_json(args.out / "manifest.json", manifest_json("simulate", {}, cfg, elapsed(start)));
}

// ---- contiguity and covariates ----------------------------------------------------------------

void cmd_contiguity(const ContiguityArgs& args) {
  const auto polygons = read_polygons_geojson(args.polygons);
  const auto graph = queen_contiguity(polygons, args.snap);
  if (args.out.has_parent_path()) prepare_output(args.out.parent_path());
  write_edges_csv(args.out, graph);
  spdlog::info("{} units, {} edges", graph.size(), graph.edge_count());
}

void cmd_build_covariates(const BuildCovariatesArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  InputArgs in;
  in.crimes = args.crimes;
  in.covariates_raw = args.covariates_raw;
  in.ethnicity_map = args.ethnicity_map;
  in.exclusions = args.exclusions;
  const LoadedInputs loaded = load_inputs(in);
  prepare_output(args.out);
  write_covariates_csv(args.out / "covariates.csv", loaded.covariates);
  write_crimes_csv(args.out / "crimes.csv", loaded.panel);
  {
    std::ofstream f(args.out / "excluded.txt");
    if (!f) throw InputError("cannot write excluded.txt");
    for (const auto& id : loaded.excluded_ids) f << id << '\n';
  }
  write_json(args.out / "manifest.json",
             manifest_json("build-covariates", loaded.files, json::object(), elapsed(start)));
}

// ---- argument parsing ---------------------------------------------------------------------------

namespace {

void add_input_flags(CLI::App* app, InputArgs& in) {
  app->add_option("--crimes", in.crimes, "crimes.csv (unit_id,year,count)")->required();
  app->add_option("--covariates", in.covariates, "precomputed covariates.csv");
  app->add_option("--covariates-raw", in.covariates_raw, "raw demographics CSV");
  app->add_option("--ethnicity-map", in.ethnicity_map, "label,category mapping for eth_ columns");
  app->add_option("--exclusions", in.exclusions, "unit ids to exclude, one per line");
  app->add_option("--edges", in.edges, "adjacency edges.csv");
  app->add_option("--polygons", in.polygons, "unit polygons (GeoJSON) for queen contiguity");
}

void add_model_flags(CLI::App* app, ModelArgs& m) {
  app->add_option("--config", m.config, "JSON model configuration");
  app->add_option("--iters", m.iters, "MCMC iterations (default 2050)");
  app->add_option("--burnin", m.burnin, "burn-in iterations (default 50)");
  app->add_option("--thin", m.thin, "thinning interval (default 2)");
  app->add_option("--chains", m.chains, "number of chains (default 1)");
  app->add_option("--seed", m.seed, "random seed (default 1)");
  app->add_option("--prior", m.prior, "eb or noninf (default eb)");
  app->add_option("--phi-prior", m.phi_prior, "connected = Beta(9,1), barriers = Beta(1,9)");
  app->add_flag("--two-stage", m.two_stage, "fix gamma at the stage-one least-squares estimate");
}

}  // namespace

int run(int argc, const char* const* argv) {
  configure_logging();
  CLI::App app{"Bayesian spatial trend models for areal count panels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit one model family");
  add_input_flags(fit_cmd, fit.inputs);
  add_model_flags(fit_cmd, fit.model);
  fit_cmd->add_option("--model", fit.model.model, "model family (default car)");
  fit_cmd->add_option("--holdout", fit.holdout, "held-out period label or none (default: last)");
  fit_cmd->add_flag("--save-draws", fit.save_draws, "write draws.csv");
  fit_cmd->add_option("--jobs", fit.jobs, "threads (default: all cores)");
  fit_cmd->add_option("--out", fit.out, "output directory")->required();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "compare model families on a holdout split");
  add_input_flags(eval_cmd, eval.inputs);
  add_model_flags(eval_cmd, eval.model);
  eval_cmd->add_option("--model", eval.models, "model families (repeat or comma separated)")
      ->delimiter(',');
  eval_cmd->add_option("--holdout", eval.holdout, "held-out period label (default: last)");
  eval_cmd->add_flag("--cv", eval.cv, "leave-one-period-out cross-validation");
  eval_cmd->add_option("--jobs", eval.jobs, "threads (default: all cores)");
  eval_cmd->add_option("--out", eval.out, "output directory")->required();

  SummarizeArgs summ;
  auto* summ_cmd = app.add_subcommand("summarize", "summaries, barriers and GeoJSON from a fit");
  summ_cmd->add_option("--fit", summ.fit_dir, "fit output directory")->required();
  summ_cmd->add_option("--out", summ.out, "output directory (default: the fit directory)");
  summ_cmd->add_option("--polygons", summ.polygons, "unit polygons for results.geojson");
  summ_cmd->add_flag("--barriers", summ.barriers, "require a barrier report");
  summ_cmd->add_option("--alpha-threshold", summ.alpha_threshold, "barrier threshold for alpha");
  summ_cmd->add_option("--beta-threshold", summ.beta_threshold, "barrier threshold for beta");
  summ_cmd->add_option("--top", summ.top, "length of the extreme-unit lists (default 50)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a synthetic panel");
  sim_cmd->add_option("--out", sim.out, "output directory")->required();
  sim_cmd->add_option("--shape", sim.shape, "grid, cycle or path");
  sim_cmd->add_option("--rows", sim.rows, "grid rows (default 10)");
  sim_cmd->add_option("--cols", sim.cols, "grid columns (default 10)");
  sim_cmd->add_option("--nodes", sim.nodes, "cycle or path length (default 4)");
  sim_cmd->add_option("--alpha0", sim.alpha0, "intercept mean (default 2)");
  sim_cmd->add_option("--beta0", sim.beta0, "slope mean (default -0.05)");
  sim_cmd->add_option("--tau2-alpha", sim.tau2_alpha, "intercept prior variance (default 0.5)");
  sim_cmd->add_option("--tau2-beta", sim.tau2_beta, "slope prior variance (default 0.003)");
  sim_cmd->add_option("--sigma2", sim.sigma2, "noise variance (default 0.08)");
  sim_cmd->add_option("--rho", sim.rho, "CAR spatial weight in [0, 1) (default 0.9)");
  sim_cmd->add_option("--gamma", sim.gamma, "covariate effects, comma separated")->delimiter(',');
  sim_cmd->add_option("--barriers-alpha", sim.barriers_alpha, "edge indices")->delimiter(',');
  sim_cmd->add_option("--barriers-beta", sim.barriers_beta, "edge indices")->delimiter(',');
  sim_cmd->add_option("--periods", sim.periods, "number of periods (default 10)");
  sim_cmd->add_option("--first-period", sim.first_period, "first period label (default 2006)");
  sim_cmd->add_option("--seed", sim.seed, "random seed (default 1)");

  ContiguityArgs cont;
  auto* cont_cmd = app.add_subcommand("contiguity", "queen contiguity edges from polygons");
  cont_cmd->add_option("--polygons", cont.polygons, "GeoJSON FeatureCollection")->required();
  cont_cmd->add_option("--out", cont.out, "edges.csv path")->required();
  cont_cmd->add_option("--snap", cont.snap, "coordinate snap tolerance");

  BuildCovariatesArgs build;
  auto* build_cmd = app.add_subcommand("build-covariates", "derive covariates and apply exclusions");
  build_cmd->add_option("--crimes", build.crimes)->required();
  build_cmd->add_option("--covariates-raw", build.covariates_raw)->required();
  build_cmd->add_option("--ethnicity-map", build.ethnicity_map);
  build_cmd->add_option("--exclusions", build.exclusions);
  build_cmd->add_option("--out", build.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) cmd_fit(fit);
    if (*eval_cmd) cmd_evaluate(eval);
    if (*summ_cmd) cmd_summarize(summ);
    if (*sim_cmd) cmd_simulate(sim);
    if (*cont_cmd) cmd_contiguity(cont);
    if (*build_cmd) cmd_build_covariates(build);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace areltrend::cli
