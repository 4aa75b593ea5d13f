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

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "areltrend/cli.hpp"
#include "areltrend/csv.hpp"
#include "areltrend/error.hpp"
#include "areltrend/summarize.hpp"
#include "fixtures.hpp"

using namespace areltrend;
namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"areltrend"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string str(const fs::path& p) { return p.string(); }

// Simulated 4x4 grid with two covariates, written by the simulate command.
fs::path simulated_inputs(const std::string& name, std::initializer_list<std::string> extra = {}) {
  const auto dir = testing::scratch_dir(name);
  std::vector<std::string> args{"simulate", "--out", str(dir / "data"), "--rows", "4", "--cols", "4",
                                "--gamma", "0.3,-0.2", "--seed", "3"};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv{"areltrend"};
  for (const auto& s : args) argv.push_back(s.c_str());
  REQUIRE(cli::run(static_cast<int>(argv.size()), argv.data()) == 0);
  return dir;
}

// Cell-by-cell comparison; numeric cells to a relative 1e-9.
void check_csv_matches(const fs::path& got_path, const fs::path& want_path) {
  const auto got = csv::read(got_path);
  const auto want = csv::read(want_path);
  CHECK(got.header == want.header);
  REQUIRE(got.rows.size() == want.rows.size());
  for (std::size_t r = 0; r < want.rows.size(); ++r) {
    REQUIRE(got.rows[r].size() == want.rows[r].size());
    for (std::size_t c = 0; c < want.rows[r].size(); ++c) {
      const auto& a = got.rows[r][c];
      const auto& b = want.rows[r][c];
      char* end_a = nullptr;
      char* end_b = nullptr;
      const double x = std::strtod(a.c_str(), &end_a);
      const double y = std::strtod(b.c_str(), &end_b);
      CAPTURE(want_path.filename().string());
      CAPTURE(r);
      CAPTURE(c);
      if (!a.empty() && !b.empty() && *end_a == '\0' && *end_b == '\0') {
        CHECK(std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y)));
      } else {
        CHECK(a == b);
      }
    }
  }
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"fit"}) == 2);
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"--version"}) == 0);
  }

  TEST_CASE("simulate writes the documented files") {
    const auto dir = simulated_inputs("cli_sim");
    for (const char* f : {"crimes.csv", "covariates.csv", "edges.csv", "truth.csv", "y_exact.csv",
                          "polygons.geojson", "manifest.json"}) {
      CHECK(fs::exists(dir / "data" / f));
    }
    const auto panel = read_crimes_csv(dir / "data" / "crimes.csv");
    CHECK(panel.n() == 16);
    CHECK(panel.periods_count() == 10);
    const auto cov = read_covariates_csv(dir / "data" / "covariates.csv", false);
    CHECK(cov.d() == 2);
    CHECK(read_edges_csv(dir / "data" / "edges.csv").size() == 24);
  }

  TEST_CASE("contiguity from simulated polygons matches queen adjacency") {
    const auto dir = simulated_inputs("cli_contiguity");
    CHECK(run_cli({"contiguity", "--polygons", str(dir / "data" / "polygons.geojson"), "--out",
                   str(dir / "queen.csv")}) == 0);
    // 4x4 grid: 24 rook plus 18 diagonal pairs.
    CHECK(read_edges_csv(dir / "queen.csv").size() == 42);
    CHECK(run_cli({"contiguity", "--polygons", str(dir / "missing.geojson"), "--out", str(dir / "x.csv")}) == 2);
  }

  TEST_CASE("fit is reproducible byte for byte") {
    const auto dir = simulated_inputs("cli_repro");
    const auto data = dir / "data";
    for (const char* out : {"a", "b"}) {
      REQUIRE(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                       "--edges", str(data / "edges.csv"), "--model", "variable-borders", "--iters", "300",
                       "--seed", "7", "--chains", "2", "--save-draws", "--out", str(dir / out)}) == 0);
    }
    for (const char* f : {"draws.csv", "summary.csv", "fit_state.json"}) {
      CHECK(testing::read_file(dir / "a" / f) == testing::read_file(dir / "b" / f));
    }
    const auto manifest = nlohmann::json::parse(testing::read_file(dir / "a" / "manifest.json"));
    CHECK(manifest.contains("inputs"));
    const auto meta = nlohmann::json::parse(testing::read_file(dir / "a" / "chain_meta.json"));
    CHECK(meta.is_object());
  }

  TEST_CASE("fit error exits") {
    const auto dir = simulated_inputs("cli_errors");
    const auto data = dir / "data";
    CHECK(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                   "--model", "car", "--out", str(dir / "nograph")}) == 3);
    CHECK(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                   "--edges", str(data / "edges.csv"), "--iters", "150", "--out", str(dir / "short")}) == 2);
    CHECK(run_cli({"fit", "--crimes", str(data / "nope.csv"), "--out", str(dir / "x")}) == 2);
    CHECK(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--model", "kriging", "--out",
                   str(dir / "y")}) == 2);
  }

  TEST_CASE("config file precedence and validation") {
    const auto dir = testing::scratch_dir("cli_config");
    std::ofstream(dir / "c.json") << R"({"model": "global", "iters": 500, "seed": 9, "rho_prior": [2, 3]})";
    cli::ModelArgs args;
    args.config = dir / "c.json";
    auto config = cli::resolve_config(args);
    CHECK(config.family == ModelFamily::GlobalShrinkage);
    CHECK(config.chain.n_iter == 500);
    CHECK(config.chain.seed == 9);
    CHECK(config.rho_prior.a == 2.0);
    args.iters = 800;
    args.model = "car";
    config = cli::resolve_config(args);
    CHECK(config.chain.n_iter == 800);
    CHECK(config.family == ModelFamily::SpatialCAR);
    std::ofstream(dir / "bad.json") << R"({"iterations": 5})";
    args.config = dir / "bad.json";
    CHECK_THROWS_AS(cli::resolve_config(args), InputError);
  }

  TEST_CASE("summarize exits and outputs") {
    const auto dir = simulated_inputs("cli_summarize");
    const auto data = dir / "data";
    REQUIRE(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                     "--edges", str(data / "edges.csv"), "--model", "car", "--iters", "400", "--out",
                     str(dir / "car")}) == 0);
    CHECK(run_cli({"summarize", "--fit", str(dir / "car"), "--barriers"}) == 5);
    CHECK(run_cli({"summarize", "--fit", str(dir / "missing")}) == 5);
    CHECK(run_cli({"summarize", "--fit", str(dir / "car"), "--top", "5", "--polygons",
                   str(data / "polygons.geojson"), "--out", str(dir / "car_summary")}) == 0);
    CHECK(fs::exists(dir / "car_summary" / "extremes.csv"));
    CHECK(fs::exists(dir / "car_summary" / "results.geojson"));

    REQUIRE(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                     "--edges", str(data / "edges.csv"), "--model", "variable-borders", "--iters", "400",
                     "--out", str(dir / "vb")}) == 0);
    CHECK(run_cli({"summarize", "--fit", str(dir / "vb"), "--barriers", "--alpha-threshold", "0.7"}) == 0);
    const auto report = testing::read_file(dir / "vb" / "barriers.csv");
    CHECK(report.rfind("edge,unit_a,unit_b,p_alpha,p_beta,flag_alpha,flag_beta\n", 0) == 0);

    REQUIRE(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                     "--model", "no-shrinkage", "--out", str(dir / "ols")}) == 0);
    CHECK(fs::exists(dir / "ols" / "estimates.csv"));
    CHECK(run_cli({"summarize", "--fit", str(dir / "ols")}) == 5);
  }

  TEST_CASE("summarize reproduces the golden output of the frozen fixture") {
    const auto dir = simulated_inputs("cli_golden");
    const auto data = dir / "data";
    REQUIRE(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                     "--edges", str(data / "edges.csv"), "--model", "variable-borders", "--iters", "300",
                     "--seed", "7", "--out", str(dir / "fit")}) == 0);
    REQUIRE(run_cli({"summarize", "--fit", str(dir / "fit"), "--barriers", "--out", str(dir / "summary")}) == 0);
    const fs::path golden = fs::path(ARELTREND_SOURCE_DIR) / "tests" / "golden" / "summarize";
    for (const char* f : {"summary.csv", "barriers.csv", "extremes.csv"}) {
      check_csv_matches(dir / "summary" / f, golden / f);
    }
  }

  TEST_CASE("evaluate writes one row per family and cv folds") {
    const auto dir = simulated_inputs("cli_evaluate");
    const auto data = dir / "data";
    REQUIRE(run_cli({"evaluate", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                     "--model", "global", "--iters", "300", "--cv", "--out", str(dir / "one")}) == 0);
    const auto table = testing::read_file(dir / "one" / "comparison.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
    const auto eval = nlohmann::json::parse(testing::read_file(dir / "one" / "evaluation.json"));
    REQUIRE(eval["rows"].size() == 1);
    CHECK(eval["rows"][0]["folds"].size() == 10);
  }

  TEST_CASE("global model fits the benchmark fixture within budget") {
    const auto dir = testing::scratch_dir("cli_budget");
    REQUIRE(run_cli({"simulate", "--out", str(dir / "data"), "--gamma", "0.3,-0.2"}) == 0);
    const auto data = dir / "data";
    const auto start = std::chrono::steady_clock::now();
    CHECK(run_cli({"fit", "--crimes", str(data / "crimes.csv"), "--covariates", str(data / "covariates.csv"),
                   "--model", "global", "--out", str(dir / "fit")}) == 0);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 60.0);
  }

  TEST_CASE("build-covariates applies exclusions") {
    const auto dir = testing::scratch_dir("cli_build");
    std::ofstream(dir / "crimes.csv") << "unit_id,year,count\na,2006,1\na,2007,2\nb,2006,3\nb,2007,4\n"
                                         "c,2006,5\nc,2007,6\nd,2006,0\nd,2007,9\n";
    std::ofstream(dir / "raw.csv")
        << "unit_id,pop_total,white,black,hispanic,asian,other,pov1,pov2,pov3,pov4,pov5,pov6,pov7,"
           "income,area_total,area_vacant,area_commercial,area_residential\n"
        << "a,10,5,3,1,1,0,0.2,0.2,0.2,0.2,0.2,0,0,15000,100,5,10,40\n"
        << "b,30,2,6,2,1,0,0.1,0.1,0.1,0.1,0.1,0.25,0.25,21000,100,9,12,40\n"
        << "c,20,8,1,1,1,1,0.3,0.1,0.1,0.1,0.1,0.2,0.1,9000,100,2,30,20\n"
        << "d,25,1,1,1,1,1,0.1,0.1,0.1,0.1,0.1,0.1,0.4,,100,2,30,20\n";
    std::ofstream(dir / "exclude.txt") << "# listed\nc\n";
    CHECK(run_cli({"build-covariates", "--crimes", str(dir / "crimes.csv"), "--covariates-raw",
                   str(dir / "raw.csv"), "--exclusions", str(dir / "exclude.txt"), "--out", str(dir / "out")}) == 0);
    CHECK(testing::read_file(dir / "out" / "excluded.txt") == "d\nc\n");
    CHECK(read_crimes_csv(dir / "out" / "crimes.csv").n() == 2);
  }

  TEST_CASE("sha256 of a known file") {
    const auto dir = testing::scratch_dir("cli_sha");
    std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
    CHECK(cli::sha256_file(dir / "abc.txt") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
