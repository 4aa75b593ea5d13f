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

#include <benchmark/benchmark.h>

#include <vector>

#include "areltrend/kernels.hpp"
#include "areltrend/rng.hpp"
#include "areltrend/synthgen.hpp"

namespace {

using areltrend::AdjacencyGraph;
using areltrend::GraphShape;
using areltrend::SyntheticSpec;

struct Fixture {
  AdjacencyGraph graph;
  Eigen::MatrixXd y;
  Eigen::MatrixXd Z;
  Eigen::VectorXd gamma, alpha, beta;
  std::vector<int> columns;
  std::vector<double> centered;
};

Fixture make_fixture(int side) {
  SyntheticSpec spec;
  spec.shape = GraphShape::Grid;
  spec.rows = side;
  spec.cols = side;
  Fixture f;
  f.graph = areltrend::make_graph(spec);
  const int n = f.graph.size();
  areltrend::Rng rng(7);
  f.y.resize(n, 10);
  f.Z.resize(n, 6);
  for (Eigen::Index k = 0; k < f.y.size(); ++k) f.y.data()[k] = rng.normal();
  for (Eigen::Index k = 0; k < f.Z.size(); ++k) f.Z.data()[k] = rng.normal();
  f.gamma = Eigen::VectorXd::Constant(6, 0.1);
  f.alpha = Eigen::VectorXd::Constant(n, 2.0);
  f.beta = Eigen::VectorXd::Constant(n, -0.05);
  for (int c = 0; c < 9; ++c) f.columns.push_back(c);
  f.centered.resize(n);
  for (int i = 0; i < n; ++i) f.centered[i] = rng.normal();
  return f;
}

template <bool kParallel>
void BM_ResidualSumSquares(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  const areltrend::kernels::ResidualInputs in{f.y, f.Z, f.columns};
  for (auto _ : state) {
    const double v = kParallel
                         ? areltrend::kernels::parallel::residual_sum_squares(in, f.gamma, f.alpha, f.beta)
                         : areltrend::kernels::serial::residual_sum_squares(in, f.gamma, f.alpha, f.beta);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * f.graph.size());
}

template <bool kParallel>
void BM_CarQuadraticForm(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const double v =
        kParallel ? areltrend::kernels::parallel::car_quadratic_form(f.graph, {}, 0.9, f.alpha, 1.0)
                  : areltrend::kernels::serial::car_quadratic_form(f.graph, {}, 0.9, f.alpha, 1.0);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * f.graph.size());
}

template <bool kParallel>
void BM_DesignRhs(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  const areltrend::kernels::ResidualInputs in{f.y, f.Z, f.columns};
  for (auto _ : state) {
    auto v = kParallel ? areltrend::kernels::parallel::design_rhs(in)
                       : areltrend::kernels::serial::design_rhs(in);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * f.graph.size());
}

template <bool kParallel>
void BM_MoranPermutations(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto v = kParallel ? areltrend::kernels::parallel::moran_permutations(f.centered, f.graph, 200, 3)
                       : areltrend::kernels::serial::moran_permutations(f.centered, f.graph, 200, 3);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * 200);
}

}  // namespace

BENCHMARK(BM_ResidualSumSquares<false>)->Arg(37)->Arg(100);
BENCHMARK(BM_ResidualSumSquares<true>)->Arg(37)->Arg(100);
BENCHMARK(BM_CarQuadraticForm<false>)->Arg(37)->Arg(100);
BENCHMARK(BM_CarQuadraticForm<true>)->Arg(37)->Arg(100);
BENCHMARK(BM_DesignRhs<false>)->Arg(37)->Arg(100);
BENCHMARK(BM_DesignRhs<true>)->Arg(37)->Arg(100);
BENCHMARK(BM_MoranPermutations<false>)->Arg(37);
BENCHMARK(BM_MoranPermutations<true>)->Arg(37);

BENCHMARK_MAIN();
