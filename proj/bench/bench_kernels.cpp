/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <benchmark/benchmark.h>

#include "tempex/graph.hpp"
#include "tempex/objective.hpp"

using namespace tempex;

namespace {

data::RatingDataset dataset(std::int64_t users) {
  data::SynthConfig sc;
  sc.num_users = static_cast<std::size_t>(users);
  sc.num_items = static_cast<std::size_t>(users) * 4 / 5;
  sc.num_epochs = 6;
  return data::split(data::synth(sc), 0.2, 1);
}

void BM_BuildGraph(benchmark::State& state) {
  const auto ds = dataset(state.range(0));
  const graph::GraphConfig cfg{10, false, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(graph::build_graph(ds, cfg));
}

void BM_BuildGraphReference(benchmark::State& state) {
  const auto ds = dataset(state.range(0));
  const graph::GraphConfig cfg{10, false, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(graph::build_graph_reference(ds, cfg));
}

void BM_Forward(benchmark::State& state) {
  const auto ds = dataset(state.range(0));
  const auto p = model::ModelParams::init(model::make_dims(ds, model::ModelConfig{}), 1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(p, ds));
}

void BM_ForwardReference(benchmark::State& state) {
  const auto ds = dataset(state.range(0));
  const auto p = model::ModelParams::init(model::make_dims(ds, model::ModelConfig{}), 1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward_reference(p, ds));
}

void gradient_bench(benchmark::State& state, bool serial) {
  const auto ds = dataset(state.range(0));
  const auto g = graph::build_graph(ds, graph::GraphConfig{10, false, std::nullopt});
  const auto p = model::ModelParams::init(model::make_dims(ds, model::ModelConfig{}), 1, 0.1);
  const objective::ObjectiveConfig cfg;
  const auto terms = objective::build_terms(ds, g, cfg);
  const auto inputs = objective::Inputs::build(ds, 0.0);
  const auto trace = model::forward(p, ds);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective::gradient(trace, p, inputs, terms, cfg, objective::Scope::All, serial));
  }
}

void BM_Gradient(benchmark::State& state) { gradient_bench(state, false); }
void BM_GradientSerial(benchmark::State& state) { gradient_bench(state, true); }

}  // namespace

BENCHMARK(BM_BuildGraph)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildGraphReference)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardReference)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gradient)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientSerial)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
