/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tempex/data.hpp"
#include "tempex/eval.hpp"
#include "tempex/graph.hpp"
#include "tempex/train.hpp"

namespace tempex::config {

struct Paths {
  std::string input;
  std::string data = "tempex_data.csv";
  std::string graph = "tempex_graph.txt";
  std::string checkpoint = "tempex_checkpoint.txt";
  std::string report = "tempex_report.json";
  std::string report_csv;
  std::string log;
  std::string sweep = "tempex_sweep.csv";
  std::string grid = "tempex_grid.csv";
};

/// Every setting of a pipeline run. Module configs are embedded as-is; the
/// top-level seed feeds synth, split and training.
struct RunConfig {
  data::GridConfig grid;
  double test_fraction = 0.2;
  data::SynthConfig synth;
  graph::GraphConfig graph;
  train::TrainConfig train;
  eval::EvalConfig eval;
  std::vector<std::size_t> sweep_p = {5, 10, 20, 50};
  std::vector<double> grid_alpha = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> grid_beta = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::uint64_t seed = 1;
  Paths paths;
};

struct KeyDoc {
  std::string key;
  std::string default_value;
  std::string description;
};

/// All recognised keys in documentation order.
const std::vector<KeyDoc>& keys();

/// Sets one dotted key. Unknown keys and unparsable values raise ConfigInvalid.
void set(RunConfig& config, const std::string& key, const std::string& value);

/// `key = value` lines; `#` starts a comment; blank lines are ignored.
void apply_file(RunConfig& config, const std::string& path);
/// `key=value` as given on the command line.
void apply_assignment(RunConfig& config, const std::string& assignment);

/// Checks every numeric invariant without touching the filesystem.
void validate(const RunConfig& config);

/// The text printed by `--help` after the command list.
std::string key_help();

}  // namespace tempex::config
