/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tempex/data.hpp"
#include "tempex/graph.hpp"
#include "tempex/model.hpp"
#include "tempex/objective.hpp"

namespace tempex::train {

struct TrainConfig {
  std::size_t epochs_outer = 30;
  std::size_t phase_steps = 50;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout_rate = 0.0;
  std::uint64_t seed = 1;
  objective::ObjectiveConfig objective;
  model::ModelConfig model;
};

void validate(const TrainConfig& config);

struct AdamMoments {
  Tensor m;
  Tensor v;
  std::size_t step = 0;
};

/// One AdamMoments per parameter block, in ModelParams::blocks() order.
struct AdamState {
  std::vector<AdamMoments> blocks;
  static AdamState for_params(const model::ModelParams& params);
};

/// Bias-corrected ADAM update of theta in place.
void adam_step(Tensor& theta, const Tensor& gradient, AdamMoments& state, double lr, double beta1, double beta2,
               double eps);

struct PhaseRecord {
  std::size_t round = 0;
  model::Side phase = model::Side::User;
  double loss = 0.0;
  std::optional<double> rmse_val;
  double wallclock_ms = 0.0;
};

/// `{"round":..,"phase":"user","loss":..,"rmse_val":..,"wallclock_ms":..}`
std::string to_json_line(const PhaseRecord& record);

/// Subspace descent over one dataset and graph. The ADAM moments persist
/// across phases; each phase only ever touches its own side's blocks.
class Trainer {
 public:
  Trainer(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph, TrainConfig config);

  model::ModelParams initial_params() const;

  /// phase_steps ADAM steps on `side` with the other side's states held
  /// fixed; returns the full objective afterwards (no dropout, every pair).
  double run_phase(model::ModelParams& params, model::Side side);

  double full_loss(const model::ModelParams& params) const;
  /// Clamped RMSE over the dataset's test-tagged events, if it has any.
  std::optional<double> validation_rmse(const model::ModelParams& params) const;

  const TrainConfig& config() const noexcept { return config_; }

 private:
  const data::RatingDataset& ds_;
  const graph::ExplainabilityGraph& graph_;
  TrainConfig config_;
  objective::Inputs inputs_;
  objective::TermSet exact_terms_;
  AdamState adam_;
  std::mt19937_64 sampler_;
  std::uint64_t steps_taken_ = 0;
  bool has_test_ = false;
};

/// One phase from a fresh optimizer state.
model::ModelParams subspace_phase(model::ModelParams params, model::Side which, const data::RatingDataset& ds,
                                  const graph::ExplainabilityGraph& graph, const TrainConfig& config);

struct FitResult {
  model::ModelParams params;
  std::vector<PhaseRecord> log;
};

/// Alternates user and item phases for epochs_outer rounds. Raises
/// ErrorCode::Diverged when the objective or any activation stops being
/// finite.
FitResult fit(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph, const TrainConfig& config,
              const std::function<void(const PhaseRecord&)>& on_phase = {});

struct GridCell {
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> val_rmse;
  std::string error;  // empty when the cell trained successfully
};

struct GridResult {
  double best_alpha = 0.0;
  double best_beta = 0.0;
  std::vector<GridCell> table;
};

/// Trains one model per (alpha, beta) on the train split minus each user's
/// last train epoch, scores it on that held-out epoch and picks the lowest
/// RMSE (ties: smaller alpha, then smaller beta). The graph supplies p and
/// the similarity variant; it is rebuilt on the reduced split.
GridResult grid_search(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph,
                       const TrainConfig& base, std::span<const double> alpha_grid,
                       std::span<const double> beta_grid);

}  // namespace tempex::train
