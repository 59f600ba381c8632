/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/train.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tempex/error.hpp"
#include "tempex/eval.hpp"

namespace tempex::train {

using model::ModelParams;
using model::Side;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

model::StateTrace full_trace(const ModelParams& params, const objective::Inputs& inputs) {
  model::StateTrace trace;
  trace.users = model::forward_chain(params, inputs.users);
  trace.items = model::forward_chain(params, inputs.items);
  return trace;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw Error(ErrorCode::ConfigInvalid, "train.learning_rate must be > 0");
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "train.dropout must lie in [0,1)");
  }
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "ADAM betas must lie in [0,1)");
  }
  if (!(c.adam_eps > 0.0)) throw Error(ErrorCode::ConfigInvalid, "train.adam_eps must be > 0");
  if (c.model.hidden < 1 || c.model.input_dim < 1 || c.model.k < 1 || c.model.k_s < 1) {
    throw Error(ErrorCode::ConfigInvalid, "model dimensions must all be >= 1");
  }
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState state;
  for (const auto& block : params.blocks()) {
    state.blocks.push_back({Tensor(block.tensor->shape()), Tensor(block.tensor->shape()), 0});
  }
  return state;
}

void adam_step(Tensor& theta, const Tensor& g, AdamMoments& s, double lr, double beta1, double beta2, double eps) {
  if (theta.shape() != g.shape() || s.m.shape() != g.shape() || s.v.shape() != g.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step shapes");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
  auto th = theta.data();
  auto m = s.m.data();
  auto v = s.v.data();
  const auto grad = g.values();
  for (std::size_t i = 0; i < th.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    th[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
  require_finite(theta.values(), "adam_step");
}

std::string to_json_line(const PhaseRecord& r) {
  char buf[256];
  char rmse[40] = "null";
  if (r.rmse_val) std::snprintf(rmse, sizeof rmse, "%.17g", *r.rmse_val);
  std::snprintf(buf, sizeof buf, "{\"round\":%zu,\"phase\":\"%s\",\"loss\":%.17g,\"rmse_val\":%s,\"wallclock_ms\":%.3f}",
                r.round, model::to_string(r.phase), r.loss, rmse, r.wallclock_ms);
  return buf;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph, TrainConfig config)
    : ds_(ds), graph_(graph), config_(std::move(config)), sampler_(mix(config_.seed, 0x5eed)) {
  validate(config_);
  const ModelParams init = initial_params();
  objective::validate(config_.objective, init.dims);
  inputs_ = objective::Inputs::build(ds_, init.input_offset);
  exact_terms_ = objective::build_terms(ds_, graph_, config_.objective);
  adam_ = AdamState::for_params(init);
  has_test_ = ds_.count(data::Split::Test) > 0;
}

ModelParams Trainer::initial_params() const {
  const double offset = config_.model.center_inputs ? ds_.train_mean() : 0.0;
  return ModelParams::init(model::make_dims(ds_, config_.model), config_.seed, config_.model.init_scale, offset);
}

double Trainer::full_loss(const ModelParams& params) const {
  return objective::evaluate(full_trace(params, inputs_), params, exact_terms_, config_.objective).total;
}

std::optional<double> Trainer::validation_rmse(const ModelParams& params) const {
  if (!has_test_) return std::nullopt;
  return eval::test_rmse(full_trace(params, inputs_), params, ds_);
}

double Trainer::run_phase(ModelParams& params, Side side) {
  const Side frozen = model::other(side);
  const objective::Scope scope = side == Side::User ? objective::Scope::UserSide : objective::Scope::ItemSide;
  const bool resample = config_.objective.explain_pair_budget > 0 &&
                        config_.objective.explain_pair_budget < graph_.temporal_count();
  model::StateTrace trace;
  trace.chain(frozen) = model::forward_chain(params, inputs_.chain(frozen));
  for (std::size_t step = 0; step < config_.phase_steps; ++step) {
    ++steps_taken_;
    const model::Dropout dropout{config_.dropout_rate, mix(config_.seed, steps_taken_)};
    trace.chain(side) = model::forward_chain(params, inputs_.chain(side), dropout);
    const objective::TermSet sampled =
        resample ? objective::build_terms(ds_, graph_, config_.objective, &sampler_) : objective::TermSet{};
    const objective::TermSet& terms = resample ? sampled : exact_terms_;
    ModelParams grads = objective::gradient(trace, params, inputs_, terms, config_.objective, scope);
    auto p_blocks = params.blocks();
    const auto g_blocks = grads.blocks();
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
      if (p_blocks[b].side != side) continue;
      adam_step(*p_blocks[b].tensor, *g_blocks[b].tensor, adam_.blocks[b], config_.learning_rate, config_.adam_beta1,
                config_.adam_beta2, config_.adam_eps);
    }
  }
  return full_loss(params);
}

ModelParams subspace_phase(ModelParams params, Side which, const data::RatingDataset& ds,
                           const graph::ExplainabilityGraph& graph, const TrainConfig& config) {
  Trainer trainer(ds, graph, config);
  trainer.run_phase(params, which);
  return params;
}

FitResult fit(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph, const TrainConfig& config,
              const std::function<void(const PhaseRecord&)>& on_phase) {
  Trainer trainer(ds, graph, config);
  FitResult result{trainer.initial_params(), {}};
  const auto start = std::chrono::steady_clock::now();
  try {
    for (std::size_t round = 0; round < config.epochs_outer; ++round) {
      for (Side side : {Side::User, Side::Item}) {
        PhaseRecord rec;
        rec.round = round;
        rec.phase = side;
        rec.loss = trainer.run_phase(result.params, side);
        if (!std::isfinite(rec.loss)) throw Error(ErrorCode::NonFiniteValue, "phase loss");
        rec.rmse_val = trainer.validation_rmse(result.params);
        rec.wallclock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(rec);
        if (on_phase) on_phase(rec);
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteValue) throw;
    throw Error(ErrorCode::Diverged, std::string("training diverged: ") + e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------

GridResult grid_search(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph,
                       const TrainConfig& base, std::span<const double> alpha_grid,
                       std::span<const double> beta_grid) {
  if (alpha_grid.empty() || beta_grid.empty()) throw Error(ErrorCode::ConfigInvalid, "grid axes must be non-empty");
  for (double v : alpha_grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "grid alpha values must lie in [0,1]");
  }
  for (double v : beta_grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "grid beta values must lie in [0,1]");
  }
  validate(base);
  const data::RatingDataset held = data::holdout_last_train_epoch(ds);
  if (held.count(data::Split::Test) == 0) {
    throw Error(ErrorCode::EmptyTestSet, "no user has train events in more than one epoch");
  }
  const graph::ExplainabilityGraph held_graph =
      graph::build_graph(held, graph::GraphConfig{graph.p, graph.normalized, std::nullopt});

  GridResult result;
  for (double a : alpha_grid) {
    for (double b : beta_grid) result.table.push_back({a, b, std::nullopt, {}});
  }
  const auto cells = static_cast<std::int64_t>(result.table.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t ci = 0; ci < cells; ++ci) {
    GridCell& cell = result.table[static_cast<std::size_t>(ci)];
    TrainConfig cfg = base;
    cfg.objective.alpha = cell.alpha;
    cfg.objective.beta = cell.beta;
    try {
      const FitResult fitted = fit(held, held_graph, cfg);
      const model::StateTrace trace = model::forward(fitted.params, held);
      cell.val_rmse = eval::test_rmse(trace, fitted.params, held);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }

  // Ties: smaller alpha, then smaller beta.
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& cell : result.table) {
    if (!cell.val_rmse) continue;
    const bool better = *cell.val_rmse < best ||
                        (*cell.val_rmse == best && (cell.alpha < result.best_alpha ||
                                                    (cell.alpha == result.best_alpha && cell.beta < result.best_beta)));
    if (!any || better) {
      best = *cell.val_rmse;
      result.best_alpha = cell.alpha;
      result.best_beta = cell.beta;
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::Diverged, "every grid cell failed");
  return result;
}

}  // namespace tempex::train
