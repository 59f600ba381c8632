/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tempex/data.hpp"
#include "tempex/graph.hpp"
#include "tempex/model.hpp"

namespace tempex::objective {

/// Dry weights every temporal explainability pair by alpha; Fluid weights it
/// by exp(-alpha * age), age counted back from the graph's reference epoch.
enum class Mode { Dry, Fluid };

/// Which latents the stationary-graph term pulls together: the stationary
/// embeddings (default) or the projected dynamic states at the reference
/// epoch.
enum class BetaLatents { Stationary, Dynamic };

struct ObjectiveConfig {
  Mode mode = Mode::Fluid;
  double alpha = 0.4;
  double beta = 0.6;
  double lambda_reg = 1e-4;
  /// Cap on temporal pairs per evaluation; 0 means use every pair.
  std::size_t explain_pair_budget = 0;
  BetaLatents beta_latents = BetaLatents::Stationary;
};

void validate(const ObjectiveConfig& config, const model::ModelDims& dims);

/// Weight of a temporal pair at `epoch` before multiplying by M.
double temporal_factor(const ObjectiveConfig& config, int epoch, int reference_epoch);

/// Every term of the objective enumerated once, indexed both by user and by
/// item so that each side's gradient rows can be filled without contention.
struct TermSet {
  struct Rating {
    std::uint32_t other;
    std::int32_t epoch;
    double rating;
  };
  struct Pair {
    std::uint32_t other;
    std::int32_t epoch;
    double weight;  // factor * M (* inverse sampling fraction)
  };
  struct Stationary {
    std::uint32_t other;
    double weight;  // beta * stationary M
  };
  template <class T>
  struct Index {
    std::vector<std::uint32_t> offsets;
    std::vector<T> terms;
    std::span<const T> at(std::size_t e) const {
      return {terms.data() + offsets[e], offsets[e + 1] - offsets[e]};
    }
  };

  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int reference_epoch = 0;
  BetaLatents beta_latents = BetaLatents::Stationary;
  Index<Rating> user_ratings, item_ratings;
  Index<Pair> user_pairs, item_pairs;
  Index<Stationary> user_stationary, item_stationary;

  std::size_t num_pairs() const noexcept { return user_pairs.terms.size(); }
};

/// Enumerates the terms. With a pair budget smaller than the number of
/// temporal pairs, `sampler` draws a uniform subset and the kept weights are
/// scaled by total / budget; without a sampler every pair is kept.
TermSet build_terms(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph,
                    const ObjectiveConfig& config, std::mt19937_64* sampler = nullptr);

struct LossBreakdown {
  double rating = 0.0;
  double temporal = 0.0;
  double stationary = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

LossBreakdown evaluate(const model::StateTrace& trace, const model::ModelParams& params, const TermSet& terms,
                       const ObjectiveConfig& config);

double loss(const model::StateTrace& trace, const model::ModelParams& params, const data::RatingDataset& ds,
            const graph::ExplainabilityGraph& graph, const ObjectiveConfig& config);
/// loss() with the mode forced to Dry / Fluid.
double loss_dry(const model::StateTrace& trace, const model::ModelParams& params, const data::RatingDataset& ds,
                const graph::ExplainabilityGraph& graph, ObjectiveConfig config);
double loss_fluid(const model::StateTrace& trace, const model::ModelParams& params, const data::RatingDataset& ds,
                  const graph::ExplainabilityGraph& graph, ObjectiveConfig config);

/// Direct serial evaluation from the dataset and graph, without a TermSet.
double loss_reference(const model::StateTrace& trace, const model::ModelParams& params,
                      const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph,
                      const ObjectiveConfig& config);

enum class Scope { All, UserSide, ItemSide };

/// The chain inputs a gradient evaluation backpropagates through.
struct Inputs {
  model::ChainInputs users;
  model::ChainInputs items;
  static Inputs build(const data::RatingDataset& ds, double input_offset);
  const model::ChainInputs& chain(model::Side s) const { return s == model::Side::User ? users : items; }
};

/// Analytic gradient of evaluate(...).total. Blocks outside `scope` are left
/// zero. `serial` disables OpenMP and yields the same result up to rounding.
model::ModelParams gradient(const model::StateTrace& trace, const model::ModelParams& params,
                            const Inputs& inputs, const TermSet& terms, const ObjectiveConfig& config,
                            Scope scope = Scope::All, bool serial = false);

model::ModelParams grad(const model::StateTrace& trace, const model::ModelParams& params,
                        const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph,
                        const ObjectiveConfig& config);

}  // namespace tempex::objective
