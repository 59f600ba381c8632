/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/objective.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tempex/error.hpp"

namespace tempex::objective {

using model::ModelParams;
using model::Side;
using model::StateTrace;

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

template <class T>
TermSet::Index<T> transpose(const TermSet::Index<T>& by_user, std::size_t num_items) {
  TermSet::Index<T> out;
  out.offsets.assign(num_items + 1, 0);
  for (const T& t : by_user.terms) ++out.offsets[t.other + 1];
  std::partial_sum(out.offsets.begin(), out.offsets.end(), out.offsets.begin());
  out.terms.resize(by_user.terms.size());
  std::vector<std::uint32_t> fill(out.offsets.begin(), out.offsets.end() - 1);
  const std::size_t users = by_user.offsets.size() - 1;
  for (std::size_t u = 0; u < users; ++u) {
    for (T t : by_user.at(u)) {
      const std::uint32_t item = t.other;
      t.other = static_cast<std::uint32_t>(u);
      out.terms[fill[item]++] = t;
    }
  }
  return out;
}

void check_compatible(const StateTrace& trace, const ModelParams& params, const TermSet& terms) {
  if (terms.num_users != params.dims.num_users || terms.num_items != params.dims.num_items ||
      trace.users.entities != params.dims.num_users || trace.items.entities != params.dims.num_items) {
    throw Error(ErrorCode::ShapeMismatch, "objective: trace, params and terms disagree on dimensions");
  }
}

}  // namespace

void validate(const ObjectiveConfig& c, const model::ModelDims& dims) {
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!nonneg(c.alpha) || !nonneg(c.beta) || !nonneg(c.lambda_reg)) {
    throw Error(ErrorCode::ConfigInvalid, "objective alpha, beta and lambda must be finite and >= 0");
  }
  // One k serves both projections and one k_s both embedding tables, so the
  // distance terms are always dimensionally consistent once these are >= 1.
  if (dims.k < 1 || dims.k_s < 1) throw Error(ErrorCode::ConfigInvalid, "model k and k_s must be >= 1");
}

double temporal_factor(const ObjectiveConfig& config, int epoch, int reference_epoch) {
  if (config.mode == Mode::Dry) return config.alpha;
  const int age = std::max(0, reference_epoch - epoch);
  return std::exp(-config.alpha * static_cast<double>(age));
}

TermSet build_terms(const data::RatingDataset& ds, const graph::ExplainabilityGraph& graph,
                    const ObjectiveConfig& config, std::mt19937_64* sampler) {
  if (graph.num_users != ds.num_users() || graph.num_items != ds.num_items()) {
    throw Error(ErrorCode::ShapeMismatch, "graph dimensions do not match the dataset");
  }
  TermSet ts;
  ts.num_users = ds.num_users();
  ts.num_items = ds.num_items();
  ts.reference_epoch = graph.reference_epoch;
  ts.beta_latents = config.beta_latents;

  ts.user_ratings.offsets.assign(ts.num_users + 1, 0);
  for (std::uint32_t u = 0; u < ts.num_users; ++u) {
    for (std::uint32_t i : ds.by_user(u)) {
      const auto& e = ds.event(i);
      if (e.is_train()) ts.user_ratings.terms.push_back({e.item, e.epoch, static_cast<double>(e.rating)});
    }
    ts.user_ratings.offsets[u + 1] = static_cast<std::uint32_t>(ts.user_ratings.terms.size());
  }
  ts.item_ratings = transpose(ts.user_ratings, ts.num_items);

  // Temporal pairs, optionally subsampled.
  std::vector<std::pair<std::uint32_t, const graph::TemporalEdge*>> pairs;
  const bool dry_zero = config.mode == Mode::Dry && config.alpha == 0.0;
  if (!dry_zero) {
    for (std::uint32_t u = 0; u < ts.num_users; ++u) {
      for (const auto& edge : graph.temporal[u]) pairs.emplace_back(u, &edge);
    }
  }
  double scale = 1.0;
  const std::size_t budget = config.explain_pair_budget;
  if (sampler != nullptr && budget > 0 && budget < pairs.size()) {
    std::vector<std::pair<std::uint32_t, const graph::TemporalEdge*>> kept;
    kept.reserve(budget);
    std::sample(pairs.begin(), pairs.end(), std::back_inserter(kept), budget, *sampler);
    scale = static_cast<double>(pairs.size()) / static_cast<double>(budget);
    pairs = std::move(kept);
  }
  ts.user_pairs.offsets.assign(ts.num_users + 1, 0);
  for (const auto& [u, edge] : pairs) {
    const double w = temporal_factor(config, edge->epoch, graph.reference_epoch) * edge->weight * scale;
    if (w == 0.0) continue;
    ts.user_pairs.terms.push_back({edge->item, edge->epoch, w});
    ++ts.user_pairs.offsets[u + 1];
  }
  std::partial_sum(ts.user_pairs.offsets.begin(), ts.user_pairs.offsets.end(), ts.user_pairs.offsets.begin());
  ts.item_pairs = transpose(ts.user_pairs, ts.num_items);

  ts.user_stationary.offsets.assign(ts.num_users + 1, 0);
  for (std::uint32_t u = 0; u < ts.num_users; ++u) {
    if (config.beta != 0.0) {
      for (const auto& edge : graph.stationary[u]) ts.user_stationary.terms.push_back({edge.item, config.beta * edge.weight});
    }
    ts.user_stationary.offsets[u + 1] = static_cast<std::uint32_t>(ts.user_stationary.terms.size());
  }
  ts.item_stationary = transpose(ts.user_stationary, ts.num_items);
  return ts;
}

LossBreakdown evaluate(const StateTrace& trace, const ModelParams& params, const TermSet& terms,
                       const ObjectiveConfig& config) {
  check_compatible(trace, params, terms);
  const std::size_t U = terms.num_users;
  std::vector<double> rating(U), temporal(U), stationary(U);
  const int ref = terms.reference_epoch;
  const auto users = static_cast<std::int64_t>(U);
#pragma omp parallel for schedule(static)
  for (std::int64_t su = 0; su < users; ++su) {
    const auto u = static_cast<std::uint32_t>(su);
    double r_sum = 0.0, t_sum = 0.0, s_sum = 0.0;
    for (const auto& term : terms.user_ratings.at(u)) {
      const double e = term.rating - model::predict(trace, params, u, term.other, term.epoch);
      r_sum += e * e;
    }
    for (const auto& term : terms.user_pairs.at(u)) {
      t_sum += term.weight * squared_distance(trace.items.proj_at(term.other, term.epoch), trace.users.proj_at(u, term.epoch));
    }
    for (const auto& term : terms.user_stationary.at(u)) {
      const double dist = terms.beta_latents == BetaLatents::Stationary
                              ? squared_distance(params.item_embed.row(term.other), params.user_embed.row(u))
                              : squared_distance(trace.items.proj_at(term.other, ref), trace.users.proj_at(u, ref));
      s_sum += term.weight * dist;
    }
    rating[u] = r_sum;
    temporal[u] = t_sum;
    stationary[u] = s_sum;
  }
  LossBreakdown out;
  for (std::size_t u = 0; u < U; ++u) {
    out.rating += rating[u];
    out.temporal += temporal[u];
    out.stationary += stationary[u];
  }
  double sq = 0.0;
  for (const auto& block : params.blocks()) sq += block.tensor->squared_norm();
  out.regularization = config.lambda_reg * sq;
  out.total = out.rating + out.temporal + out.stationary + out.regularization;
  if (!std::isfinite(out.total)) throw Error(ErrorCode::NonFiniteValue, "objective value");
  return out;
}

double loss(const StateTrace& trace, const ModelParams& params, const data::RatingDataset& ds,
            const graph::ExplainabilityGraph& graph, const ObjectiveConfig& config) {
  validate(config, params.dims);
  return evaluate(trace, params, build_terms(ds, graph, config), config).total;
}

double loss_dry(const StateTrace& trace, const ModelParams& params, const data::RatingDataset& ds,
                const graph::ExplainabilityGraph& graph, ObjectiveConfig config) {
  config.mode = Mode::Dry;
  return loss(trace, params, ds, graph, config);
}

double loss_fluid(const StateTrace& trace, const ModelParams& params, const data::RatingDataset& ds,
                  const graph::ExplainabilityGraph& graph, ObjectiveConfig config) {
  config.mode = Mode::Fluid;
  return loss(trace, params, ds, graph, config);
}

double loss_reference(const StateTrace& trace, const ModelParams& params, const data::RatingDataset& ds,
                      const graph::ExplainabilityGraph& graph, const ObjectiveConfig& config) {
  double total = 0.0;
  for (const auto& e : ds.events()) {
    if (!e.is_train()) continue;
    const double r = e.rating - model::predict(trace, params, e.user, e.item, e.epoch);
    total += r * r;
  }
  for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
    for (std::uint32_t m = 0; m < ds.num_items(); ++m) {
      for (int t = 0; t < ds.num_epochs(); ++t) {
        const double w = graph.temporal_weight(u, m, t);
        if (w == 0.0) continue;
        total += temporal_factor(config, t, graph.reference_epoch) * w *
                 squared_distance(trace.items.proj_at(m, t), trace.users.proj_at(u, t));
      }
      const double ws = graph.stationary_weight(u, m);
      if (ws == 0.0) continue;
      const int ref = graph.reference_epoch;
      const double dist = config.beta_latents == BetaLatents::Stationary
                              ? squared_distance(params.item_embed.row(m), params.user_embed.row(u))
                              : squared_distance(trace.items.proj_at(m, ref), trace.users.proj_at(u, ref));
      total += config.beta * ws * dist;
    }
  }
  for (const auto& block : params.blocks()) total += config.lambda_reg * block.tensor->squared_norm();
  return total;
}

Inputs Inputs::build(const data::RatingDataset& ds, double input_offset) {
  return {model::build_chain_inputs(ds, Side::User, input_offset), model::build_chain_inputs(ds, Side::Item, input_offset)};
}

namespace {

// d(loss)/d(projected states) and d(loss)/d(embeddings) for one side.
void side_gradients(const StateTrace& trace, const ModelParams& params, const TermSet& terms, Side side,
                    std::vector<double>& d_proj, Tensor& d_embed, bool serial) {
  const model::ChainTrace& mine = trace.chain(side);
  const model::ChainTrace& theirs = trace.chain(model::other(side));
  const Tensor& my_embed = params.embedding(side);
  const Tensor& their_embed = params.embedding(model::other(side));
  const bool user_side = side == Side::User;
  const auto& ratings = user_side ? terms.user_ratings : terms.item_ratings;
  const auto& pairs = user_side ? terms.user_pairs : terms.item_pairs;
  const auto& stationary = user_side ? terms.user_stationary : terms.item_stationary;
  const int ref = terms.reference_epoch;
  const std::size_t k = mine.k, ks = my_embed.cols();
  d_proj.assign(mine.proj.size(), 0.0);
  d_embed = Tensor(my_embed.shape());

  auto run = [&](std::size_t e) {
    auto embed_row = d_embed.row(e);
    for (const auto& term : ratings.at(e)) {
      const std::uint32_t u = user_side ? static_cast<std::uint32_t>(e) : term.other;
      const std::uint32_t j = user_side ? term.other : static_cast<std::uint32_t>(e);
      const double g = 2.0 * (model::predict(trace, params, u, j, term.epoch) - term.rating);
      double* dp = d_proj.data() + mine.slot(e, term.epoch) * k;
      const auto other_proj = theirs.proj_at(term.other, term.epoch);
      for (std::size_t r = 0; r < k; ++r) dp[r] += g * other_proj[r];
      const auto other_embed = their_embed.row(term.other);
      for (std::size_t r = 0; r < ks; ++r) embed_row[r] += g * other_embed[r];
    }
    for (const auto& term : pairs.at(e)) {
      double* dp = d_proj.data() + mine.slot(e, term.epoch) * k;
      const auto a = mine.proj_at(e, term.epoch);
      const auto b = theirs.proj_at(term.other, term.epoch);
      for (std::size_t r = 0; r < k; ++r) dp[r] += 2.0 * term.weight * (a[r] - b[r]);
    }
    for (const auto& term : stationary.at(e)) {
      if (terms.beta_latents == BetaLatents::Stationary) {
        const auto a = my_embed.row(e);
        const auto b = their_embed.row(term.other);
        for (std::size_t r = 0; r < ks; ++r) embed_row[r] += 2.0 * term.weight * (a[r] - b[r]);
      } else {
        double* dp = d_proj.data() + mine.slot(e, ref) * k;
        const auto a = mine.proj_at(e, ref);
        const auto b = theirs.proj_at(term.other, ref);
        for (std::size_t r = 0; r < k; ++r) dp[r] += 2.0 * term.weight * (a[r] - b[r]);
      }
    }
  };

  const auto n = static_cast<std::int64_t>(mine.entities);
  if (serial) {
    for (std::int64_t e = 0; e < n; ++e) run(static_cast<std::size_t>(e));
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < n; ++e) run(static_cast<std::size_t>(e));
  }
}

void add_scaled(Tensor& into, const Tensor& from, double scale) {
  auto dst = into.data();
  auto src = from.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

ModelParams gradient(const StateTrace& trace, const ModelParams& params, const Inputs& inputs,
                     const TermSet& terms, const ObjectiveConfig& config, Scope scope, bool serial) {
  check_compatible(trace, params, terms);
  ModelParams grads = ModelParams::zeros(params.dims);
  grads.input_offset = params.input_offset;
  for (Side side : {Side::User, Side::Item}) {
    if ((scope == Scope::UserSide && side != Side::User) || (scope == Scope::ItemSide && side != Side::Item)) continue;
    std::vector<double> d_proj;
    Tensor d_embed;
    side_gradients(trace, params, terms, side, d_proj, d_embed, serial);
    const model::ChainGradient cg =
        model::backward_chain(params, inputs.chain(side), trace.chain(side), d_proj, serial);
    model::LstmParams& lstm = side == Side::User ? grads.user_lstm : grads.item_lstm;
    lstm.input_transform = cg.V;
    lstm.W = cg.W;
    lstm.R = cg.R;
    lstm.b = cg.b;
    (side == Side::User ? grads.A : grads.B) = cg.P;
    (side == Side::User ? grads.c : grads.d) = cg.bias;
    (side == Side::User ? grads.user_embed : grads.item_embed) = std::move(d_embed);
  }
  if (config.lambda_reg != 0.0) {
    auto g_blocks = grads.blocks();
    const auto p_blocks = params.blocks();
    for (std::size_t b = 0; b < g_blocks.size(); ++b) {
      const bool in_scope = scope == Scope::All || (scope == Scope::UserSide && p_blocks[b].side == Side::User) ||
                            (scope == Scope::ItemSide && p_blocks[b].side == Side::Item);
      if (in_scope) add_scaled(*g_blocks[b].tensor, *p_blocks[b].tensor, 2.0 * config.lambda_reg);
    }
  }
  for (const auto& block : grads.blocks()) require_finite(block.tensor->values(), "objective gradient");
  return grads;
}

ModelParams grad(const StateTrace& trace, const ModelParams& params, const data::RatingDataset& ds,
                 const graph::ExplainabilityGraph& graph, const ObjectiveConfig& config) {
  validate(config, params.dims);
  return gradient(trace, params, Inputs::build(ds, params.input_offset), build_terms(ds, graph, config), config);
}

}  // namespace tempex::objective
