/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <string>
#include <vector>

#include "tempex/objective.hpp"
#include "tempex/tensor.hpp"

namespace tempex::testing {

/// Max finite-difference error of the analytic objective gradient, per block.
struct BlockError {
  std::string name;
  double error;
};

inline std::vector<BlockError> block_gradient_errors(const model::ModelParams& at, const data::RatingDataset& ds,
                                                     const objective::TermSet& terms,
                                                     const objective::ObjectiveConfig& cfg,
                                                     const model::Dropout& dropout = {}) {
  const objective::Inputs inputs = objective::Inputs::build(ds, at.input_offset);
  auto trace_of = [&](const model::ModelParams& p) {
    model::StateTrace tr;
    tr.users = model::forward_chain(p, inputs.users, dropout);
    tr.items = model::forward_chain(p, inputs.items, dropout);
    return tr;
  };
  std::vector<BlockError> out;
  const std::size_t nblocks = at.blocks().size();
  for (std::size_t b = 0; b < nblocks; ++b) {
    model::ModelParams work = at;
    const std::vector<double> theta(at.blocks()[b].tensor->values().begin(), at.blocks()[b].tensor->values().end());
    DifferentiableFn f = [&](std::span<const double> x) {
      model::ModelParams p = at;
      auto dst = p.blocks()[b].tensor->data();
      std::copy(x.begin(), x.end(), dst.begin());
      const model::StateTrace tr = trace_of(p);
      ValueAndGradient vg;
      vg.value = objective::evaluate(tr, p, terms, cfg).total;
      const model::ModelParams g = objective::gradient(tr, p, inputs, terms, cfg);
      const auto gv = g.blocks()[b].tensor->values();
      vg.gradient.assign(gv.begin(), gv.end());
      return vg;
    };
    out.push_back({at.blocks()[b].name, grad_check(f, theta)});
  }
  return out;
}

}  // namespace tempex::testing
