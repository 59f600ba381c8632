/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tempex/data.hpp"
#include "tempex/tensor.hpp"

namespace tempex::model {

enum class Side { User, Item };

inline const char* to_string(Side s) { return s == Side::User ? "user" : "item"; }
inline Side other(Side s) { return s == Side::User ? Side::Item : Side::User; }

/// Architecture knobs. k is the width of the projected dynamic states, k_s
/// the width of the stationary embeddings.
struct ModelConfig {
  std::size_t hidden = 8;
  std::size_t input_dim = 8;
  std::size_t k = 8;
  std::size_t k_s = 8;
  double init_scale = 0.1;
  /// Subtract the train mean from observed ratings in the chain inputs.
  bool center_inputs = false;
};

struct ModelDims {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int num_epochs = 0;
  std::size_t hidden = 0;
  std::size_t input_dim = 0;
  std::size_t k = 0;
  std::size_t k_s = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Number of gates stacked in W, R and b, in the order input, forget,
/// output, candidate.
constexpr std::size_t kGates = 4;

struct LstmParams {
  Tensor input_transform;  // V: input_dim x (raw_dim + 3)
  Tensor W;                // 4H x input_dim
  Tensor R;                // 4H x H
  Tensor b;                // 4H

  std::size_t hidden() const noexcept { return R.cols(); }
  std::size_t input_dim() const noexcept { return W.cols(); }
  std::size_t raw_dim() const noexcept { return input_transform.cols() - 3; }
  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct ModelParams;

/// A named parameter block and the side of the model it belongs to.
template <class TensorT>
struct BlockRefT {
  const char* name;
  Side side;
  TensorT* tensor;
};
using BlockRef = BlockRefT<Tensor>;
using ConstBlockRef = BlockRefT<const Tensor>;

struct ModelParams {
  ModelDims dims;
  /// Subtracted from every observed rating before it enters a chain.
  double input_offset = 0.0;
  LstmParams user_lstm;
  LstmParams item_lstm;
  Tensor A, c;  // user projection k x H, k
  Tensor B, d;  // item projection k x H, k
  Tensor user_embed;  // num_users x k_s
  Tensor item_embed;  // num_items x k_s

  /// Uniform(-scale, scale) draw of every block from a seeded generator.
  static ModelParams init(const ModelDims& dims, std::uint64_t seed, double scale, double input_offset = 0.0);
  static ModelParams zeros(const ModelDims& dims);

  const LstmParams& lstm(Side s) const { return s == Side::User ? user_lstm : item_lstm; }
  const Tensor& projection(Side s) const { return s == Side::User ? A : B; }
  const Tensor& projection_bias(Side s) const { return s == Side::User ? c : d; }
  const Tensor& embedding(Side s) const { return s == Side::User ? user_embed : item_embed; }

  /// Blocks in a fixed order: user.V user.W user.R user.b A c U_stat
  /// item.V item.W item.R item.b B d M_stat.
  std::vector<BlockRef> blocks();
  std::vector<ConstBlockRef> blocks() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelDims make_dims(const data::RatingDataset& ds, const ModelConfig& config);
void validate(const ModelParams& params, const data::RatingDataset& ds);

// ---------------------------------------------------------------------------

struct LstmState {
  Tensor h;
  Tensor c;
};

/// One conventional LSTM step built from Tensor ops:
/// c = f*prev_c + i*g, h = o*tanh(c).
LstmState lstm_step(const LstmParams& params, const Tensor& prev_h, const Tensor& prev_c, const Tensor& y);

/// Sparse observed-rating inputs of one chain, per (entity, epoch), taken
/// from the train split only.
struct ChainInputs {
  struct Entry {
    std::uint32_t index;
    double value;
  };
  Side side = Side::User;
  std::size_t entities = 0;
  std::size_t raw_dim = 0;
  int epochs = 0;
  std::vector<std::uint32_t> offsets;  // entities * epochs + 1
  std::vector<Entry> entries;

  std::span<const Entry> at(std::size_t entity, int epoch) const {
    const std::size_t slot = entity * static_cast<std::size_t>(epochs) + static_cast<std::size_t>(epoch);
    return {entries.data() + offsets[slot], offsets[slot + 1] - offsets[slot]};
  }
};

ChainInputs build_chain_inputs(const data::RatingDataset& ds, Side side, double input_offset);

/// Dense chain input [x_t, 1, tau_t, tau_{t-1}] with tau_t = t / T and
/// tau_{-1} = 0.
Tensor raw_input(const data::RatingDataset& ds, Side side, std::uint32_t id, int epoch, double input_offset = 0.0);

/// y_t = V [x_t, 1, tau_t, tau_{t-1}] for one entity.
Tensor build_input(const data::RatingDataset& ds, const ModelParams& params, Side side, std::uint32_t id,
                   int epoch);

/// Recorded activations of one chain. The state read when predicting at
/// epoch t is the hidden state after consuming epochs < t (zero at t = 0),
/// optionally scaled by a dropout mask; proj(e, t) = P * read + bias.
struct ChainTrace {
  Side side = Side::User;
  std::size_t entities = 0;
  int epochs = 0;
  std::size_t hidden = 0;
  std::size_t input_dim = 0;
  std::size_t k = 0;
  std::vector<double> y;        // [e][t][input_dim]
  std::vector<double> gates;    // [e][t][4H], post-activation
  std::vector<double> cell;     // [e][t][H]
  std::vector<double> state;    // [e][t][H]
  std::vector<double> dropout;  // [e][t][H] scale for the state read at t; empty when off
  std::vector<double> proj;     // [e][t][k]

  std::size_t slot(std::size_t e, int t) const { return e * static_cast<std::size_t>(epochs) + static_cast<std::size_t>(t); }
  std::span<const double> y_at(std::size_t e, int t) const { return {y.data() + slot(e, t) * input_dim, input_dim}; }
  std::span<const double> gates_at(std::size_t e, int t) const {
    return {gates.data() + slot(e, t) * kGates * hidden, kGates * hidden};
  }
  std::span<const double> cell_at(std::size_t e, int t) const { return {cell.data() + slot(e, t) * hidden, hidden}; }
  std::span<const double> state_at(std::size_t e, int t) const { return {state.data() + slot(e, t) * hidden, hidden}; }
  std::span<const double> proj_at(std::size_t e, int t) const { return {proj.data() + slot(e, t) * k, k}; }
  /// Dropout scale applied to state_at(e, t - 1) when read at t, or empty.
  std::span<const double> dropout_at(std::size_t e, int t) const {
    if (dropout.empty()) return {};
    return {dropout.data() + slot(e, t) * hidden, hidden};
  }
};

struct StateTrace {
  ChainTrace users;
  ChainTrace items;

  const ChainTrace& chain(Side s) const { return s == Side::User ? users : items; }
  ChainTrace& chain(Side s) { return s == Side::User ? users : items; }
};

/// Inverted dropout on the states read by the projections.
struct Dropout {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

/// OpenMP forward pass of one chain from zero initial states. Raises
/// NonFiniteValue if any activation is not finite.
ChainTrace forward_chain(const ModelParams& params, const ChainInputs& inputs, const Dropout& dropout = {});

StateTrace forward(const ModelParams& params, const data::RatingDataset& ds);

/// Serial forward pass built from lstm_step and build_input; no dropout.
StateTrace forward_reference(const ModelParams& params, const data::RatingDataset& ds);

/// Raw (unclamped) <u~_it, m~_jt> + <u_i, m_j>.
double predict(const StateTrace& trace, const ModelParams& params, std::uint32_t user, std::uint32_t item,
               int epoch);

// ---------------------------------------------------------------------------

/// Gradients of one chain's blocks.
struct ChainGradient {
  Tensor V, W, R, b, P, bias;
};

/// Backpropagation through time of d(loss)/d(proj), laid out like
/// ChainTrace::proj, into the chain's LSTM, input transform and projection
/// blocks. Entities are split into a fixed number of chunks whose partial
/// gradients are reduced in chunk order, so the result does not depend on
/// the thread count. `serial` runs the same arithmetic without OpenMP.
ChainGradient backward_chain(const ModelParams& params, const ChainInputs& inputs, const ChainTrace& trace,
                             std::span<const double> d_proj, bool serial = false);

// ---------------------------------------------------------------------------

/// Versioned text checkpoint; values are hex floats so load(save(p)) == p.
void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

}  // namespace tempex::model
