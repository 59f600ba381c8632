/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/model.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "tempex/error.hpp"

namespace tempex::model {

namespace {

constexpr std::size_t kMaxChunks = 64;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double tau(int t, int epochs) { return t < 0 ? 0.0 : static_cast<double>(t) / static_cast<double>(epochs); }

LstmParams lstm_zeros(std::size_t raw_dim, std::size_t input_dim, std::size_t hidden) {
  return {Tensor({input_dim, raw_dim + 3}), Tensor({kGates * hidden, input_dim}), Tensor({kGates * hidden, hidden}),
          Tensor({kGates * hidden})};
}

// y = V [x, 1, tau_t, tau_{t-1}] with x given sparsely, entries in ascending index order.
void transform_input(const Tensor& V, std::span<const ChainInputs::Entry> x, double tau_t, double tau_prev,
                     std::span<double> y) {
  const std::size_t raw = V.cols() - 3;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const auto row = V.row(r);
    double s = 0.0;
    for (const auto& entry : x) s += row[entry.index] * entry.value;
    s += row[raw];
    s += row[raw + 1] * tau_t;
    s += row[raw + 2] * tau_prev;
    y[r] = s;
  }
}

std::size_t num_chunks(std::size_t entities) { return std::max<std::size_t>(1, std::min(entities, kMaxChunks)); }

ChainGradient chain_zeros(const ModelParams& p, Side side) {
  const LstmParams& l = p.lstm(side);
  return {Tensor(l.input_transform.shape()), Tensor(l.W.shape()), Tensor(l.R.shape()), Tensor(l.b.shape()),
          Tensor(p.projection(side).shape()), Tensor(p.projection_bias(side).shape())};
}

void accumulate(ChainGradient& into, const ChainGradient& from) {
  auto add_into = [](Tensor& a, const Tensor& b) {
    auto dst = a.data();
    auto src = b.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  add_into(into.V, from.V);
  add_into(into.W, from.W);
  add_into(into.R, from.R);
  add_into(into.b, from.b);
  add_into(into.P, from.P);
  add_into(into.bias, from.bias);
}

}  // namespace

// ---------------------------------------------------------------------------

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  p.user_lstm = lstm_zeros(dims.num_items, dims.input_dim, dims.hidden);
  p.item_lstm = lstm_zeros(dims.num_users, dims.input_dim, dims.hidden);
  p.A = Tensor({dims.k, dims.hidden});
  p.c = Tensor({dims.k});
  p.B = Tensor({dims.k, dims.hidden});
  p.d = Tensor({dims.k});
  p.user_embed = Tensor({dims.num_users, dims.k_s});
  p.item_embed = Tensor({dims.num_items, dims.k_s});
  return p;
}

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed, double scale, double input_offset) {
  if (dims.hidden < 1 || dims.input_dim < 1 || dims.k < 1 || dims.k_s < 1) {
    throw Error(ErrorCode::ConfigInvalid, "model dimensions must all be >= 1");
  }
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::ConfigInvalid, "init_scale must be >= 0");
  ModelParams p = zeros(dims);
  p.input_offset = input_offset;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(-scale, scale);
  for (auto& block : p.blocks()) {
    for (double& v : block.tensor->data()) v = scale > 0.0 ? draw(rng) : 0.0;
  }
  return p;
}

std::vector<BlockRef> ModelParams::blocks() {
  return {{"user.V", Side::User, &user_lstm.input_transform},
          {"user.W", Side::User, &user_lstm.W},
          {"user.R", Side::User, &user_lstm.R},
          {"user.b", Side::User, &user_lstm.b},
          {"A", Side::User, &A},
          {"c", Side::User, &c},
          {"U_stat", Side::User, &user_embed},
          {"item.V", Side::Item, &item_lstm.input_transform},
          {"item.W", Side::Item, &item_lstm.W},
          {"item.R", Side::Item, &item_lstm.R},
          {"item.b", Side::Item, &item_lstm.b},
          {"B", Side::Item, &B},
          {"d", Side::Item, &d},
          {"M_stat", Side::Item, &item_embed}};
}

std::vector<ConstBlockRef> ModelParams::blocks() const {
  std::vector<ConstBlockRef> out;
  for (const auto& b : const_cast<ModelParams*>(this)->blocks()) out.push_back({b.name, b.side, b.tensor});
  return out;
}

ModelDims make_dims(const data::RatingDataset& ds, const ModelConfig& config) {
  return {ds.num_users(), ds.num_items(), ds.num_epochs(), config.hidden, config.input_dim, config.k, config.k_s};
}

void validate(const ModelParams& params, const data::RatingDataset& ds) {
  const ModelDims& d = params.dims;
  if (d.num_users != ds.num_users() || d.num_items != ds.num_items() || d.num_epochs != ds.num_epochs()) {
    throw Error(ErrorCode::ShapeMismatch, "model dimensions do not match the dataset");
  }
  const ModelParams expect = ModelParams::zeros(d);
  const auto want = expect.blocks();
  const auto have = params.blocks();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].tensor->shape() != have[i].tensor->shape()) {
      throw Error(ErrorCode::ShapeMismatch, std::string("block ") + want[i].name + " has the wrong shape");
    }
  }
}

// ---------------------------------------------------------------------------

LstmState lstm_step(const LstmParams& params, const Tensor& prev_h, const Tensor& prev_c, const Tensor& y) {
  const std::size_t hidden = params.hidden();
  if (prev_h.shape() != Shape{hidden} || prev_c.shape() != Shape{hidden} || y.shape() != Shape{params.input_dim()}) {
    throw Error(ErrorCode::ShapeMismatch, "lstm_step state or input shape");
  }
  const Tensor pre = add(add(matvec(params.W, y), matvec(params.R, prev_h)), params.b);
  auto gate = [&](std::size_t g) {
    return Tensor::vector(std::vector<double>(pre.values().begin() + static_cast<std::ptrdiff_t>(g * hidden),
                                              pre.values().begin() + static_cast<std::ptrdiff_t>((g + 1) * hidden)));
  };
  const Tensor i = sigmoid(gate(0));
  const Tensor f = sigmoid(gate(1));
  const Tensor o = sigmoid(gate(2));
  const Tensor g = tempex::tanh(gate(3));
  Tensor c = add(hadamard(f, prev_c), hadamard(i, g));
  Tensor h = hadamard(o, tempex::tanh(c));
  return {std::move(h), std::move(c)};
}

ChainInputs build_chain_inputs(const data::RatingDataset& ds, Side side, double input_offset) {
  ChainInputs in;
  in.side = side;
  in.entities = side == Side::User ? ds.num_users() : ds.num_items();
  in.raw_dim = side == Side::User ? ds.num_items() : ds.num_users();
  in.epochs = ds.num_epochs();
  const std::size_t slots = in.entities * static_cast<std::size_t>(in.epochs);
  in.offsets.assign(slots + 1, 0);
  for (const auto& e : ds.events()) {
    if (!e.is_train()) continue;
    const std::size_t entity = side == Side::User ? e.user : e.item;
    ++in.offsets[entity * static_cast<std::size_t>(in.epochs) + static_cast<std::size_t>(e.epoch) + 1];
  }
  for (std::size_t s = 0; s < slots; ++s) in.offsets[s + 1] += in.offsets[s];
  in.entries.resize(in.offsets.back());
  std::vector<std::uint32_t> fill(in.offsets.begin(), in.offsets.end() - 1);
  // by_user is (epoch, item) ordered and by_item (epoch, user) ordered, so
  // entries land in ascending index order within each slot.
  for (std::uint32_t entity = 0; entity < in.entities; ++entity) {
    const auto idx = side == Side::User ? ds.by_user(entity) : ds.by_item(entity);
    for (std::uint32_t i : idx) {
      const auto& e = ds.event(i);
      if (!e.is_train()) continue;
      const std::size_t slot = entity * static_cast<std::size_t>(in.epochs) + static_cast<std::size_t>(e.epoch);
      in.entries[fill[slot]++] = {side == Side::User ? e.item : e.user, static_cast<double>(e.rating) - input_offset};
    }
  }
  return in;
}

Tensor raw_input(const data::RatingDataset& ds, Side side, std::uint32_t id, int epoch, double input_offset) {
  const std::size_t raw_dim = side == Side::User ? ds.num_items() : ds.num_users();
  const std::size_t entities = side == Side::User ? ds.num_users() : ds.num_items();
  if (id >= entities) {
    throw Error(side == Side::User ? ErrorCode::UnknownUser : ErrorCode::UnknownItem, std::to_string(id));
  }
  if (epoch < 0 || epoch >= ds.num_epochs()) throw Error(ErrorCode::ShapeMismatch, "epoch out of range");
  std::vector<double> z(raw_dim + 3, 0.0);
  const auto idx = side == Side::User ? ds.by_user(id) : ds.by_item(id);
  for (std::uint32_t i : idx) {
    const auto& e = ds.event(i);
    if (e.is_train() && e.epoch == epoch) z[side == Side::User ? e.item : e.user] = e.rating - input_offset;
  }
  z[raw_dim] = 1.0;
  z[raw_dim + 1] = tau(epoch, ds.num_epochs());
  z[raw_dim + 2] = tau(epoch - 1, ds.num_epochs());
  return Tensor::vector(std::move(z));
}

Tensor build_input(const data::RatingDataset& ds, const ModelParams& params, Side side, std::uint32_t id,
                   int epoch) {
  return matvec(params.lstm(side).input_transform, raw_input(ds, side, id, epoch, params.input_offset));
}

// ---------------------------------------------------------------------------

ChainTrace forward_chain(const ModelParams& params, const ChainInputs& inputs, const Dropout& dropout) {
  const Side side = inputs.side;
  const LstmParams& L = params.lstm(side);
  const Tensor& P = params.projection(side);
  const Tensor& bias = params.projection_bias(side);
  if (L.raw_dim() != inputs.raw_dim || inputs.epochs != params.dims.num_epochs) {
    throw Error(ErrorCode::ShapeMismatch, std::string(to_string(side)) + " chain inputs do not match params");
  }
  if (!(dropout.rate >= 0.0 && dropout.rate < 1.0)) throw Error(ErrorCode::ConfigInvalid, "dropout rate must lie in [0,1)");

  ChainTrace tr;
  tr.side = side;
  tr.entities = inputs.entities;
  tr.epochs = inputs.epochs;
  tr.hidden = L.hidden();
  tr.input_dim = L.input_dim();
  tr.k = P.rows();
  const std::size_t H = tr.hidden, in = tr.input_dim, k = tr.k;
  const std::size_t slots = tr.entities * static_cast<std::size_t>(tr.epochs);
  tr.y.assign(slots * in, 0.0);
  tr.gates.assign(slots * kGates * H, 0.0);
  tr.cell.assign(slots * H, 0.0);
  tr.state.assign(slots * H, 0.0);
  tr.proj.assign(slots * k, 0.0);
  const bool use_dropout = dropout.rate > 0.0;
  if (use_dropout) tr.dropout.assign(slots * H, 0.0);
  const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout.rate) : 1.0;

  const auto entities = static_cast<std::int64_t>(tr.entities);
#pragma omp parallel
  {
    std::vector<double> a(kGates * H), read(H), zeros(H, 0.0);
#pragma omp for schedule(static)
    for (std::int64_t se = 0; se < entities; ++se) {
      const auto e = static_cast<std::size_t>(se);
      std::mt19937_64 rng(splitmix(dropout.seed ^ splitmix((static_cast<std::uint64_t>(side) << 40) + e)));
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      for (int t = 0; t < tr.epochs; ++t) {
        const std::size_t s = tr.slot(e, t);
        const double* prev_h = t == 0 ? zeros.data() : tr.state.data() + tr.slot(e, t - 1) * H;
        const double* prev_c = t == 0 ? zeros.data() : tr.cell.data() + tr.slot(e, t - 1) * H;

        for (std::size_t j = 0; j < H; ++j) {
          double scale = 1.0;
          if (use_dropout) {
            scale = coin(rng) < dropout.rate ? 0.0 : keep_scale;
            tr.dropout[s * H + j] = scale;
          }
          read[j] = prev_h[j] * scale;
        }
        double* proj = tr.proj.data() + s * k;
        for (std::size_t r = 0; r < k; ++r) {
          const auto row = P.row(r);
          double acc = 0.0;
          for (std::size_t j = 0; j < H; ++j) acc += row[j] * read[j];
          proj[r] = acc + bias[r];
        }

        std::span<double> y(tr.y.data() + s * in, in);
        transform_input(L.input_transform, inputs.at(e, t), tau(t, tr.epochs), tau(t - 1, tr.epochs), y);
        for (std::size_t r = 0; r < kGates * H; ++r) {
          const auto wrow = L.W.row(r);
          const auto rrow = L.R.row(r);
          double acc = 0.0;
          for (std::size_t j = 0; j < in; ++j) acc += wrow[j] * y[j];
          for (std::size_t j = 0; j < H; ++j) acc += rrow[j] * prev_h[j];
          a[r] = acc + L.b[r];
        }
        double* gates = tr.gates.data() + s * kGates * H;
        double* cell = tr.cell.data() + s * H;
        double* state = tr.state.data() + s * H;
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = sigmoid(a[j]);
          const double fg = sigmoid(a[H + j]);
          const double og = sigmoid(a[2 * H + j]);
          const double gg = std::tanh(a[3 * H + j]);
          gates[j] = ig;
          gates[H + j] = fg;
          gates[2 * H + j] = og;
          gates[3 * H + j] = gg;
          cell[j] = fg * prev_c[j] + ig * gg;
          state[j] = og * std::tanh(cell[j]);
        }
      }
    }
  }
  require_finite(tr.state, "forward: hidden states");
  require_finite(tr.cell, "forward: cell states");
  require_finite(tr.proj, "forward: projected states");
  return tr;
}

StateTrace forward(const ModelParams& params, const data::RatingDataset& ds) {
  validate(params, ds);
  StateTrace trace;
  trace.users = forward_chain(params, build_chain_inputs(ds, Side::User, params.input_offset));
  trace.items = forward_chain(params, build_chain_inputs(ds, Side::Item, params.input_offset));
  return trace;
}

StateTrace forward_reference(const ModelParams& params, const data::RatingDataset& ds) {
  validate(params, ds);
  StateTrace trace;
  for (Side side : {Side::User, Side::Item}) {
    const LstmParams& L = params.lstm(side);
    ChainTrace& tr = trace.chain(side);
    tr.side = side;
    tr.entities = side == Side::User ? ds.num_users() : ds.num_items();
    tr.epochs = ds.num_epochs();
    tr.hidden = L.hidden();
    tr.input_dim = L.input_dim();
    tr.k = params.projection(side).rows();
    for (std::uint32_t e = 0; e < tr.entities; ++e) {
      Tensor h({tr.hidden}), c({tr.hidden});
      for (int t = 0; t < tr.epochs; ++t) {
        const Tensor proj = add(matvec(params.projection(side), h), params.projection_bias(side));
        const Tensor y = build_input(ds, params, side, e, t);
        LstmState next = lstm_step(L, h, c, y);
        tr.proj.insert(tr.proj.end(), proj.values().begin(), proj.values().end());
        tr.y.insert(tr.y.end(), y.values().begin(), y.values().end());
        tr.cell.insert(tr.cell.end(), next.c.values().begin(), next.c.values().end());
        tr.state.insert(tr.state.end(), next.h.values().begin(), next.h.values().end());
        h = std::move(next.h);
        c = std::move(next.c);
      }
    }
  }
  return trace;
}

double predict(const StateTrace& trace, const ModelParams& params, std::uint32_t user, std::uint32_t item,
               int epoch) {
  if (user >= params.dims.num_users) throw Error(ErrorCode::UnknownUser, std::to_string(user));
  if (item >= params.dims.num_items) throw Error(ErrorCode::UnknownItem, std::to_string(item));
  if (epoch < 0 || epoch >= params.dims.num_epochs) throw Error(ErrorCode::ShapeMismatch, "epoch out of range");
  return inner(trace.users.proj_at(user, epoch), trace.items.proj_at(item, epoch)) +
         inner(params.user_embed.row(user), params.item_embed.row(item));
}

// ---------------------------------------------------------------------------

ChainGradient backward_chain(const ModelParams& params, const ChainInputs& inputs, const ChainTrace& tr,
                             std::span<const double> d_proj, bool serial) {
  const Side side = tr.side;
  const LstmParams& L = params.lstm(side);
  const Tensor& P = params.projection(side);
  const std::size_t H = tr.hidden, in = tr.input_dim, k = tr.k, raw = L.raw_dim();
  const int T = tr.epochs;
  if (d_proj.size() != tr.proj.size()) throw Error(ErrorCode::ShapeMismatch, "backward_chain: d_proj size");

  const std::size_t chunks = num_chunks(tr.entities);
  std::vector<ChainGradient> partial(chunks, chain_zeros(params, side));

  auto run_chunk = [&](std::size_t chunk) {
    ChainGradient& g = partial[chunk];
    const std::size_t lo = chunk * tr.entities / chunks;
    const std::size_t hi = (chunk + 1) * tr.entities / chunks;
    std::vector<double> dh_ext(static_cast<std::size_t>(T) * H), dh(H), dc(H), rec_h(H), rec_c(H), da(kGates * H),
        dy(in);
    for (std::size_t e = lo; e < hi; ++e) {
      std::fill(dh_ext.begin(), dh_ext.end(), 0.0);
      for (int t = 0; t < T; ++t) {
        const double* dp = d_proj.data() + tr.slot(e, t) * k;
        for (std::size_t r = 0; r < k; ++r) g.bias[r] += dp[r];
        if (t == 0) continue;
        const auto prev = tr.state_at(e, t - 1);
        const auto scale = tr.dropout_at(e, t);
        double* ext = dh_ext.data() + static_cast<std::size_t>(t - 1) * H;
        for (std::size_t j = 0; j < H; ++j) {
          const double sj = scale.empty() ? 1.0 : scale[j];
          const double read = prev[j] * sj;
          double acc = 0.0;
          for (std::size_t r = 0; r < k; ++r) {
            g.P(r, j) += dp[r] * read;
            acc += P(r, j) * dp[r];
          }
          ext[j] = acc * sj;
        }
      }

      std::fill(rec_h.begin(), rec_h.end(), 0.0);
      std::fill(rec_c.begin(), rec_c.end(), 0.0);
      // h at the final epoch is never read, so the recursion starts one step earlier.
      for (int t = T - 2; t >= 0; --t) {
        const auto gates = tr.gates_at(e, t);
        const auto cell = tr.cell_at(e, t);
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = gates[j], fg = gates[H + j], og = gates[2 * H + j], gg = gates[3 * H + j];
          const double tc = std::tanh(cell[j]);
          const double prev_c = t == 0 ? 0.0 : tr.cell_at(e, t - 1)[j];
          dh[j] = dh_ext[static_cast<std::size_t>(t) * H + j] + rec_h[j];
          dc[j] = rec_c[j] + dh[j] * og * (1.0 - tc * tc);
          da[j] = dc[j] * gg * ig * (1.0 - ig);
          da[H + j] = dc[j] * prev_c * fg * (1.0 - fg);
          da[2 * H + j] = dh[j] * tc * og * (1.0 - og);
          da[3 * H + j] = dc[j] * ig * (1.0 - gg * gg);
          rec_c[j] = dc[j] * fg;
        }
        const auto y = tr.y_at(e, t);
        std::fill(dy.begin(), dy.end(), 0.0);
        std::fill(rec_h.begin(), rec_h.end(), 0.0);
        for (std::size_t r = 0; r < kGates * H; ++r) {
          const double dar = da[r];
          g.b[r] += dar;
          auto wrow = g.W.row(r);
          const auto wparam = L.W.row(r);
          for (std::size_t j = 0; j < in; ++j) {
            wrow[j] += dar * y[j];
            dy[j] += wparam[j] * dar;
          }
          auto rrow = g.R.row(r);
          const auto rparam = L.R.row(r);
          if (t > 0) {
            const auto prev_h = tr.state_at(e, t - 1);
            for (std::size_t j = 0; j < H; ++j) rrow[j] += dar * prev_h[j];
          }
          for (std::size_t j = 0; j < H; ++j) rec_h[j] += rparam[j] * dar;
        }
        const auto x = inputs.at(e, t);
        const double tt = tau(t, T), tp = tau(t - 1, T);
        for (std::size_t r = 0; r < in; ++r) {
          auto vrow = g.V.row(r);
          for (const auto& entry : x) vrow[entry.index] += dy[r] * entry.value;
          vrow[raw] += dy[r];
          vrow[raw + 1] += dy[r] * tt;
          vrow[raw + 2] += dy[r] * tp;
        }
      }
    }
  };

  const auto n = static_cast<std::int64_t>(chunks);
  if (serial) {
    for (std::int64_t c = 0; c < n; ++c) run_chunk(static_cast<std::size_t>(c));
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < n; ++c) run_chunk(static_cast<std::size_t>(c));
  }

  ChainGradient total = chain_zeros(params, side);
  for (const auto& part : partial) accumulate(total, part);
  return total;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "tempex-checkpoint";
constexpr int kCheckpointVersion = 1;

[[noreturn]] void bad_checkpoint(const std::string& why) {
  throw Error(ErrorCode::MalformedLine, "checkpoint: " + why);
}

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') bad_checkpoint("bad number '" + s + "'");
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  const ModelDims& d = params.dims;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "dims " << d.num_users << ' ' << d.num_items << ' ' << d.num_epochs << ' ' << d.hidden << ' '
      << d.input_dim << ' ' << d.k << ' ' << d.k_s << '\n';
  out << "input_offset " << hex(params.input_offset) << '\n';
  for (const auto& block : params.blocks()) {
    const Tensor& t = *block.tensor;
    out << "block " << block.name << ' ' << t.rank();
    for (std::size_t s : t.shape()) out << ' ' << s;
    out << '\n';
    const std::size_t cols = t.rank() == 2 ? t.cols() : t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << hex(t[i]) << ((i + 1) % cols == 0 ? '\n' : ' ');
    }
  }
  out << "end\n";
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  save_checkpoint(params, out);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

ModelParams load_checkpoint(std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != kCheckpointMagic) bad_checkpoint("missing header");
  if (version != kCheckpointVersion) bad_checkpoint("unsupported version " + std::to_string(version));
  ModelDims d;
  if (!(in >> word) || word != "dims") bad_checkpoint("missing dims");
  if (!(in >> d.num_users >> d.num_items >> d.num_epochs >> d.hidden >> d.input_dim >> d.k >> d.k_s)) {
    bad_checkpoint("bad dims");
  }
  ModelParams p = ModelParams::zeros(d);
  if (!(in >> word) || word != "input_offset" || !(in >> word)) bad_checkpoint("missing input_offset");
  p.input_offset = parse_hex(word);
  for (auto& block : p.blocks()) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> word >> name >> rank) || word != "block") bad_checkpoint("missing block header");
    if (name != block.name) bad_checkpoint("expected block " + std::string(block.name) + ", found " + name);
    Shape shape(rank);
    for (auto& s : shape) {
      if (!(in >> s)) bad_checkpoint("bad shape for " + name);
    }
    if (shape != block.tensor->shape()) throw Error(ErrorCode::ShapeMismatch, "checkpoint block " + name);
    std::vector<double> values(block.tensor->size());
    for (double& v : values) {
      if (!(in >> word)) bad_checkpoint("truncated block " + name);
      v = parse_hex(word);
    }
    *block.tensor = Tensor(shape, std::move(values));
  }
  if (!(in >> word) || word != "end") bad_checkpoint("missing end marker");
  return p;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace tempex::model
