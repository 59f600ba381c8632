/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tempex/error.hpp"
#include "tempex/model.hpp"

using namespace tempex;
using namespace tempex::model;

namespace {

LstmParams zero_lstm(std::size_t hidden, std::size_t in, std::size_t raw) {
  return {Tensor({in, raw + 3}), Tensor({kGates * hidden, in}), Tensor({kGates * hidden, hidden}),
          Tensor({kGates * hidden})};
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.data()) v = u(rng);
  return t;
}

data::RatingDataset small(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return oracle::random_dataset(rng, 6, 5, 4);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("lstm_step with zero parameters") {
    const LstmParams p = zero_lstm(3, 2, 1);
    const Tensor prev_c = Tensor::vector({0.4, -1.0, 2.0});
    const LstmState s = lstm_step(p, Tensor::vector({0.3, 0.1, -0.2}), prev_c, Tensor::vector({5.0, -7.0}));
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(s.c[j] == doctest::Approx(0.5 * prev_c[j]).epsilon(1e-15));
      CHECK(s.h[j] == doctest::Approx(0.5 * std::tanh(0.5 * prev_c[j])).epsilon(1e-15));
    }
    const LstmState z = lstm_step(p, Tensor({3}), Tensor({3}), Tensor::vector({1.0, 2.0}));
    CHECK(z.h == Tensor({3}));
  }

  TEST_CASE("lstm_step matches the gate-by-gate oracle") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      LstmParams p{random_tensor({2, 5}, rng, 1.0), random_tensor({8, 2}, rng, 1.0), random_tensor({8, 2}, rng, 1.0),
                   random_tensor({8}, rng, 1.0)};
      const Tensor h = random_tensor({2}, rng, 1.0), c = random_tensor({2}, rng, 1.0), y = random_tensor({2}, rng, 2.0);
      std::vector<double> ho, co;
      oracle::lstm_step(p, {h[0], h[1]}, {c[0], c[1]}, {y[0], y[1]}, ho, co);
      const LstmState s = lstm_step(p, h, c, y);
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(std::fabs(s.h[j] - ho[j]) <= 1e-12);
        CHECK(std::fabs(s.c[j] - co[j]) <= 1e-12);
      }
    }
  }

  TEST_CASE("raw input assembly") {
    const auto ds = data::RatingDataset::from_events(std::vector<data::RatingEvent>{{0, 0, 35, 3}, {1, 1, 0, 2}},
                                                     data::GridConfig{30, 0, 4});
    CHECK(raw_input(ds, Side::User, 0, 1) == Tensor::vector({3, 0, 1, 0.25, 0}));
    CHECK(raw_input(ds, Side::User, 0, 0) == Tensor::vector({0, 0, 1, 0, 0}));
    CHECK(raw_input(ds, Side::User, 0, 3) == Tensor::vector({0, 0, 1, 0.75, 0.5}));
    CHECK(raw_input(ds, Side::Item, 1, 0) == Tensor::vector({0, 2, 1, 0, 0}));
  }

  TEST_CASE("identity input transform reproduces the raw input") {
    const auto ds = small(2);
    ModelConfig mc;
    mc.input_dim = ds.num_items() + 3;
    ModelParams p = ModelParams::zeros(make_dims(ds, mc));
    p.user_lstm.input_transform = Tensor::identity(ds.num_items() + 3);
    for (int t = 0; t < ds.num_epochs(); ++t) {
      CHECK(build_input(ds, p, Side::User, 1, t) == raw_input(ds, Side::User, 1, t));
    }
  }

  TEST_CASE("zero parameters project to the biases") {
    const auto ds = small(3);
    ModelParams p = ModelParams::zeros(make_dims(ds, ModelConfig{}));
    for (std::size_t q = 0; q < p.c.size(); ++q) {
      p.c[q] = 0.5 + static_cast<double>(q);
      p.d[q] = -1.0 * static_cast<double>(q);
    }
    const StateTrace tr = forward(p, ds);
    for (std::size_t e = 0; e < ds.num_users(); ++e)
      for (int t = 0; t < ds.num_epochs(); ++t)
        for (std::size_t q = 0; q < p.c.size(); ++q) CHECK(tr.users.proj_at(e, t)[q] == p.c[q]);
    for (std::size_t e = 0; e < ds.num_items(); ++e)
      for (int t = 0; t < ds.num_epochs(); ++t)
        for (std::size_t q = 0; q < p.d.size(); ++q) CHECK(tr.items.proj_at(e, t)[q] == p.d[q]);
  }

  TEST_CASE("forward states match the replay oracle and the serial reference") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto ds = small(seed);
      ModelConfig mc;
      mc.hidden = 3;
      mc.input_dim = 4;
      const ModelParams p = ModelParams::init(make_dims(ds, mc), seed, 0.5, seed % 2 ? 3.0 : 0.0);
      const StateTrace tr = forward(p, ds);
      for (Side side : {Side::User, Side::Item}) {
        const auto replay = oracle::replay_states(p, ds, side);
        const ChainTrace& ch = tr.chain(side);
        for (std::size_t e = 0; e < replay.size(); ++e)
          for (int t = 0; t < ds.num_epochs(); ++t)
            for (std::size_t j = 0; j < mc.hidden; ++j)
              CHECK(std::fabs(ch.state_at(e, t)[j] - replay[e][static_cast<std::size_t>(t)][j]) <= 1e-12);
      }
      const StateTrace ref = forward_reference(p, ds);
      for (Side side : {Side::User, Side::Item}) {
        const auto& a = ref.chain(side);
        const auto& b = tr.chain(side);
        REQUIRE(a.state.size() == b.state.size());
        REQUIRE(a.proj.size() == b.proj.size());
        for (std::size_t i = 0; i < a.state.size(); ++i) CHECK(std::fabs(a.state[i] - b.state[i]) <= 1e-12);
        for (std::size_t i = 0; i < a.proj.size(); ++i) CHECK(std::fabs(a.proj[i] - b.proj[i]) <= 1e-12);
      }
    }
  }

  TEST_CASE("prediction at t reads the state after epochs before t") {
    const auto ds = small(5);
    ModelConfig mc;
    mc.hidden = 3;
    const ModelParams p = ModelParams::init(make_dims(ds, mc), 5, 0.5);
    const StateTrace tr = forward(p, ds);
    for (std::size_t q = 0; q < mc.k; ++q) CHECK(tr.users.proj_at(0, 0)[q] == p.c[q]);
    for (int t = 1; t < ds.num_epochs(); ++t) {
      const auto h = tr.users.state_at(0, t - 1);
      for (std::size_t q = 0; q < mc.k; ++q) {
        double v = p.c[q];
        for (std::size_t j = 0; j < mc.hidden; ++j) v += p.A(q, j) * h[j];
        CHECK(tr.users.proj_at(0, t)[q] == doctest::Approx(v).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("single epoch forward is one lstm step") {
    const auto ds = data::RatingDataset::from_events(std::vector<data::RatingEvent>{{0, 0, 1, 3}, {1, 1, 2, 5}},
                                                     data::GridConfig{30, 0, 1});
    ModelConfig mc;
    mc.hidden = 2;
    const ModelParams p = ModelParams::init(make_dims(ds, mc), 9, 0.7);
    const StateTrace tr = forward(p, ds);
    for (std::uint32_t u = 0; u < 2; ++u) {
      const LstmState s = lstm_step(p.user_lstm, Tensor({2}), Tensor({2}), build_input(ds, p, Side::User, u, 0));
      CHECK(std::fabs(tr.users.state_at(u, 0)[0] - s.h[0]) <= 1e-14);
      CHECK(std::fabs(tr.users.state_at(u, 0)[1] - s.h[1]) <= 1e-14);
    }
  }

  TEST_CASE("predict examples") {
    const auto ds = data::RatingDataset::from_events(std::vector<data::RatingEvent>{{0, 0, 1, 3}, {1, 1, 2, 5}},
                                                     data::GridConfig{30, 0, 1});
    ModelConfig mc;
    mc.k = 2;
    mc.k_s = 2;
    ModelParams p = ModelParams::zeros(make_dims(ds, mc));
    CHECK(predict(forward(p, ds), p, 0, 0, 0) == 0.0);
    p.c = Tensor::vector({1, 2});
    p.d = Tensor::vector({0.5, 0.5});
    p.user_embed(0, 0) = 1.0;
    p.item_embed(0, 0) = 1.0;
    CHECK(predict(forward(p, ds), p, 0, 0, 0) == 2.5);

    const ModelParams r = ModelParams::init(make_dims(ds, mc), 4, 0.8);
    const StateTrace tr = forward(r, ds);
    CHECK(predict(tr, r, 0, 1, 0) != predict(tr, r, 1, 0, 0));
  }

  TEST_CASE("dropout masks are seeded and inverted") {
    const auto ds = small(6);
    ModelConfig mc;
    mc.hidden = 4;
    const ModelParams p = ModelParams::init(make_dims(ds, mc), 6, 0.5);
    const auto in = build_chain_inputs(ds, Side::User, 0.0);
    const ChainTrace a = forward_chain(p, in, Dropout{0.5, 42}), b = forward_chain(p, in, Dropout{0.5, 42});
    const ChainTrace c = forward_chain(p, in, Dropout{0.5, 43}), none = forward_chain(p, in);
    CHECK(a.proj == b.proj);
    CHECK(a.dropout != c.dropout);
    CHECK(none.dropout.empty());
    CHECK(a.state == none.state);
    for (double s : a.dropout) CHECK((s == 0.0 || s == 2.0));
    CHECK_THROWS_AS(forward_chain(p, in, Dropout{1.0, 1}), Error);
  }

  TEST_CASE("checkpoint round-trip is exact") {
    const auto ds = small(7);
    const ModelParams p = ModelParams::init(make_dims(ds, ModelConfig{}), 7, 0.3, 3.25);
    std::stringstream buf;
    save_checkpoint(p, buf);
    CHECK(load_checkpoint(buf) == p);
    std::istringstream junk("not a checkpoint\n");
    CHECK_THROWS_AS(load_checkpoint(junk), Error);
  }

  TEST_CASE("validate rejects a mismatched dataset") {
    const auto ds = small(8);
    const ModelParams p = ModelParams::init(make_dims(ds, ModelConfig{}), 1, 0.1);
    auto other = data::RatingDataset::from_events(std::vector<data::RatingEvent>{{0, 0, 1, 3}},
                                                  data::GridConfig{30, 0, 1}, ds.num_users() + 1, 1);
    CHECK_THROWS_AS(validate(p, other), Error);
  }
}
