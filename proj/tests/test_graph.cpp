/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tempex/error.hpp"
#include "tempex/graph.hpp"

using namespace tempex;
using namespace tempex::graph;
using data::RatingDataset;
using data::RatingEvent;

namespace {

RatingDataset make(std::vector<RatingEvent> raw, int epochs) {
  return RatingDataset::from_events(raw, data::GridConfig{30, 0, epochs});
}

std::vector<NeighborSet> manual_neighbors(std::uint32_t user, std::vector<std::uint32_t> ids, std::size_t users) {
  std::vector<NeighborSet> sets(users);
  for (std::uint32_t id : ids) sets[user].neighbors.push_back({id, 0.0});
  return sets;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("similarity examples") {
    // Users 0 and 1 co-rate item 0 at epoch 1 (age 0) and item 1 at epoch 0 (age 1).
    const auto ds = make({{0, 0, 40, 4}, {0, 1, 10, 3}, {1, 0, 41, 5}, {1, 1, 11, 1}, {2, 2, 0, 5}}, 2);
    CHECK(similarity(ds, 0, 1, 1) == 21.5);
    CHECK(similarity(ds, 0, 2, 1) == 0.0);
    CHECK_THROWS_AS(similarity(ds, 1, 1, 1), Error);
  }

  TEST_CASE("similarity is symmetric") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 5; ++rep) {
      const auto ds = oracle::random_dataset(rng, 12, 8, 4);
      const int ref = ds.last_train_epoch();
      for (std::uint32_t i = 0; i < ds.num_users(); ++i)
        for (std::uint32_t k = 0; k < ds.num_users(); ++k)
          if (i != k) {
            CHECK(similarity(ds, i, k, ref) == similarity(ds, k, i, ref));
            CHECK(similarity(ds, i, k, ref, true) == similarity(ds, k, i, ref, true));
          }
    }
  }

  TEST_CASE("normalized similarity of proportional raters is 1") {
    const auto ds = make({{0, 0, 0, 2}, {0, 1, 0, 4}, {1, 0, 0, 1}, {1, 1, 0, 2}}, 1);
    CHECK(similarity(ds, 0, 1, 0, true) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("neighborhood order and ties") {
    const auto ds = make({{0, 0, 0, 5}, {1, 0, 0, 2}, {2, 0, 0, 4}, {3, 1, 0, 4}}, 1);
    const auto q = neighborhood(ds, 0, 2, 0);
    REQUIRE(q.neighbors.size() == 2);
    CHECK(q.neighbors[0].user == 2);
    CHECK(q.neighbors[1].user == 1);
    const auto tie = make({{0, 0, 0, 5}, {1, 0, 0, 3}, {2, 0, 0, 3}}, 1);
    const auto qt = neighborhood(tie, 0, 1, 0);
    CHECK(qt.neighbors.at(0).user == 1);
  }

  TEST_CASE("temporal weight examples") {
    const auto ds = make({{0, 1, 0, 3}, {1, 0, 0, 4}, {2, 0, 0, 5}, {3, 0, 0, 5}}, 1);
    const auto two = manual_neighbors(0, {1, 2}, 4);
    CHECK(temporal_weight(ds, two, 0, 0, 0) == 0.9);
    const auto three = manual_neighbors(0, {1, 2, 3}, 4);
    CHECK(temporal_weight(ds, three, 0, 1, 0) == 0.0);
    const auto fives = make({{1, 0, 0, 5}, {2, 0, 0, 5}, {3, 0, 0, 5}}, 1);
    CHECK(temporal_weight(fives, three, 0, 0, 0) == 1.0);
  }

  TEST_CASE("stationary weight examples") {
    // Neighbour 1 averages 3 on item 0, neighbour 2 averages 4.
    const auto ds = make({{1, 0, 0, 2}, {1, 0, 40, 4}, {2, 0, 0, 4}, {2, 1, 0, 4}}, 2);
    const auto two = manual_neighbors(0, {1, 2}, 3);
    CHECK(stationary_weight(ds, two, 0, 0) == 0.875);
    CHECK(stationary_weight(ds, two, 0, 1) == 0.5);
    CHECK(stationary_weight(ds, two, 0, 2) == 0.0);
  }

  TEST_CASE("no co-ratings still gives a well defined graph") {
    const auto ds = make({{0, 0, 0, 3}, {1, 1, 0, 4}, {2, 2, 0, 5}}, 1);
    const auto g = build_graph(ds, GraphConfig{1, false, std::nullopt});
    CHECK(g.neighbors[0].neighbors.at(0).user == 1);
    CHECK(g.neighbors[1].neighbors.at(0).user == 0);
    CHECK(g.stationary_weight(0, 1) == 1.0);
    CHECK(g.stationary_weight(0, 2) == 0.0);
  }

  TEST_CASE("graph matches the brute-force oracle") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 6; ++rep) {
      const auto ds = oracle::random_dataset(rng, 15, 10, 3);
      const std::size_t p = 1 + rep % 4;
      const auto g = build_graph(ds, GraphConfig{p, false, std::nullopt});
      const auto o = oracle::graph(ds, p);
      REQUIRE(g.reference_epoch == o.ref);
      const std::size_t I = ds.num_items(), T = static_cast<std::size_t>(ds.num_epochs());
      for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
        REQUIRE(g.neighbors[u].neighbors.size() == o.neighbors[u].size());
        for (std::size_t q = 0; q < o.neighbors[u].size(); ++q) {
          CHECK(g.neighbors[u].neighbors[q].user == o.neighbors[u][q]);
          CHECK(g.neighbors[u].neighbors[q].score == o.sim[u][o.neighbors[u][q]]);
        }
        for (std::uint32_t m = 0; m < I; ++m) {
          for (std::size_t t = 0; t < T; ++t) {
            CHECK(g.temporal_weight(u, m, static_cast<int>(t)) == o.temporal[(u * I + m) * T + t]);
          }
          CHECK(g.stationary_weight(u, m) == o.stationary[u * I + m]);
        }
      }
    }
  }

  TEST_CASE("full neighborhood uses every other user") {
    std::mt19937_64 rng(5);
    const auto ds = oracle::random_dataset(rng, 9, 6, 2);
    const std::size_t p = ds.num_users() - 1;
    const auto g = build_graph(ds, GraphConfig{p, false, std::nullopt});
    const auto d = oracle::dense_train(ds);
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
      CHECK(g.neighbors[u].neighbors.size() == p);
      for (std::uint32_t m = 0; m < ds.num_items(); ++m) {
        double sum = 0.0, max = 0.0;
        for (std::uint32_t z = 0; z < ds.num_users(); ++z) {
          if (z == u) continue;
          int s = 0, n = 0;
          for (int t = 0; t < d.T; ++t)
            if (d.at(z, m, t)) s += d.at(z, m, t), ++n;
          if (n) sum += static_cast<double>(s) / n, max = std::max(max, static_cast<double>(s) / n);
        }
        const double expect = max > 0 ? sum / (static_cast<double>(p) * max) : 0.0;
        CHECK(g.stationary_weight(u, m) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("parallel build equals the serial reference") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 4; ++rep) {
      const auto ds = oracle::random_dataset(rng, 20, 15, 4);
      for (bool normalized : {false, true}) {
        const GraphConfig cfg{3, normalized, std::nullopt};
        CHECK(build_graph(ds, cfg) == build_graph_reference(ds, cfg));
      }
    }
  }

  TEST_CASE("reference epoch resolution") {
    const auto ds = make({{0, 0, 0, 3}, {1, 0, 40, 4}}, 3);
    CHECK(resolve_reference_epoch(ds, GraphConfig{}) == 1);
    CHECK(resolve_reference_epoch(ds, GraphConfig{50, false, 2}) == 2);
    CHECK_THROWS_AS(resolve_reference_epoch(ds, GraphConfig{50, false, 0}), Error);
    CHECK_THROWS_AS(build_graph(ds, GraphConfig{0, false, std::nullopt}), Error);
  }

  TEST_CASE("write and read round-trip") {
    std::mt19937_64 rng(8);
    const auto ds = oracle::random_dataset(rng, 10, 8, 3);
    const auto g = build_graph(ds, GraphConfig{3, true, std::nullopt});
    std::stringstream buf;
    write_graph(g, buf);
    CHECK(read_graph(buf) == g);
  }
}
