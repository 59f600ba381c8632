/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempex/data.hpp"

namespace tempex::graph {

struct GraphConfig {
  std::size_t p = 50;
  /// Divide the discounted inner product by the discounted self-norms.
  bool normalized = false;
  /// Defaults to the dataset's last train epoch.
  std::optional<int> reference_epoch;
};

struct Neighbor {
  std::uint32_t user = 0;
  double score = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// The p most similar users to `user`, best first, ties by ascending id.
struct NeighborSet {
  std::uint32_t user = 0;
  int reference_epoch = 0;
  std::vector<Neighbor> neighbors;
  friend bool operator==(const NeighborSet&, const NeighborSet&) = default;
};

struct TemporalEdge {
  std::uint32_t item = 0;
  std::int32_t epoch = 0;
  double weight = 0.0;
  friend bool operator==(const TemporalEdge&, const TemporalEdge&) = default;
};

struct StationaryEdge {
  std::uint32_t item = 0;
  double weight = 0.0;
  friend bool operator==(const StationaryEdge&, const StationaryEdge&) = default;
};

/// Sparse user-item explainability weights. Only entries backed by at least
/// one neighbour rating are stored, so every stored weight lies in (0, 1];
/// absent entries are 0.
struct ExplainabilityGraph {
  std::size_t p = 0;
  int reference_epoch = 0;
  bool normalized = false;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int num_epochs = 0;
  std::vector<NeighborSet> neighbors;                 // per user
  std::vector<std::vector<TemporalEdge>> temporal;    // per user, sorted by (item, epoch)
  std::vector<std::vector<StationaryEdge>> stationary;  // per user, sorted by item

  double temporal_weight(std::uint32_t user, std::uint32_t item, int epoch) const;
  double stationary_weight(std::uint32_t user, std::uint32_t item) const;
  std::span<const TemporalEdge> temporal_edges(std::uint32_t user, std::uint32_t item) const;
  std::size_t temporal_count() const noexcept;
  std::size_t stationary_count() const noexcept;

  friend bool operator==(const ExplainabilityGraph&, const ExplainabilityGraph&) = default;
};

/// Discounted rating inner product over co-rated (item, epoch) pairs of the
/// train split, each weighted by 1 / (1 + age), age = reference_epoch - epoch.
/// Events after the reference epoch are ignored.
double similarity(const data::RatingDataset& ds, std::uint32_t i, std::uint32_t k, int reference_epoch,
                  bool normalized = false);

NeighborSet neighborhood(const data::RatingDataset& ds, std::uint32_t user, std::size_t p, int reference_epoch,
                         bool normalized = false);

/// Sum of neighbour ratings of (item, epoch) over |Q| times their maximum;
/// 0 when no neighbour rated it. `neighbors` is indexed by user.
double temporal_weight(const data::RatingDataset& ds, std::span<const NeighborSet> neighbors, std::uint32_t user,
                       std::uint32_t item, int epoch);

/// As temporal_weight, with each neighbour's rating replaced by their mean
/// rating of the item across epochs.
double stationary_weight(const data::RatingDataset& ds, std::span<const NeighborSet> neighbors,
                         std::uint32_t user, std::uint32_t item);

int resolve_reference_epoch(const data::RatingDataset& ds, const GraphConfig& config);

/// OpenMP build, parallel over users.
ExplainabilityGraph build_graph(const data::RatingDataset& ds, const GraphConfig& config);

/// Serial build composed from the per-entry operations above. Slow; kept as
/// the reference the parallel build is tested against.
ExplainabilityGraph build_graph_reference(const data::RatingDataset& ds, const GraphConfig& config);

void write_graph(const ExplainabilityGraph& g, std::ostream& out);
void write_graph(const ExplainabilityGraph& g, const std::string& path);
ExplainabilityGraph read_graph(std::istream& in);
ExplainabilityGraph read_graph(const std::string& path);

}  // namespace tempex::graph
