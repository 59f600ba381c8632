/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tempex/data.hpp"
#include "tempex/graph.hpp"
#include "tempex/model.hpp"

namespace tempex::eval {

struct EvalConfig {
  std::size_t n = 10;
  /// An item is explainable to a user when its stationary weight exceeds this.
  double theta_exp = 0.01;
  /// Test ratings at or above this are relevant for MRR / MAP / MR.
  int relevance_threshold = 4;
};

double clamp_rating(double r) noexcept;

/// RMSE with predictions clamped to the star range first.
double rmse(std::span<const double> predictions, std::span<const double> targets);
/// RMSE over every test-tagged event of the dataset.
double test_rmse(const model::StateTrace& trace, const model::ModelParams& params, const data::RatingDataset& ds);

struct ScoredItem {
  std::uint32_t item = 0;
  double score = 0.0;
  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

/// Top-N items by score (ties: lower id first), never containing an item
/// the user rated in train.
struct RankedList {
  std::uint32_t user = 0;
  int epoch = 0;
  std::size_t cutoff = 0;
  std::vector<ScoredItem> items;
};

/// Sorted item ids.
using ItemSet = std::vector<std::uint32_t>;

std::optional<int> first_test_epoch(const data::RatingDataset& ds, std::uint32_t user);

/// Ranks every item the user has not rated in train, scored at the user's
/// first test epoch (the last epoch if the user has no test events).
RankedList rank(const model::StateTrace& trace, const model::ModelParams& params, const data::RatingDataset& ds,
                std::uint32_t user, std::size_t n);

/// Test items rated at least `threshold` that the user did not rate in train.
ItemSet relevant_items(const data::RatingDataset& ds, std::uint32_t user, int threshold);

/// Per-list metrics; nullopt when the relevance set is empty.
std::optional<double> reciprocal_rank(const RankedList& list, const ItemSet& relevant);
/// Sum of precision@k at relevant positions over min(|relevant|, cutoff).
std::optional<double> average_precision(const RankedList& list, const ItemSet& relevant);
std::optional<double> recall(const RankedList& list, const ItemSet& relevant);

/// Means over lists whose relevance set is non-empty (0 when there are none).
double mrr(std::span<const RankedList> lists, std::span<const ItemSet> relevant);
double map_at_n(std::span<const RankedList> lists, std::span<const ItemSet> relevant);
double mean_recall_at_n(std::span<const RankedList> lists, std::span<const ItemSet> relevant);

std::size_t explainable_in(const RankedList& list, const graph::ExplainabilityGraph& graph, double theta_exp);
std::size_t count_explainable(const graph::ExplainabilityGraph& graph, std::uint32_t user, double theta_exp);

/// Mean explainable precision: explainable share of each non-empty list.
double mep(std::span<const RankedList> lists, const graph::ExplainabilityGraph& graph, double theta_exp);
/// Mean explainable recall over users with at least one explainable item.
double mer(std::span<const RankedList> lists, const graph::ExplainabilityGraph& graph, double theta_exp);

// ---------------------------------------------------------------------------

struct Bucket {
  std::string label;
  /// Inclusive upper bound on age in days; nullopt means unbounded.
  std::optional<int> max_age_days;
};

/// Within a month, within a year, older.
std::vector<Bucket> default_buckets();

struct EvidenceBucket {
  std::string label;
  std::size_t count = 0;
  double mean_rating = 0.0;  // 0 when count == 0
};

struct ExplanationEvidence {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  int present_day = 0;
  std::size_t neighbor_ratings = 0;
  std::vector<EvidenceBucket> buckets;
  double stationary_weight = 0.0;
  /// (epoch, weight) for every epoch with neighbour evidence, latest first.
  std::vector<std::pair<int, double>> temporal_weights;
};

/// Buckets the train ratings of `item` by the user's neighbours according
/// to their age before the dataset's last train day.
ExplanationEvidence explain(const graph::ExplainabilityGraph& graph, const data::RatingDataset& ds,
                            std::uint32_t user, std::uint32_t item,
                            const std::vector<Bucket>& buckets = default_buckets());

/// Bucket rows by item columns, columns left to right as given.
std::string render_explanations(std::span<const ExplanationEvidence> evidence,
                                std::span<const double> scores = {});

// ---------------------------------------------------------------------------

struct UserRow {
  std::uint32_t user = 0;
  int epoch = 0;
  std::optional<double> reciprocal_rank;
  std::optional<double> average_precision;
  std::optional<double> recall;
  std::optional<double> explainable_precision;
  std::optional<double> explainable_recall;
  std::size_t num_relevant = 0;
  std::size_t num_explainable = 0;
  std::vector<std::uint32_t> top_items;
};

struct EvalReport {
  double rmse = 0.0;
  double mrr = 0.0;
  double map = 0.0;
  double mr = 0.0;
  double mep = 0.0;
  double mer = 0.0;
  std::size_t test_ratings = 0;
  std::size_t p = 0;
  EvalConfig config;
  std::vector<UserRow> users;
};

/// Ranks every user with both train and test events and computes all six
/// metrics. Raises EmptyTestSet when the dataset has no test events.
EvalReport evaluate(const model::StateTrace& trace, const model::ModelParams& params, const data::RatingDataset& ds,
                    const graph::ExplainabilityGraph& graph, const EvalConfig& config);

nlohmann::json to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);
/// Schema problems found in a serialized report; empty when it is valid.
std::vector<std::string> validate_report_json(const nlohmann::json& report);

}  // namespace tempex::eval
