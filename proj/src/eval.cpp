/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tempex/error.hpp"

namespace tempex::eval {

using data::RatingDataset;

namespace {

bool contains(const ItemSet& set, std::uint32_t item) { return std::binary_search(set.begin(), set.end(), item); }

template <class F>
double mean_defined(std::size_t n, F per_list) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (const std::optional<double> v = per_list(i)) {
      sum += *v;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

void check_lengths(std::size_t lists, std::size_t sets) {
  if (lists != sets) throw Error(ErrorCode::ShapeMismatch, "one relevance set is needed per ranked list");
}

ItemSet train_items(const RatingDataset& ds, std::uint32_t user) {
  ItemSet items;
  for (std::uint32_t i : ds.by_user(user)) {
    if (ds.event(i).is_train()) items.push_back(ds.event(i).item);
  }
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

double clamp_rating(double r) noexcept {
  return std::clamp(r, static_cast<double>(data::kMinRating), static_cast<double>(data::kMaxRating));
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw Error(ErrorCode::ShapeMismatch, "rmse: length mismatch");
  if (targets.empty()) throw Error(ErrorCode::EmptyTestSet, "rmse over zero ratings");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = clamp_rating(predictions[i]) - targets[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(targets.size()));
}

double test_rmse(const model::StateTrace& trace, const model::ModelParams& params, const RatingDataset& ds) {
  std::vector<double> predictions, targets;
  for (const auto& e : ds.events()) {
    if (e.is_train()) continue;
    predictions.push_back(model::predict(trace, params, e.user, e.item, e.epoch));
    targets.push_back(e.rating);
  }
  if (targets.empty()) throw Error(ErrorCode::EmptyTestSet, "dataset has no test events");
  return rmse(predictions, targets);
}

std::optional<int> first_test_epoch(const RatingDataset& ds, std::uint32_t user) {
  for (std::uint32_t i : ds.by_user(user)) {
    if (!ds.event(i).is_train()) return ds.event(i).epoch;  // by_user is epoch-ordered
  }
  return std::nullopt;
}

RankedList rank(const model::StateTrace& trace, const model::ModelParams& params, const RatingDataset& ds,
                std::uint32_t user, std::size_t n) {
  if (user >= ds.num_users()) throw Error(ErrorCode::UnknownUser, "user " + std::to_string(user));
  const ItemSet seen = train_items(ds, user);
  if (seen.empty()) throw Error(ErrorCode::UnknownUser, "user " + std::to_string(user) + " has no train ratings");
  RankedList list;
  list.user = user;
  list.epoch = first_test_epoch(ds, user).value_or(ds.num_epochs() - 1);
  list.cutoff = n;
  std::vector<ScoredItem> all;
  for (std::uint32_t m = 0; m < ds.num_items(); ++m) {
    if (!contains(seen, m)) all.push_back({m, model::predict(trace, params, user, m, list.epoch)});
  }
  const std::size_t keep = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const ScoredItem& a, const ScoredItem& b) {
                      return a.score != b.score ? a.score > b.score : a.item < b.item;
                    });
  all.resize(keep);
  list.items = std::move(all);
  return list;
}

ItemSet relevant_items(const RatingDataset& ds, std::uint32_t user, int threshold) {
  const ItemSet seen = train_items(ds, user);
  ItemSet rel;
  for (std::uint32_t i : ds.by_user(user)) {
    const auto& e = ds.event(i);
    if (!e.is_train() && e.rating >= threshold && !contains(seen, e.item)) rel.push_back(e.item);
  }
  std::sort(rel.begin(), rel.end());
  rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
  return rel;
}

std::optional<double> reciprocal_rank(const RankedList& list, const ItemSet& relevant) {
  if (relevant.empty()) return std::nullopt;
  for (std::size_t k = 0; k < list.items.size(); ++k) {
    if (contains(relevant, list.items[k].item)) return 1.0 / static_cast<double>(k + 1);
  }
  return 0.0;
}

std::optional<double> average_precision(const RankedList& list, const ItemSet& relevant) {
  if (relevant.empty()) return std::nullopt;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < list.items.size(); ++k) {
    if (contains(relevant, list.items[k].item)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  const std::size_t denom = std::min(relevant.size(), std::max<std::size_t>(list.cutoff, 1));
  return sum / static_cast<double>(denom);
}

std::optional<double> recall(const RankedList& list, const ItemSet& relevant) {
  if (relevant.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& s : list.items) hits += contains(relevant, s.item) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double mrr(std::span<const RankedList> lists, std::span<const ItemSet> relevant) {
  check_lengths(lists.size(), relevant.size());
  return mean_defined(lists.size(), [&](std::size_t i) { return reciprocal_rank(lists[i], relevant[i]); });
}

double map_at_n(std::span<const RankedList> lists, std::span<const ItemSet> relevant) {
  check_lengths(lists.size(), relevant.size());
  return mean_defined(lists.size(), [&](std::size_t i) { return average_precision(lists[i], relevant[i]); });
}

double mean_recall_at_n(std::span<const RankedList> lists, std::span<const ItemSet> relevant) {
  check_lengths(lists.size(), relevant.size());
  return mean_defined(lists.size(), [&](std::size_t i) { return recall(lists[i], relevant[i]); });
}

std::size_t explainable_in(const RankedList& list, const graph::ExplainabilityGraph& graph, double theta_exp) {
  std::size_t n = 0;
  for (const auto& s : list.items) n += graph.stationary_weight(list.user, s.item) > theta_exp ? 1 : 0;
  return n;
}

std::size_t count_explainable(const graph::ExplainabilityGraph& graph, std::uint32_t user, double theta_exp) {
  std::size_t n = 0;
  for (const auto& e : graph.stationary.at(user)) n += e.weight > theta_exp ? 1 : 0;
  return n;
}

double mep(std::span<const RankedList> lists, const graph::ExplainabilityGraph& graph, double theta_exp) {
  return mean_defined(lists.size(), [&](std::size_t i) -> std::optional<double> {
    if (lists[i].items.empty()) return std::nullopt;
    return static_cast<double>(explainable_in(lists[i], graph, theta_exp)) /
           static_cast<double>(lists[i].items.size());
  });
}

double mer(std::span<const RankedList> lists, const graph::ExplainabilityGraph& graph, double theta_exp) {
  return mean_defined(lists.size(), [&](std::size_t i) -> std::optional<double> {
    const std::size_t total = count_explainable(graph, lists[i].user, theta_exp);
    if (total == 0) return std::nullopt;
    return static_cast<double>(explainable_in(lists[i], graph, theta_exp)) / static_cast<double>(total);
  });
}

// ---------------------------------------------------------------------------

std::vector<Bucket> default_buckets() {
  return {{"Epoch 1 (<= 30 days)", 30}, {"Epoch 2 (<= 365 days)", 365}, {"Epoch 3 (> 365 days)", std::nullopt}};
}

ExplanationEvidence explain(const graph::ExplainabilityGraph& graph, const RatingDataset& ds, std::uint32_t user,
                            std::uint32_t item, const std::vector<Bucket>& buckets) {
  if (user >= ds.num_users() || user >= graph.num_users) {
    throw Error(ErrorCode::UnknownUser, "user " + std::to_string(user));
  }
  if (item >= ds.num_items() || item >= graph.num_items) {
    throw Error(ErrorCode::UnknownItem, "item " + std::to_string(item));
  }
  if (buckets.empty()) throw Error(ErrorCode::ConfigInvalid, "explain needs at least one bucket");
  ExplanationEvidence ev;
  ev.user = user;
  ev.item = item;
  ev.present_day = ds.last_train_day();
  std::vector<double> sums(buckets.size(), 0.0);
  for (const auto& b : buckets) ev.buckets.push_back({b.label, 0, 0.0});
  for (const auto& z : graph.neighbors[user].neighbors) {
    for (std::uint32_t i : ds.by_user(z.user)) {
      const auto& e = ds.event(i);
      if (!e.is_train() || e.item != item) continue;
      const int age = ev.present_day - e.day;
      std::size_t b = 0;
      while (b + 1 < buckets.size() && buckets[b].max_age_days && age > *buckets[b].max_age_days) ++b;
      ++ev.buckets[b].count;
      sums[b] += e.rating;
      ++ev.neighbor_ratings;
    }
  }
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (ev.buckets[b].count > 0) ev.buckets[b].mean_rating = sums[b] / static_cast<double>(ev.buckets[b].count);
  }
  ev.stationary_weight = graph.stationary_weight(user, item);
  for (const auto& edge : graph.temporal_edges(user, item)) ev.temporal_weights.emplace_back(edge.epoch, edge.weight);
  std::reverse(ev.temporal_weights.begin(), ev.temporal_weights.end());
  return ev;
}

std::string render_explanations(std::span<const ExplanationEvidence> evidence, std::span<const double> scores) {
  if (evidence.empty()) return {};
  std::vector<std::vector<std::string>> rows;
  auto add_row = [&](std::string label, auto&& cell) {
    std::vector<std::string> row{std::move(label)};
    for (std::size_t c = 0; c < evidence.size(); ++c) row.push_back(cell(c));
    rows.push_back(std::move(row));
  };
  add_row("", [&](std::size_t c) { return "item " + std::to_string(evidence[c].item); });
  if (!scores.empty()) {
    add_row("predicted", [&](std::size_t c) { return c < scores.size() ? fixed(scores[c], 3) : std::string(); });
  }
  for (std::size_t b = 0; b < evidence.front().buckets.size(); ++b) {
    add_row(evidence.front().buckets[b].label, [&](std::size_t c) {
      const auto& bucket = evidence[c].buckets[b];
      if (bucket.count == 0) return std::string("0 ratings");
      return std::to_string(bucket.count) + (bucket.count == 1 ? " rating" : " ratings") + ", avg " +
             fixed(bucket.mean_rating, 2);
    });
  }
  add_row("stationary weight", [&](std::size_t c) { return fixed(evidence[c].stationary_weight, 3); });
  add_row("latest epoch weight", [&](std::size_t c) {
    const auto& tw = evidence[c].temporal_weights;
    if (tw.empty()) return std::string("-");
    return "t=" + std::to_string(tw.front().first) + ": " + fixed(tw.front().second, 3);
  });

  std::vector<std::size_t> width(evidence.size() + 1, 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size() + 2);
  }
  std::ostringstream out;
  out << "user " << evidence.front().user << " (present = day " << evidence.front().present_day << ")\n";
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) line += pad(row[c], width[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

EvalReport evaluate(const model::StateTrace& trace, const model::ModelParams& params, const RatingDataset& ds,
                    const graph::ExplainabilityGraph& graph, const EvalConfig& config) {
  if (config.n < 1) throw Error(ErrorCode::ConfigInvalid, "eval n must be >= 1");
  if (!(config.theta_exp >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "eval theta_exp must be >= 0");
  EvalReport report;
  report.config = config;
  report.p = graph.p;
  report.test_ratings = ds.count(data::Split::Test);
  report.rmse = test_rmse(trace, params, ds);

  std::vector<std::uint32_t> users;
  for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
    bool train = false, test = false;
    for (std::uint32_t i : ds.by_user(u)) (ds.event(i).is_train() ? train : test) = true;
    if (train && test) users.push_back(u);
  }
  std::vector<RankedList> lists(users.size());
  std::vector<ItemSet> relevant(users.size());
  const auto n = static_cast<std::int64_t>(users.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto i = static_cast<std::size_t>(s);
    lists[i] = rank(trace, params, ds, users[i], config.n);
    relevant[i] = relevant_items(ds, users[i], config.relevance_threshold);
  }
  report.mrr = mrr(lists, relevant);
  report.map = map_at_n(lists, relevant);
  report.mr = mean_recall_at_n(lists, relevant);
  report.mep = mep(lists, graph, config.theta_exp);
  report.mer = mer(lists, graph, config.theta_exp);

  for (std::size_t i = 0; i < users.size(); ++i) {
    const RankedList& list = lists[i];
    UserRow row;
    row.user = list.user;
    row.epoch = list.epoch;
    row.reciprocal_rank = reciprocal_rank(list, relevant[i]);
    row.average_precision = average_precision(list, relevant[i]);
    row.recall = recall(list, relevant[i]);
    row.num_relevant = relevant[i].size();
    row.num_explainable = count_explainable(graph, list.user, config.theta_exp);
    const std::size_t hits = explainable_in(list, graph, config.theta_exp);
    if (!list.items.empty()) row.explainable_precision = static_cast<double>(hits) / static_cast<double>(list.items.size());
    if (row.num_explainable > 0) row.explainable_recall = static_cast<double>(hits) / static_cast<double>(row.num_explainable);
    for (const auto& s : list.items) row.top_items.push_back(s.item);
    report.users.push_back(std::move(row));
  }
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& row : r.users) {
    users.push_back({{"user", row.user},
                     {"epoch", row.epoch},
                     {"reciprocal_rank", opt(row.reciprocal_rank)},
                     {"average_precision", opt(row.average_precision)},
                     {"recall", opt(row.recall)},
                     {"explainable_precision", opt(row.explainable_precision)},
                     {"explainable_recall", opt(row.explainable_recall)},
                     {"num_relevant", row.num_relevant},
                     {"num_explainable", row.num_explainable},
                     {"top_items", row.top_items}});
  }
  return {{"schema", "tempex-eval-report"},
          {"version", 1},
          {"metrics",
           {{"rmse", r.rmse}, {"mrr", r.mrr}, {"map", r.map}, {"mr", r.mr}, {"mep", r.mep}, {"mer", r.mer}}},
          {"config",
           {{"p", r.p},
            {"n", r.config.n},
            {"theta_exp", r.config.theta_exp},
            {"relevance_threshold", r.config.relevance_threshold}}},
          {"counts", {{"test_ratings", r.test_ratings}, {"users", r.users.size()}}},
          {"users", std::move(users)}};
}

std::string to_csv(const EvalReport& r) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "user,epoch,reciprocal_rank,average_precision,recall,explainable_precision,explainable_recall,"
         "num_relevant,num_explainable\n";
  for (const auto& row : r.users) {
    out << row.user << ',' << row.epoch << ',' << cell(row.reciprocal_rank) << ',' << cell(row.average_precision)
        << ',' << cell(row.recall) << ',' << cell(row.explainable_precision) << ',' << cell(row.explainable_recall)
        << ',' << row.num_relevant << ',' << row.num_explainable << '\n';
  }
  return out.str();
}

std::vector<std::string> validate_report_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  auto need = [&](const nlohmann::json& obj, const char* key, auto pred, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(std::string("missing ") + key);
      return false;
    }
    if (!pred(obj.at(key))) {
      problems.push_back(std::string(key) + " must be " + what);
      return false;
    }
    return true;
  };
  const auto is_number = [](const nlohmann::json& v) { return v.is_number(); };
  const auto is_unit = [](const nlohmann::json& v) {
    return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0;
  };
  const auto is_unit_or_null = [&](const nlohmann::json& v) { return v.is_null() || is_unit(v); };
  const auto is_count = [](const nlohmann::json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); };

  if (!j.is_object()) return {"report must be a JSON object"};
  if (need(j, "schema", [](const nlohmann::json& v) { return v.is_string(); }, "a string") &&
      j.at("schema") != "tempex-eval-report") {
    problems.push_back("schema must be tempex-eval-report");
  }
  need(j, "version", [](const nlohmann::json& v) { return v == 1; }, "1");
  if (need(j, "metrics", [](const nlohmann::json& v) { return v.is_object(); }, "an object")) {
    const auto& m = j.at("metrics");
    need(m, "rmse", [&](const nlohmann::json& v) { return is_number(v) && v.get<double>() >= 0.0; }, "a number >= 0");
    for (const char* key : {"mrr", "map", "mr", "mep", "mer"}) need(m, key, is_unit, "a number in [0,1]");
  }
  if (need(j, "config", [](const nlohmann::json& v) { return v.is_object(); }, "an object")) {
    const auto& c = j.at("config");
    need(c, "p", is_count, "a non-negative integer");
    need(c, "n", is_count, "a non-negative integer");
    need(c, "theta_exp", is_number, "a number");
    need(c, "relevance_threshold", is_number, "a number");
  }
  if (need(j, "counts", [](const nlohmann::json& v) { return v.is_object(); }, "an object")) {
    need(j.at("counts"), "test_ratings", is_count, "a non-negative integer");
    need(j.at("counts"), "users", is_count, "a non-negative integer");
  }
  if (need(j, "users", [](const nlohmann::json& v) { return v.is_array(); }, "an array")) {
    for (const auto& row : j.at("users")) {
      need(row, "user", is_count, "a non-negative integer");
      need(row, "epoch", is_count, "a non-negative integer");
      for (const char* key : {"reciprocal_rank", "average_precision", "recall", "explainable_precision", "explainable_recall"}) {
        need(row, key, is_unit_or_null, "null or a number in [0,1]");
      }
      need(row, "num_relevant", is_count, "a non-negative integer");
      need(row, "num_explainable", is_count, "a non-negative integer");
      need(row, "top_items", [](const nlohmann::json& v) { return v.is_array(); }, "an array");
      if (problems.size() > 20) break;
    }
  }
  return problems;
}

}  // namespace tempex::eval
