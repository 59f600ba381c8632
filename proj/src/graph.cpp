/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/graph.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tempex/error.hpp"

namespace tempex::graph {

using data::Event;
using data::RatingDataset;

namespace {

// Every similarity path evaluates its terms through this helper and adds them
// in the (epoch, item) order of the first user's events, which keeps all
// paths bitwise identical and similarity(i, k) == similarity(k, i).
inline double discounted_product(int r1, int r2, int age) {
  return static_cast<double>(r1 * r2) / static_cast<double>(1 + age);
}

inline double evidence_ratio(double sum, double max, std::size_t q) {
  return sum / (static_cast<double>(q) * max);
}

double self_similarity(const RatingDataset& ds, std::uint32_t u, int reference_epoch) {
  double s = 0.0;
  for (std::uint32_t idx : ds.by_user(u)) {
    const Event& e = ds.event(idx);
    if (!e.is_train() || e.epoch > reference_epoch) continue;
    s += discounted_product(e.rating, e.rating, reference_epoch - e.epoch);
  }
  return s;
}

double normalize(double raw, double norm_i, double norm_k) {
  const double denom = std::sqrt(norm_i * norm_k);
  return denom > 0.0 ? raw / denom : 0.0;
}

bool ranks_before(const Neighbor& a, const Neighbor& b) {
  return a.score != b.score ? a.score > b.score : a.user < b.user;
}

NeighborSet select_top(std::uint32_t user, int reference_epoch, std::size_t p, std::span<const double> scores) {
  NeighborSet set{user, reference_epoch, {}};
  std::vector<Neighbor> all;
  all.reserve(scores.size());
  for (std::uint32_t k = 0; k < scores.size(); ++k) {
    if (k != user) all.push_back({k, scores[k]});
  }
  const std::size_t keep = std::min(p, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), ranks_before);
  all.resize(keep);
  set.neighbors = std::move(all);
  return set;
}

void validate(const RatingDataset& ds, const GraphConfig& config) {
  if (config.p < 1) throw Error(ErrorCode::ConfigInvalid, "graph p must be >= 1");
  if (ds.count(data::Split::Train) == 0) throw Error(ErrorCode::EmptyDataset, "graph needs train events");
}

template <class T>
void check_user(const RatingDataset& ds, T user) {
  if (user >= ds.num_users()) throw Error(ErrorCode::UnknownUser, "user " + std::to_string(user));
}

ExplainabilityGraph empty_graph(const RatingDataset& ds, const GraphConfig& config, int reference_epoch) {
  ExplainabilityGraph g;
  g.p = config.p;
  g.reference_epoch = reference_epoch;
  g.normalized = config.normalized;
  g.num_users = ds.num_users();
  g.num_items = ds.num_items();
  g.num_epochs = ds.num_epochs();
  g.neighbors.resize(ds.num_users());
  g.temporal.resize(ds.num_users());
  g.stationary.resize(ds.num_users());
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

double ExplainabilityGraph::temporal_weight(std::uint32_t user, std::uint32_t item, int epoch) const {
  const auto& row = temporal.at(user);
  const auto it = std::lower_bound(row.begin(), row.end(), std::pair{item, epoch},
                                   [](const TemporalEdge& e, const auto& key) {
                                     return std::pair{e.item, e.epoch} < key;
                                   });
  return it != row.end() && it->item == item && it->epoch == epoch ? it->weight : 0.0;
}

double ExplainabilityGraph::stationary_weight(std::uint32_t user, std::uint32_t item) const {
  const auto& row = stationary.at(user);
  const auto it = std::lower_bound(row.begin(), row.end(), item,
                                   [](const StationaryEdge& e, std::uint32_t key) { return e.item < key; });
  return it != row.end() && it->item == item ? it->weight : 0.0;
}

std::span<const TemporalEdge> ExplainabilityGraph::temporal_edges(std::uint32_t user, std::uint32_t item) const {
  const auto& row = temporal.at(user);
  const auto lo = std::lower_bound(row.begin(), row.end(), item,
                                   [](const TemporalEdge& e, std::uint32_t key) { return e.item < key; });
  const auto hi = std::upper_bound(lo, row.end(), item,
                                   [](std::uint32_t key, const TemporalEdge& e) { return key < e.item; });
  return {lo, hi};
}

std::size_t ExplainabilityGraph::temporal_count() const noexcept {
  std::size_t n = 0;
  for (const auto& row : temporal) n += row.size();
  return n;
}

std::size_t ExplainabilityGraph::stationary_count() const noexcept {
  std::size_t n = 0;
  for (const auto& row : stationary) n += row.size();
  return n;
}

// ---------------------------------------------------------------------------

double similarity(const RatingDataset& ds, std::uint32_t i, std::uint32_t k, int reference_epoch,
                  bool normalized) {
  if (i == k) throw Error(ErrorCode::SameUser, "similarity of user " + std::to_string(i) + " with itself");
  check_user(ds, i);
  check_user(ds, k);
  double s = 0.0;
  for (std::uint32_t idx : ds.by_user(i)) {
    const Event& e = ds.event(idx);
    if (!e.is_train() || e.epoch > reference_epoch) continue;
    if (const auto rk = ds.train_rating(k, e.item, e.epoch)) {
      s += discounted_product(e.rating, *rk, reference_epoch - e.epoch);
    }
  }
  if (!normalized) return s;
  return normalize(s, self_similarity(ds, i, reference_epoch), self_similarity(ds, k, reference_epoch));
}

NeighborSet neighborhood(const RatingDataset& ds, std::uint32_t user, std::size_t p, int reference_epoch,
                         bool normalized) {
  check_user(ds, user);
  std::vector<double> scores(ds.num_users(), 0.0);
  for (std::uint32_t k = 0; k < ds.num_users(); ++k) {
    if (k != user) scores[k] = similarity(ds, user, k, reference_epoch, normalized);
  }
  return select_top(user, reference_epoch, p, scores);
}

double temporal_weight(const RatingDataset& ds, std::span<const NeighborSet> neighbors, std::uint32_t user,
                       std::uint32_t item, int epoch) {
  const NeighborSet& q = neighbors[user];
  double sum = 0.0, max = 0.0;
  for (const Neighbor& z : q.neighbors) {
    if (const auto r = ds.train_rating(z.user, item, epoch)) {
      sum += *r;
      max = std::max(max, static_cast<double>(*r));
    }
  }
  return max > 0.0 ? evidence_ratio(sum, max, q.neighbors.size()) : 0.0;
}

double stationary_weight(const RatingDataset& ds, std::span<const NeighborSet> neighbors, std::uint32_t user,
                         std::uint32_t item) {
  const NeighborSet& q = neighbors[user];
  double sum = 0.0, max = 0.0;
  for (const Neighbor& z : q.neighbors) {
    double zsum = 0.0;
    int zcount = 0;
    for (std::uint32_t idx : ds.by_user(z.user)) {
      const Event& e = ds.event(idx);
      if (e.is_train() && e.item == item) {
        zsum += e.rating;
        ++zcount;
      }
    }
    if (zcount == 0) continue;
    const double mean = zsum / zcount;
    sum += mean;
    max = std::max(max, mean);
  }
  return max > 0.0 ? evidence_ratio(sum, max, q.neighbors.size()) : 0.0;
}

int resolve_reference_epoch(const RatingDataset& ds, const GraphConfig& config) {
  const int last = ds.last_train_epoch();
  const int ref = config.reference_epoch.value_or(last);
  if (ref < last) {
    throw Error(ErrorCode::ConfigInvalid, "reference_epoch " + std::to_string(ref) +
                                              " precedes the last train epoch " + std::to_string(last));
  }
  return ref;
}

// ---------------------------------------------------------------------------

ExplainabilityGraph build_graph_reference(const RatingDataset& ds, const GraphConfig& config) {
  validate(ds, config);
  const int ref = resolve_reference_epoch(ds, config);
  ExplainabilityGraph g = empty_graph(ds, config, ref);
  for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
    g.neighbors[u] = neighborhood(ds, u, config.p, ref, config.normalized);
  }
  for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
    for (std::uint32_t m = 0; m < ds.num_items(); ++m) {
      for (int t = 0; t < ds.num_epochs(); ++t) {
        const double w = temporal_weight(ds, g.neighbors, u, m, t);
        if (w > 0.0) g.temporal[u].push_back({m, t, w});
      }
      const double w = stationary_weight(ds, g.neighbors, u, m);
      if (w > 0.0) g.stationary[u].push_back({m, w});
    }
  }
  return g;
}

ExplainabilityGraph build_graph(const RatingDataset& ds, const GraphConfig& config) {
  validate(ds, config);
  const int ref = resolve_reference_epoch(ds, config);
  ExplainabilityGraph g = empty_graph(ds, config, ref);
  const auto num_users = static_cast<std::int64_t>(ds.num_users());
  const std::size_t num_items = ds.num_items();
  const auto num_epochs = static_cast<std::size_t>(ds.num_epochs());

  std::vector<double> norms;
  if (config.normalized) {
    norms.resize(ds.num_users());
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) norms[u] = self_similarity(ds, u, ref);
  }

  // Pass 1: neighbourhoods. Each user's scores accumulate in the (epoch, item)
  // order of that user's events, matching similarity().
#pragma omp parallel
  {
    std::vector<double> scores(ds.num_users());
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t su = 0; su < num_users; ++su) {
      const auto u = static_cast<std::uint32_t>(su);
      std::fill(scores.begin(), scores.end(), 0.0);
      for (std::uint32_t idx : ds.by_user(u)) {
        const Event& e = ds.event(idx);
        if (!e.is_train() || e.epoch > ref) continue;
        const auto raters = ds.by_item(e.item);
        auto lo = std::lower_bound(raters.begin(), raters.end(), e.epoch,
                                   [&ds](std::uint32_t i, int t) { return ds.event(i).epoch < t; });
        for (; lo != raters.end() && ds.event(*lo).epoch == e.epoch; ++lo) {
          const Event& other = ds.event(*lo);
          if (other.user == u || !other.is_train()) continue;
          scores[other.user] += discounted_product(e.rating, other.rating, ref - e.epoch);
        }
      }
      if (config.normalized) {
        for (std::uint32_t k = 0; k < scores.size(); ++k) scores[k] = normalize(scores[k], norms[u], norms[k]);
      }
      g.neighbors[u] = select_top(u, ref, config.p, scores);
    }
  }

  // Pass 2: edge weights from each user's neighbourhood, in neighbour order.
#pragma omp parallel
  {
    std::vector<double> t_sum(num_items * num_epochs, 0.0), t_max(num_items * num_epochs, 0.0);
    std::vector<double> s_sum(num_items, 0.0), s_max(num_items, 0.0);
    std::vector<double> z_sum(num_items, 0.0);
    std::vector<int> z_count(num_items, 0);
    std::vector<std::size_t> t_touched, s_touched, z_touched;
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t su = 0; su < num_users; ++su) {
      const auto u = static_cast<std::uint32_t>(su);
      const auto& q = g.neighbors[u].neighbors;
      for (const Neighbor& z : q) {
        for (std::uint32_t idx : ds.by_user(z.user)) {
          const Event& e = ds.event(idx);
          if (!e.is_train()) continue;
          const std::size_t key = e.item * num_epochs + static_cast<std::size_t>(e.epoch);
          if (t_max[key] == 0.0) t_touched.push_back(key);
          t_sum[key] += e.rating;
          t_max[key] = std::max(t_max[key], static_cast<double>(e.rating));
          if (z_count[e.item] == 0) z_touched.push_back(e.item);
          z_sum[e.item] += e.rating;
          ++z_count[e.item];
        }
        for (std::size_t m : z_touched) {
          const double mean = z_sum[m] / z_count[m];
          if (s_max[m] == 0.0) s_touched.push_back(m);
          s_sum[m] += mean;
          s_max[m] = std::max(s_max[m], mean);
          z_sum[m] = 0.0;
          z_count[m] = 0;
        }
        z_touched.clear();
      }

      std::sort(t_touched.begin(), t_touched.end());
      auto& trow = g.temporal[u];
      trow.reserve(t_touched.size());
      for (std::size_t key : t_touched) {
        trow.push_back({static_cast<std::uint32_t>(key / num_epochs), static_cast<std::int32_t>(key % num_epochs),
                        evidence_ratio(t_sum[key], t_max[key], q.size())});
        t_sum[key] = 0.0;
        t_max[key] = 0.0;
      }
      t_touched.clear();

      std::sort(s_touched.begin(), s_touched.end());
      auto& srow = g.stationary[u];
      srow.reserve(s_touched.size());
      for (std::size_t m : s_touched) {
        srow.push_back({static_cast<std::uint32_t>(m), evidence_ratio(s_sum[m], s_max[m], q.size())});
        s_sum[m] = 0.0;
        s_max[m] = 0.0;
      }
      s_touched.clear();
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  return out;
}

[[noreturn]] void bad_graph(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedLine, "graph line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

void write_graph(const ExplainabilityGraph& g, std::ostream& out) {
  out << "# tempex-graph v1 p=" << g.p << " reference_epoch=" << g.reference_epoch
      << " normalized=" << (g.normalized ? 1 : 0) << " num_users=" << g.num_users << " num_items=" << g.num_items
      << " num_epochs=" << g.num_epochs << "\n";
  out << "# section neighbors\nu,neighbor,score\n";
  for (const auto& set : g.neighbors) {
    for (const auto& n : set.neighbors) out << set.user << ',' << n.user << ',' << fmt_real(n.score) << '\n';
  }
  out << "# section temporal\nu,m,t,weight\n";
  for (std::size_t u = 0; u < g.temporal.size(); ++u) {
    for (const auto& e : g.temporal[u]) out << u << ',' << e.item << ',' << e.epoch << ',' << fmt_real(e.weight) << '\n';
  }
  out << "# section stationary\nu,m,weight\n";
  for (std::size_t u = 0; u < g.stationary.size(); ++u) {
    for (const auto& e : g.stationary[u]) out << u << ',' << e.item << ',' << fmt_real(e.weight) << '\n';
  }
}

void write_graph(const ExplainabilityGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_graph(g, out);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

ExplainabilityGraph read_graph(std::istream& in) {
  ExplainabilityGraph g;
  std::string line, section;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# tempex-graph", 0) == 0) {
      std::istringstream ss(line);
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const long long v = std::stoll(tok.substr(eq + 1));
        if (key == "p") g.p = static_cast<std::size_t>(v);
        else if (key == "reference_epoch") g.reference_epoch = static_cast<int>(v);
        else if (key == "normalized") g.normalized = v != 0;
        else if (key == "num_users") g.num_users = static_cast<std::size_t>(v);
        else if (key == "num_items") g.num_items = static_cast<std::size_t>(v);
        else if (key == "num_epochs") g.num_epochs = static_cast<int>(v);
      }
      g.neighbors.resize(g.num_users);
      for (std::uint32_t u = 0; u < g.num_users; ++u) g.neighbors[u] = {u, g.reference_epoch, {}};
      g.temporal.assign(g.num_users, {});
      g.stationary.assign(g.num_users, {});
      have_header = true;
      continue;
    }
    if (line.rfind("# section ", 0) == 0) {
      section = line.substr(10);
      continue;
    }
    if (line[0] == '#' || line[0] == 'u') continue;  // comments and column headers
    if (!have_header) bad_graph(line_no, "missing tempex-graph header");
    const auto f = csv_fields(line);
    try {
      if (section == "neighbors" && f.size() == 3) {
        const auto u = std::stoul(f[0]);
        if (u >= g.num_users) bad_graph(line_no, "user out of range");
        g.neighbors[u].neighbors.push_back({static_cast<std::uint32_t>(std::stoul(f[1])), std::stod(f[2])});
      } else if (section == "temporal" && f.size() == 4) {
        const auto u = std::stoul(f[0]);
        if (u >= g.num_users) bad_graph(line_no, "user out of range");
        g.temporal[u].push_back({static_cast<std::uint32_t>(std::stoul(f[1])), std::stoi(f[2]), std::stod(f[3])});
      } else if (section == "stationary" && f.size() == 3) {
        const auto u = std::stoul(f[0]);
        if (u >= g.num_users) bad_graph(line_no, "user out of range");
        g.stationary[u].push_back({static_cast<std::uint32_t>(std::stoul(f[1])), std::stod(f[2])});
      } else {
        bad_graph(line_no, "unexpected row in section '" + section + "'");
      }
    } catch (const std::logic_error&) {
      bad_graph(line_no, "unparsable number");
    }
  }
  if (!have_header) throw Error(ErrorCode::MalformedLine, "graph file has no tempex-graph header");
  return g;
}

ExplainabilityGraph read_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open graph " + path);
  return read_graph(in);
}

}  // namespace tempex::graph
