/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "grad_helpers.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "tempex/eval.hpp"
#include "tempex/train.hpp"

using namespace tempex;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kGraphTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kRmseGain = 0.20;
constexpr int kFuzzDatasets = 1000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

char* fmt(const char* f, double a, double b = 0, double c = 0) {
  static char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome graph_oracle() {
  std::mt19937_64 rng(101);
  std::size_t compared = 0, mismatches = 0;
  double worst_sim = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const auto ds = oracle::random_dataset(rng, 20, 15, 4);
    const std::size_t p = 1 + static_cast<std::size_t>(inst) % 6;
    const auto g = graph::build_graph(ds, graph::GraphConfig{p, false, std::nullopt});
    const auto o = oracle::graph(ds, p);
    const int ref = g.reference_epoch;
    if (ref != o.ref) ++mismatches;
    for (std::uint32_t i = 0; i < ds.num_users(); ++i) {
      for (std::uint32_t k = 0; k < ds.num_users(); ++k) {
        if (i == k) continue;
        const double s = graph::similarity(ds, i, k, ref);
        worst_sim = std::max(worst_sim, std::fabs(s - o.sim[i][k]));
        mismatches += oracle::close(s, o.sim[i][k], kGraphTol) ? 0 : 1;
        ++compared;
      }
      const auto& q = g.neighbors[i].neighbors;
      if (q.size() != o.neighbors[i].size()) ++mismatches;
      for (std::size_t n = 0; n < std::min(q.size(), o.neighbors[i].size()); ++n) {
        mismatches += q[n].user == o.neighbors[i][n] ? 0 : 1;
        ++compared;
      }
      const std::size_t I = ds.num_items(), T = static_cast<std::size_t>(ds.num_epochs());
      for (std::uint32_t m = 0; m < I; ++m) {
        for (std::size_t t = 0; t < T; ++t) {
          // Temporal weights are ratios of integers: compared bitwise.
          mismatches += g.temporal_weight(i, m, static_cast<int>(t)) == o.temporal[(i * I + m) * T + t] ? 0 : 1;
          ++compared;
        }
        mismatches += oracle::close(g.stationary_weight(i, m), o.stationary[i * I + m], kGraphTol) ? 0 : 1;
        ++compared;
      }
    }
  }
  std::ostringstream d;
  d << compared << " values over 10 instances, " << mismatches << " mismatches, max |similarity diff| " << worst_sim;
  return {mismatches == 0, d.str()};
}

Outcome weight_bounds() {
  std::mt19937_64 rng(202);
  std::size_t checked = 0, violations = 0;
  for (int n = 0; n < kFuzzDatasets; ++n) {
    const auto ds = oracle::random_dataset(rng, 12, 10, 4);
    if (ds.count(data::Split::Train) == 0) continue;
    std::uniform_int_distribution<std::size_t> pick(1, ds.num_users() + 1);
    const graph::GraphConfig cfg{pick(rng), (n % 2) == 1, std::nullopt};
    const auto g = graph::build_graph(ds, cfg);
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
      for (const auto& e : g.temporal[u]) violations += (e.weight > 0.0 && e.weight <= 1.0) ? 0 : 1;
      for (const auto& e : g.stationary[u]) violations += (e.weight > 0.0 && e.weight <= 1.0) ? 0 : 1;
      const auto& q = g.neighbors[u].neighbors;
      for (std::uint32_t m = 0; m < ds.num_items(); ++m) {
        bool any = false;
        for (int t = 0; t < ds.num_epochs(); ++t) {
          bool evidence = false;
          for (const auto& z : q) evidence |= ds.train_rating(z.user, m, t).has_value();
          any |= evidence;
          const double w = g.temporal_weight(u, m, t);
          violations += (w >= 0.0 && w <= 1.0 && ((w == 0.0) == !evidence)) ? 0 : 1;
          ++checked;
        }
        const double s = g.stationary_weight(u, m);
        violations += (s >= 0.0 && s <= 1.0 && ((s == 0.0) == !any)) ? 0 : 1;
        ++checked;
      }
    }
  }
  std::ostringstream d;
  d << kFuzzDatasets << " datasets, " << checked << " weights, " << violations << " violations";
  return {violations == 0, d.str()};
}

Outcome gradient_check() {
  double worst = 0.0;
  std::string worst_block;
  std::size_t checks = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    data::SynthConfig sc;
    sc.num_users = 5;
    sc.num_items = 4;
    sc.num_epochs = 3;
    sc.density = 0.6;
    sc.seed = seed;
    const auto ds = data::split(data::synth(sc), 0.3, seed);
    const auto g = graph::build_graph(ds, graph::GraphConfig{2, false, std::nullopt});
    model::ModelConfig mc;
    mc.hidden = 4;
    mc.input_dim = 4;
    mc.k = 4;
    mc.k_s = 4;
    const auto params = model::ModelParams::init(model::make_dims(ds, mc), seed, 0.5);
    for (objective::Mode mode : {objective::Mode::Dry, objective::Mode::Fluid}) {
      objective::ObjectiveConfig cfg;
      cfg.mode = mode;
      const auto terms = objective::build_terms(ds, g, cfg);
      if (terms.num_pairs() == 0) return {false, "instance has no temporal pairs"};
      for (const auto& e : testing::block_gradient_errors(params, ds, terms, cfg)) {
        ++checks;
        if (e.error > worst) {
          worst = e.error;
          worst_block = std::string(mode == objective::Mode::Dry ? "dry " : "fluid ") + e.name;
        }
      }
    }
  }
  std::ostringstream d;
  d << checks << " block checks (3 seeds x dry/fluid x 14 blocks), max rel err " << worst << " (" << worst_block
    << "), tol " << kGradTol;
  return {checks == 84 && worst <= kGradTol, d.str()};
}

Outcome ablation_identity() {
  bool ok = true;
  std::ostringstream d;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto ds = data::split(data::synth(data::SynthConfig{.seed = seed}), 0.2, seed);
    const auto g = graph::build_graph(ds, graph::GraphConfig{10, false, std::nullopt});
    const auto params = model::ModelParams::init(model::make_dims(ds, model::ModelConfig{}), seed, 0.1);
    const auto trace = model::forward(params, ds);
    // Squared error per user in event order, users summed in id order.
    double sse = 0.0;
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
      double su = 0.0;
      for (std::uint32_t i : ds.by_user(u)) {
        const auto& e = ds.event(i);
        if (!e.is_train()) continue;
        const double r = e.rating - model::predict(trace, params, e.user, e.item, e.epoch);
        su += r * r;
      }
      sse += su;
    }
    // Under the fluid weighting alpha = 0 gives weight 1, so the zero-weight
    // identity is a property of the constant (dry) weighting.
    objective::ObjectiveConfig cfg;
    cfg.mode = objective::Mode::Dry;
    cfg.alpha = cfg.beta = cfg.lambda_reg = 0.0;
    const double l = objective::loss(trace, params, ds, g, cfg);
    if (l != sse) {
      ok = false;
      d << "seed " << seed << ": loss " << l << " != sse " << sse << "; ";
    }
    objective::ObjectiveConfig fluid;
    fluid.alpha = 0.0;
    for (int t = 0; t < ds.num_epochs(); ++t) ok &= objective::temporal_factor(fluid, t, g.reference_epoch) == 1.0;
    const auto terms = objective::build_terms(ds, g, fluid);
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
      for (const auto& p : terms.user_pairs.at(u)) ok &= p.weight == g.temporal_weight(u, p.other, p.epoch);
    }
  }
  d << "zero-weight loss bit-identical to summed squared error; fluid alpha=0 weight exactly 1 at every epoch";
  return {ok, d.str()};
}

struct Run {
  data::RatingDataset ds;
  double global_mean_rmse = 0.0;
};

Run seeded(std::uint64_t seed) {
  data::SynthConfig sc;
  sc.seed = seed;
  Run r{data::split(data::synth(sc), 0.2, seed), 0.0};
  const double mean = r.ds.train_mean();
  double se = 0.0;
  std::size_t n = 0;
  for (const auto& e : r.ds.events()) {
    if (e.is_train()) continue;
    se += (mean - e.rating) * (mean - e.rating);
    ++n;
  }
  r.global_mean_rmse = std::sqrt(se / static_cast<double>(n));
  return r;
}

eval::EvalReport fit_and_evaluate(const data::RatingDataset& ds, std::size_t p, train::TrainConfig cfg,
                                  std::uint64_t seed) {
  cfg.seed = seed;
  const auto g = graph::build_graph(ds, graph::GraphConfig{p, false, std::nullopt});
  const auto fitted = train::fit(ds, g, cfg);
  const auto trace = model::forward(fitted.params, ds);
  return eval::evaluate(trace, fitted.params, ds, g, eval::EvalConfig{10, 0.01, 4});
}

Outcome training_efficacy() {
  const Run r = seeded(1);
  const train::TrainConfig cfg;
  const auto report = fit_and_evaluate(r.ds, 10, cfg, 1);
  const double bound = (1.0 - kRmseGain) * r.global_mean_rmse;
  return {report.rmse <= bound, fmt("test RMSE %.4f vs global mean %.4f (bound %.4f)", report.rmse,
                                    r.global_mean_rmse, bound)};
}

Outcome explainability_benefit() {
  std::vector<Run> runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) runs.push_back(seeded(seed));
  train::TrainConfig fluid;
  train::TrainConfig ablation;
  ablation.objective.mode = objective::Mode::Dry;
  ablation.objective.alpha = 0.0;
  ablation.objective.beta = 0.0;
  bool ok = true;
  std::ostringstream d;
  for (std::size_t p : {5, 10, 20}) {
    int wins = 0;
    double gap_p = 0.0, gap_r = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto f = fit_and_evaluate(runs[seed - 1].ds, p, fluid, seed);
      const auto a = fit_and_evaluate(runs[seed - 1].ds, p, ablation, seed);
      wins += (f.mep >= a.mep && f.mer >= a.mer) ? 1 : 0;
      gap_p += f.mep - a.mep;
      gap_r += f.mer - a.mer;
    }
    ok &= wins >= 3;
    d << "p=" << p << ": " << wins << "/5 seeds (mean MEP gap " << gap_p / 5 << ", MER gap " << gap_r / 5 << "); ";
  }
  return {ok, d.str()};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(707);
  int instances = 0, mismatches = 0;
  while (instances < 10) {
    const auto ds = oracle::random_dataset(rng, 10, 10, 3, 0.35);
    if (ds.count(data::Split::Test) == 0 || ds.count(data::Split::Train) == 0) continue;
    const auto g = graph::build_graph(ds, graph::GraphConfig{2, false, std::nullopt});
    model::ModelConfig mc;
    mc.hidden = 3;
    const auto params = model::ModelParams::init(model::make_dims(ds, mc), 7 + instances, 1.0);
    const auto trace = model::forward(params, ds);
    const eval::EvalConfig cfg{5, 0.01, 4};
    const auto r = eval::evaluate(trace, params, ds, g, cfg);
    const auto o = oracle::metrics(trace, params, ds, g, cfg.n, cfg.theta_exp, cfg.relevance_threshold);
    mismatches += (r.rmse != o.rmse) + (r.mrr != o.mrr) + (r.map != o.map) + (r.mr != o.mr) + (r.mep != o.mep) +
                  (r.mer != o.mer);
    ++instances;
  }
  return {mismatches == 0, fmt("10 instances x 6 metrics, %.0f inexact", mismatches)};
}

// ---------------------------------------------------------------------------

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tempex_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" TEMPEX_CLI_PATH "' " + args + " >> cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  TempDir a("a"), b("b");
  for (const auto* dir : {&a, &b}) {
    for (const char* cmd : {"synth", "build-graph", "train", "evaluate"}) {
      if (cli(dir->path, cmd) != 0) return {false, std::string(cmd) + " failed"};
    }
  }
  const bool ck = slurp(a.path / "tempex_checkpoint.txt") == slurp(b.path / "tempex_checkpoint.txt");
  const bool rp = slurp(a.path / "tempex_report.json") == slurp(b.path / "tempex_report.json");
  const bool dt = slurp(a.path / "tempex_data.csv") == slurp(b.path / "tempex_data.csv");
  std::ostringstream d;
  d << "checkpoint " << (ck ? "identical" : "differs") << ", report " << (rp ? "identical" : "differs")
    << ", dataset " << (dt ? "identical" : "differs") << " across two default runs";
  return {ck && rp && dt, d.str()};
}

Outcome freeze_contract() {
  const Run r = seeded(1);
  const auto g = graph::build_graph(r.ds, graph::GraphConfig{10, false, std::nullopt});
  const train::TrainConfig cfg;
  train::Trainer trainer(r.ds, g, cfg);
  auto params = trainer.initial_params();
  std::size_t phases = 0, violations = 0;
  for (std::size_t round = 0; round < cfg.epochs_outer; ++round) {
    for (model::Side side : {model::Side::User, model::Side::Item}) {
      const auto before = params;
      trainer.run_phase(params, side);
      const auto x = before.blocks();
      const auto y = params.blocks();
      for (std::size_t b = 0; b < x.size(); ++b) {
        if (x[b].side != side && !(*x[b].tensor == *y[b].tensor)) ++violations;
      }
      ++phases;
    }
  }
  std::ostringstream d;
  d << phases << " phases, " << violations << " frozen blocks changed";
  return {violations == 0, d.str()};
}

Outcome end_to_end() {
  TempDir dir("e2e");
  for (const char* cmd : {"synth", "build-graph", "train", "evaluate"}) {
    if (const int rc = cli(dir.path, cmd); rc != 0) return {false, std::string(cmd) + " exited " + std::to_string(rc)};
  }
  const auto report = nlohmann::json::parse(slurp(dir.path / "tempex_report.json"), nullptr, false);
  const auto problems = eval::validate_report_json(report);
  if (!problems.empty()) return {false, "report invalid: " + problems.front()};
  const fs::path log = dir.path / "cli.log";
  fs::remove(log);
  if (const int rc = cli(dir.path, "explain --user 3 --item 7"); rc != 0) {
    return {false, "explain exited " + std::to_string(rc)};
  }
  const std::string table = slurp(log);
  int buckets = 0;
  for (const auto& b : eval::default_buckets()) buckets += table.find(b.label) != std::string::npos ? 1 : 0;
  return {buckets == 3, fmt("all commands exit 0, report schema-valid, %.0f/3 bucket rows in explanation", buckets)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "graph oracle equivalence", 10, graph_oracle},
      {2, "weight bounds", 60, weight_bounds},
      {3, "gradient correctness", 60, gradient_check},
      {4, "ablation identity", 60, ablation_identity},
      {5, "training efficacy", 300, training_efficacy},
      {6, "explainability benefit", 900, explainability_benefit},
      {7, "metric oracle equivalence", 60, metric_oracle},
      {8, "determinism", 300, determinism},
      {9, "subspace freeze contract", 300, freeze_contract},
      {10, "end-to-end CLI", 300, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs <= c.limit_s;
    failed += pass ? 0 : 1;
    std::printf("%s [%d] %s: %s (%.1f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
