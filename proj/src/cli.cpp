/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tempex/config.hpp"
#include "tempex/error.hpp"

namespace tempex::cli {

namespace {

namespace fs = std::filesystem;

using config::RunConfig;

struct Overrides {
  std::string config_file;
  std::vector<std::string> assignments;
  std::string input, data, graph, checkpoint, report;
  std::optional<std::uint32_t> user;
  std::optional<std::uint32_t> item;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorCode::ConfigInvalid, std::string("no path configured for ") + what);
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::MissingArtifact, std::string(what) + " not found: " + path);
}

void require_output(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorCode::ConfigInvalid, std::string("no path configured for ") + what);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.config_file.empty()) config::apply_file(cfg, o.config_file);
  for (const auto& a : o.assignments) config::apply_assignment(cfg, a);
  if (!o.input.empty()) cfg.paths.input = o.input;
  if (!o.data.empty()) cfg.paths.data = o.data;
  if (!o.graph.empty()) cfg.paths.graph = o.graph;
  if (!o.checkpoint.empty()) cfg.paths.checkpoint = o.checkpoint;
  if (!o.report.empty()) cfg.paths.report = o.report;
  cfg.synth.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  config::validate(cfg);
  return cfg;
}

data::RatingDataset load_data(const RunConfig& cfg) {
  require_file(cfg.paths.data, "dataset");
  return data::ingest(cfg.paths.data, cfg.grid);
}

graph::ExplainabilityGraph load_graph(const RunConfig& cfg, const data::RatingDataset& ds) {
  require_file(cfg.paths.graph, "graph");
  graph::ExplainabilityGraph g = graph::read_graph(cfg.paths.graph);
  if (g.num_users != ds.num_users() || g.num_items != ds.num_items() || g.num_epochs != ds.num_epochs()) {
    throw Error(ErrorCode::ShapeMismatch, "graph " + cfg.paths.graph + " was built for a different dataset");
  }
  return g;
}

model::ModelParams load_params(const RunConfig& cfg, const data::RatingDataset& ds) {
  require_file(cfg.paths.checkpoint, "checkpoint");
  model::ModelParams params = model::load_checkpoint(cfg.paths.checkpoint);
  model::validate(params, ds);
  return params;
}

data::RatingDataset with_test_split(data::RatingDataset ds, const RunConfig& cfg) {
  if (ds.count(data::Split::Test) > 0) return ds;
  return data::split(ds, cfg.test_fraction, cfg.seed);
}

void print_counts(std::ostream& out, const data::RatingDataset& ds, const std::string& path) {
  out << "wrote " << path << ": " << ds.size() << " events (" << ds.count(data::Split::Train) << " train, "
      << ds.count(data::Split::Test) << " test), " << ds.num_users() << " users, " << ds.num_items() << " items, "
      << ds.num_epochs() << " epochs\n";
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  require_file(cfg.paths.input, "input ratings");
  require_output(cfg.paths.data, "dataset");
  const data::RatingDataset ds = with_test_split(data::ingest(cfg.paths.input, cfg.grid), cfg);
  data::write(ds, cfg.paths.data);
  print_counts(out, ds, cfg.paths.data);
  return kExitOk;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.data, "dataset");
  const data::RatingDataset ds = data::split(data::synth(cfg.synth), cfg.test_fraction, cfg.seed);
  data::write(ds, cfg.paths.data);
  print_counts(out, ds, cfg.paths.data);
  return kExitOk;
}

int cmd_build_graph(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.graph, "graph");
  const data::RatingDataset ds = load_data(cfg);
  const graph::ExplainabilityGraph g = graph::build_graph(ds, cfg.graph);
  graph::write_graph(g, cfg.paths.graph);
  out << "wrote " << cfg.paths.graph << ": p=" << g.p << " reference_epoch=" << g.reference_epoch << ", "
      << g.temporal_count() << " temporal and " << g.stationary_count() << " stationary weights\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.checkpoint, "checkpoint");
  const data::RatingDataset ds = load_data(cfg);
  const graph::ExplainabilityGraph g = load_graph(cfg, ds);
  std::ofstream log;
  if (!cfg.paths.log.empty()) log = open_out(cfg.paths.log);
  const train::FitResult result = train::fit(ds, g, cfg.train, [&](const train::PhaseRecord& r) {
    if (log.is_open()) log << train::to_json_line(r) << '\n';
    if (r.phase == model::Side::Item) {
      out << "round " << r.round << " loss " << num(r.loss);
      if (r.rmse_val) out << " test_rmse " << num(*r.rmse_val);
      out << '\n';
    }
  });
  model::save_checkpoint(result.params, cfg.paths.checkpoint);
  out << "wrote " << cfg.paths.checkpoint << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.report, "report");
  const data::RatingDataset ds = load_data(cfg);
  const graph::ExplainabilityGraph g = load_graph(cfg, ds);
  const model::ModelParams params = load_params(cfg, ds);
  const model::StateTrace trace = model::forward(params, ds);
  const eval::EvalReport report = eval::evaluate(trace, params, ds, g, cfg.eval);
  {
    std::ofstream f = open_out(cfg.paths.report);
    f << eval::to_json(report).dump(2) << '\n';
  }
  if (!cfg.paths.report_csv.empty()) {
    std::ofstream f = open_out(cfg.paths.report_csv);
    f << eval::to_csv(report);
  }
  out << "rmse " << num(report.rmse) << '\n';
  out << "mrr " << num(report.mrr) << '\n';
  out << "map " << num(report.map) << '\n';
  out << "mr " << num(report.mr) << '\n';
  out << "mep " << num(report.mep) << '\n';
  out << "mer " << num(report.mer) << '\n';
  out << "wrote " << cfg.paths.report << '\n';
  return kExitOk;
}

int cmd_explain(const RunConfig& cfg, const Overrides& o, std::ostream& out) {
  if (!o.user) throw Error(ErrorCode::ConfigInvalid, "explain needs --user");
  const data::RatingDataset ds = load_data(cfg);
  const graph::ExplainabilityGraph g = load_graph(cfg, ds);
  const model::ModelParams params = load_params(cfg, ds);
  const std::uint32_t user = *o.user;
  if (user >= ds.num_users()) throw Error(ErrorCode::UnknownUser, "user " + std::to_string(user));
  const model::StateTrace trace = model::forward(params, ds);
  std::vector<eval::ExplanationEvidence> evidence;
  std::vector<double> scores;
  if (o.item) {
    if (*o.item >= ds.num_items()) throw Error(ErrorCode::UnknownItem, "item " + std::to_string(*o.item));
    const int epoch = eval::first_test_epoch(ds, user).value_or(ds.num_epochs() - 1);
    evidence.push_back(eval::explain(g, ds, user, *o.item));
    scores.push_back(model::predict(trace, params, user, *o.item, epoch));
  } else {
    const eval::RankedList list = eval::rank(trace, params, ds, user, 3);
    for (const auto& s : list.items) {
      evidence.push_back(eval::explain(g, ds, user, s.item));
      scores.push_back(s.score);
    }
  }
  out << eval::render_explanations(evidence, scores);
  return kExitOk;
}

int cmd_sweep_p(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.sweep, "sweep output");
  const data::RatingDataset ds = load_data(cfg);
  std::string csv = "p,mep,mer,map,mr,mrr,rmse\n";
  for (std::size_t p : cfg.sweep_p) {
    graph::GraphConfig gc = cfg.graph;
    gc.p = p;
    const graph::ExplainabilityGraph g = graph::build_graph(ds, gc);
    const train::FitResult fitted = train::fit(ds, g, cfg.train);
    const model::StateTrace trace = model::forward(fitted.params, ds);
    const eval::EvalReport r = eval::evaluate(trace, fitted.params, ds, g, cfg.eval);
    char row[256];
    std::snprintf(row, sizeof row, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p, r.mep, r.mer, r.map, r.mr, r.mrr,
                  r.rmse);
    csv += row;
    out << row;
  }
  std::ofstream f = open_out(cfg.paths.sweep);
  f << csv;
  out << "wrote " << cfg.paths.sweep << '\n';
  return kExitOk;
}

int cmd_grid_search(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg.paths.grid, "grid output");
  const data::RatingDataset ds = load_data(cfg);
  const graph::ExplainabilityGraph g = load_graph(cfg, ds);
  const train::GridResult result = train::grid_search(ds, g, cfg.train, cfg.grid_alpha, cfg.grid_beta);
  std::ofstream f = open_out(cfg.paths.grid);
  f << "alpha,beta,val_rmse,error\n";
  for (const auto& c : result.table) {
    char row[128];
    if (c.val_rmse) {
      std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g,", c.alpha, c.beta, *c.val_rmse);
    } else {
      std::snprintf(row, sizeof row, "%.17g,%.17g,,", c.alpha, c.beta);
    }
    std::string err = c.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    f << row << err << '\n';
  }
  out << "best alpha " << result.best_alpha << " beta " << result.best_beta << '\n';
  out << "wrote " << cfg.paths.grid << '\n';
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::MissingArtifact:
    case ErrorCode::UnknownUser:
    case ErrorCode::UnknownItem:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable recurrent recommender: data prep, training, evaluation and explanations."};
  app.require_subcommand(1);
  app.footer("\n" + config::key_help() +
             "\nExit codes: 0 success, 1 usage, config or missing input, 2 runtime or numeric failure.");
  Overrides o;
  app.add_option("-c,--config", o.config_file, "config file of `key = value` lines");
  app.add_option("-s,--set", o.assignments, "override one key, e.g. --set train.learning_rate=0.005")
      ->take_all();
  app.add_option("--input", o.input, "same as paths.input");
  app.add_option("--data", o.data, "same as paths.data");
  app.add_option("--graph", o.graph, "same as paths.graph");
  app.add_option("--checkpoint", o.checkpoint, "same as paths.checkpoint");
  app.add_option("--report", o.report, "same as paths.report");
  app.fallthrough();

  auto* ingest = app.add_subcommand("ingest", "read paths.input, tag a test split if missing, write paths.data");
  auto* synth = app.add_subcommand("synth", "generate a planted low-rank dataset into paths.data");
  auto* build = app.add_subcommand("build-graph", "compute neighbourhoods and explainability weights");
  auto* trn = app.add_subcommand("train", "fit the model by alternating user and item phases");
  auto* evl = app.add_subcommand("evaluate", "score the test split and write the JSON report");
  auto* expl = app.add_subcommand("explain", "show neighbour evidence for a user's items by recency bucket");
  expl->add_option("--user", o.user, "user id")->required();
  expl->add_option("--item", o.item, "item id; default explains the top 3 recommendations");
  auto* sweep = app.add_subcommand("sweep-p", "retrain and evaluate for each of sweep.p_values");
  auto* grid = app.add_subcommand("grid-search", "pick alpha and beta on each user's last train epoch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (app.got_subcommand(ingest)) return cmd_ingest(cfg, out);
    if (app.got_subcommand(synth)) return cmd_synth(cfg, out);
    if (app.got_subcommand(build)) return cmd_build_graph(cfg, out);
    if (app.got_subcommand(trn)) return cmd_train(cfg, out);
    if (app.got_subcommand(evl)) return cmd_evaluate(cfg, out);
    if (app.got_subcommand(expl)) return cmd_explain(cfg, o, out);
    if (app.got_subcommand(sweep)) return cmd_sweep_p(cfg, out);
    if (app.got_subcommand(grid)) return cmd_grid_search(cfg, out);
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace tempex::cli
