/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "tempex/error.hpp"

namespace tempex::config {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::ConfigInvalid, key + ": cannot parse '" + value + "' as " + expected);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, v, "an integer");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const long long x = parse_int(key, v);
  if (x < 0) bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(x);
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::optional<int> parse_auto_int(const std::string& key, const std::string& v) {
  if (v == "auto" || v.empty()) return std::nullopt;
  return static_cast<int>(parse_int(key, v));
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F&& one) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, v, "a comma separated list");
    out.push_back(one(key, item));
  }
  if (out.empty()) bad_value(key, v, "a non-empty list");
  return out;
}

struct Entry {
  KeyDoc doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> apply;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"seed", "1", "seed for synthetic data, the train/test split, initialisation and dropout"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_count(k, v));
       }},
      {{"data.epoch_length_days", "30", "days per epoch"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.grid.epoch_length_days = static_cast<int>(parse_int(k, v));
       }},
      {{"data.origin_day", "auto", "day that starts epoch 0; auto uses the dataset file or the earliest day"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.origin_day = parse_auto_int(k, v); }},
      {{"data.num_epochs", "auto", "number of epochs; auto covers every event"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.num_epochs = parse_auto_int(k, v); }},
      {{"data.test_fraction", "0.2", "per-user fraction of latest events held out when a dataset has no test tags"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.test_fraction = parse_real(k, v); }},
      {{"synth.num_users", "50", "synthetic users"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.num_users = parse_count(k, v); }},
      {{"synth.num_items", "40", "synthetic items"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.num_items = parse_count(k, v); }},
      {{"synth.num_epochs", "6", "synthetic epochs"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.synth.num_epochs = static_cast<int>(parse_int(k, v));
       }},
      {{"synth.density", "0.2", "probability that a (user, item, epoch) rating is observed"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.density = parse_real(k, v); }},
      {{"synth.noise_sd", "0.25", "rating noise standard deviation"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise_sd = parse_real(k, v); }},
      {{"synth.rank", "2", "rank of the planted factors"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rank = parse_count(k, v); }},
      {{"synth.drift", "0.05", "per-epoch random walk step of user factors"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.drift = parse_real(k, v); }},
      {{"graph.p", "50", "neighbourhood size"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.graph.p = parse_count(k, v); }},
      {{"graph.normalized", "false", "divide similarity by the discounted self norms"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.graph.normalized = parse_bool(k, v); }},
      {{"graph.reference_epoch", "auto", "epoch neighbourhoods are computed at; auto is the last train epoch"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.graph.reference_epoch = parse_auto_int(k, v);
       }},
      {{"model.hidden", "8", "LSTM hidden size"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.model.hidden = parse_count(k, v); }},
      {{"model.input_dim", "8", "width of the transformed LSTM input"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.model.input_dim = parse_count(k, v);
       }},
      {{"model.k", "8", "dynamic projection size"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.model.k = parse_count(k, v); }},
      {{"model.k_s", "8", "stationary embedding size"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.model.k_s = parse_count(k, v); }},
      {{"model.init_scale", "0.1", "parameters start uniform in [-s, s]"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.model.init_scale = parse_real(k, v);
       }},
      {{"model.center_inputs", "false", "subtract the train mean from ratings fed to the LSTMs"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.model.center_inputs = parse_bool(k, v);
       }},
      {{"objective.mode", "fluid", "fluid (exp(-alpha*age) weight) or dry (constant alpha)"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "fluid") {
           c.train.objective.mode = objective::Mode::Fluid;
         } else if (v == "dry") {
           c.train.objective.mode = objective::Mode::Dry;
         } else {
           bad_value(k, v, "fluid or dry");
         }
       }},
      {{"objective.alpha", "0.4", "temporal explainability weight or decay rate"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.objective.alpha = parse_real(k, v); }},
      {{"objective.beta", "0.6", "stationary explainability weight"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.objective.beta = parse_real(k, v); }},
      {{"objective.lambda", "0.0001", "L2 weight on every parameter block"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.objective.lambda_reg = parse_real(k, v);
       }},
      {{"objective.explain_pair_budget", "0", "temporal pairs sampled per step; 0 uses all"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.objective.explain_pair_budget = parse_count(k, v);
       }},
      {{"objective.beta_latents", "stationary", "stationary or dynamic vectors in the stationary term"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "stationary") {
           c.train.objective.beta_latents = objective::BetaLatents::Stationary;
         } else if (v == "dynamic") {
           c.train.objective.beta_latents = objective::BetaLatents::Dynamic;
         } else {
           bad_value(k, v, "stationary or dynamic");
         }
       }},
      {{"train.epochs_outer", "30", "rounds of one user phase and one item phase"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs_outer = parse_count(k, v); }},
      {{"train.phase_steps", "50", "ADAM steps per phase"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.phase_steps = parse_count(k, v); }},
      {{"train.learning_rate", "0.01", "ADAM step size"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = parse_real(k, v); }},
      {{"train.adam_beta1", "0.9", "ADAM first moment decay"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_beta1 = parse_real(k, v); }},
      {{"train.adam_beta2", "0.999", "ADAM second moment decay"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_beta2 = parse_real(k, v); }},
      {{"train.adam_eps", "1e-08", "ADAM denominator guard"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_eps = parse_real(k, v); }},
      {{"train.dropout", "0", "dropout rate on LSTM outputs during training"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.dropout_rate = parse_real(k, v); }},
      {{"eval.n", "10", "ranked list length"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.eval.n = parse_count(k, v); }},
      {{"eval.theta_exp", "0.01", "stationary weight above which an item is explainable"},
       [](RunConfig& c, const std::string& k, const std::string& v) { c.eval.theta_exp = parse_real(k, v); }},
      {{"eval.relevance_threshold", "4", "minimum test rating counted as relevant"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.eval.relevance_threshold = static_cast<int>(parse_int(k, v));
       }},
      {{"sweep.p_values", "5,10,20,50", "neighbourhood sizes visited by sweep-p"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sweep_p = parse_list<std::size_t>(k, v, parse_count);
       }},
      {{"grid.alpha", "0,0.2,0.4,0.6,0.8,1", "alpha values visited by grid-search"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.grid_alpha = parse_list<double>(k, v, parse_real);
       }},
      {{"grid.beta", "0,0.2,0.4,0.6,0.8,1", "beta values visited by grid-search"},
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.grid_beta = parse_list<double>(k, v, parse_real);
       }},
      {{"paths.input", "", "raw ratings file read by ingest"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.input = v; }},
      {{"paths.data", "tempex_data.csv", "dataset written by ingest/synth and read by later commands"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.data = v; }},
      {{"paths.graph", "tempex_graph.txt", "explainability graph"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.graph = v; }},
      {{"paths.checkpoint", "tempex_checkpoint.txt", "trained parameters"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.checkpoint = v; }},
      {{"paths.report", "tempex_report.json", "evaluation report"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.report = v; }},
      {{"paths.report_csv", "", "optional per-user CSV next to the report"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.report_csv = v; }},
      {{"paths.log", "", "optional JSON lines training log"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.log = v; }},
      {{"paths.sweep", "tempex_sweep.csv", "sweep-p output"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.sweep = v; }},
      {{"paths.grid", "tempex_grid.csv", "grid-search output"},
       [](RunConfig& c, const std::string&, const std::string& v) { c.paths.grid = v; }},
  };
  return table;
}

}  // namespace

const std::vector<KeyDoc>& keys() {
  static const std::vector<KeyDoc> docs = [] {
    std::vector<KeyDoc> out;
    for (const auto& e : entries()) out.push_back(e.doc);
    return out;
  }();
  return docs;
}

void set(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.doc.key == key) {
      e.apply(config, key, value);
      return;
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "expected key=value, got '" + assignment + "'");
  set(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void apply_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw Error(ErrorCode::ConfigInvalid, path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    apply_assignment(config, line);
  }
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
  if (c.grid.epoch_length_days && *c.grid.epoch_length_days <= 0) fail("data.epoch_length_days must be > 0");
  if (c.grid.origin_day && *c.grid.origin_day < 0) fail("data.origin_day must be >= 0");
  if (c.grid.num_epochs && *c.grid.num_epochs < 1) fail("data.num_epochs must be >= 1");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) fail("data.test_fraction must lie in (0,1)");
  if (c.synth.num_users < 1 || c.synth.num_items < 1 || c.synth.num_epochs < 1 || c.synth.rank < 1) {
    fail("synth counts must all be >= 1");
  }
  if (!(c.synth.density > 0.0 && c.synth.density <= 1.0)) fail("synth.density must lie in (0,1]");
  if (c.synth.noise_sd < 0.0 || c.synth.drift < 0.0) fail("synth.noise_sd and synth.drift must be >= 0");
  if (c.graph.p < 1) fail("graph.p must be >= 1");
  if (c.graph.reference_epoch && *c.graph.reference_epoch < 0) fail("graph.reference_epoch must be >= 0");
  train::validate(c.train);
  const auto& o = c.train.objective;
  if (o.alpha < 0.0 || o.beta < 0.0 || o.lambda_reg < 0.0) fail("objective alpha, beta and lambda must be >= 0");
  if (!(c.train.model.init_scale >= 0.0)) fail("model.init_scale must be >= 0");
  if (c.eval.n < 1) fail("eval.n must be >= 1");
  if (!(c.eval.theta_exp >= 0.0)) fail("eval.theta_exp must be >= 0");
  for (std::size_t p : c.sweep_p) {
    if (p < 1) fail("sweep.p_values must all be >= 1");
  }
  for (double v : c.grid_alpha) {
    if (v < 0.0 || v > 1.0) fail("grid.alpha values must lie in [0,1]");
  }
  for (double v : c.grid_beta) {
    if (v < 0.0 || v > 1.0) fail("grid.beta values must lie in [0,1]");
  }
}

std::string key_help() {
  std::string out = "Config keys (file lines `key = value`, or --set key=value):\n";
  for (const auto& k : keys()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-30s %-22s ", k.key.c_str(),
                  k.default_value.empty() ? "\"\"" : k.default_value.c_str());
    out += buf;
    out += k.description;
    out += '\n';
  }
  return out;
}

}  // namespace tempex::config
