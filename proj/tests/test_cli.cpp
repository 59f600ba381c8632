/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "tempex/cli.hpp"
#include "tempex/config.hpp"
#include "tempex/error.hpp"

using namespace tempex;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tempex_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "tempex");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> small_run(const TempDir& d) {
  return {"--data",          d / "data.csv",        "--graph", d / "graph.txt", "--checkpoint", d / "ckpt.txt",
          "--report",        d / "report.json",     "--set",   "synth.num_users=12",
          "synth.num_items=9", "synth.num_epochs=4", "synth.density=0.4", "graph.p=4", "train.epochs_outer=2",
          "train.phase_steps=5"};
}

std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<std::string> more) {
  base.insert(base.end(), more);
  return base;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("keys set the embedded module configs") {
    config::RunConfig c;
    config::set(c, "train.learning_rate", "0.005");
    config::set(c, "objective.mode", "dry");
    config::set(c, "graph.normalized", "true");
    config::set(c, "data.origin_day", "12");
    config::set(c, "sweep.p_values", "3, 7");
    CHECK(c.train.learning_rate == 0.005);
    CHECK(c.train.objective.mode == objective::Mode::Dry);
    CHECK(c.graph.normalized);
    CHECK(c.grid.origin_day == 12);
    CHECK(c.sweep_p == std::vector<std::size_t>{3, 7});
    config::set(c, "data.origin_day", "auto");
    CHECK_FALSE(c.grid.origin_day.has_value());
  }

  TEST_CASE("defaults") {
    const config::RunConfig c;
    CHECK(c.train.objective.alpha == 0.4);
    CHECK(c.train.objective.beta == 0.6);
    CHECK(c.train.objective.mode == objective::Mode::Fluid);
    CHECK(c.graph.p == 50);
    CHECK(c.eval.n == 10);
    CHECK(c.eval.theta_exp == 0.01);
    CHECK(c.train.phase_steps == 50);
    CHECK(c.grid_alpha == std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  }

  TEST_CASE("bad keys and values") {
    config::RunConfig c;
    CHECK_THROWS_AS(config::set(c, "train.learnig_rate", "0.1"), Error);
    CHECK_THROWS_AS(config::set(c, "train.learning_rate", "fast"), Error);
    CHECK_THROWS_AS(config::set(c, "graph.p", "-3"), Error);
    CHECK_THROWS_AS(config::set(c, "graph.normalized", "maybe"), Error);
    CHECK_THROWS_AS(config::apply_assignment(c, "graph.p"), Error);
    c.train.dropout_rate = 1.0;
    CHECK_THROWS_AS(config::validate(c), Error);
  }

  TEST_CASE("config file with comments") {
    TempDir d("cfg");
    std::ofstream(d / "run.cfg") << "# run settings\n\ngraph.p = 7   # small\nobjective.alpha=0.25\n";
    config::RunConfig c;
    config::apply_file(c, d / "run.cfg");
    CHECK(c.graph.p == 7);
    CHECK(c.train.objective.alpha == 0.25);
    std::ofstream(d / "bad.cfg") << "graph.p 7\n";
    CHECK_THROWS_AS(config::apply_file(c, d / "bad.cfg"), Error);
  }

  TEST_CASE("help documents every key") {
    const Result r = run({"--help"});
    CHECK(r.code == 0);
    for (const auto& k : config::keys()) CHECK(r.out.find(k.key) != std::string::npos);
    for (const char* cmd : {"ingest", "synth", "build-graph", "train", "evaluate", "explain", "sweep-p", "grid-search"}) {
      CHECK(r.out.find(cmd) != std::string::npos);
    }
  }
}

TEST_SUITE("cli") {
  TEST_CASE("usage and config errors exit 1 without writing") {
    TempDir d("usage");
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    const Result bad = run({"--data", d / "data.csv", "--set", "synth.density=2", "synth"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("ConfigInvalid") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "data.csv"));
    CHECK(run({"--config", d / "missing.cfg", "synth"}).code == 1);
  }

  TEST_CASE("missing artifacts exit 1") {
    TempDir d("missing");
    const auto base = small_run(d);
    CHECK(run(with(base, {"synth"})).code == 0);
    CHECK(run(with(base, {"build-graph"})).code == 0);
    const Result r = run(with(base, {"evaluate"}));
    CHECK(r.code == 1);
    CHECK(r.err.find("MissingArtifact") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "report.json"));
  }

  TEST_CASE("pipeline produces a valid report and explanations") {
    TempDir d("pipe");
    const auto base = small_run(d);
    for (const char* cmd : {"synth", "build-graph", "train", "evaluate"}) {
      const Result r = run(with(base, {cmd}));
      INFO(cmd << ": " << r.err);
      REQUIRE(r.code == 0);
    }
    const auto report = nlohmann::json::parse(slurp(d / "report.json"));
    CHECK(eval::validate_report_json(report).empty());

    const Result one = run(with(base, {"explain", "--user", "3", "--item", "7"}));
    CHECK(one.code == 0);
    CHECK(one.out.find("Epoch 3") != std::string::npos);
    const Result top = run(with(base, {"explain", "--user", "3"}));
    CHECK(top.code == 0);
    CHECK(top.out.find("predicted") != std::string::npos);
    CHECK(run(with(base, {"explain", "--user", "999"})).code == 1);
    CHECK(run(with(base, {"explain"})).code == 1);
  }

  TEST_CASE("ingest tags a split and respects an existing one") {
    TempDir d("ingest");
    std::ofstream(d / "raw.csv") << "user,item,day,rating\n0,0,1,4\n0,1,40,5\n0,2,70,3\n1,0,5,2\n1,2,65,4\n";
    CHECK(run({"--input", d / "raw.csv", "--data", d / "data.csv", "--set", "data.test_fraction=0.5", "ingest"})
              .code == 0);
    const std::string written = slurp(d / "data.csv");
    CHECK(written.find(",test") != std::string::npos);
    CHECK(run({"--input", d / "data.csv", "--data", d / "again.csv", "ingest"}).code == 0);
    CHECK(slurp(d / "again.csv") == written);
    CHECK(run({"--input", d / "nope.csv", "--data", d / "x.csv", "ingest"}).code == 1);
    std::ofstream(d / "broken.csv") << "0,0,1,9\n";
    CHECK(run({"--input", d / "broken.csv", "--data", d / "x.csv", "ingest"}).code == 2);
  }

  TEST_CASE("sweep-p and grid-search write their tables") {
    TempDir d("sweep");
    auto base = with(small_run(d), {"sweep.p_values=2,4", "grid.alpha=0,0.4", "grid.beta=0.6", "paths.sweep=" + d / "sweep.csv",
                                    "paths.grid=" + d / "grid.csv"});
    REQUIRE(run(with(base, {"synth"})).code == 0);
    REQUIRE(run(with(base, {"build-graph"})).code == 0);
    REQUIRE(run(with(base, {"sweep-p"})).code == 0);
    const std::string sweep = slurp(d / "sweep.csv");
    CHECK(sweep.rfind("p,mep,mer,map,mr,mrr,rmse\n", 0) == 0);
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
    const Result g = run(with(base, {"grid-search"}));
    REQUIRE(g.code == 0);
    const std::string grid = slurp(d / "grid.csv");
    CHECK(std::count(grid.begin(), grid.end(), '\n') == 3);
    CHECK(g.out.find("best alpha") != std::string::npos);
  }
}
