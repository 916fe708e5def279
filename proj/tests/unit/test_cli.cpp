// Copyright 2026 The evgbm Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cli.hpp"
#include "evgbm/booster.hpp"
#include "evgbm/errors.hpp"
#include "evgbm/io.hpp"
#include "evgbm/tree.hpp"

using namespace evgbm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

// A scratch directory holding a small synthetic dataset and a config.
class Workspace {
 public:
  Workspace() {
    dir_ = fs::temp_directory_path() /
           ("evgbm_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    REQUIRE(run({"synth", "--out", path("d.csv"), "--nx", "8", "--ny", "6", "--years", "2",
                 "--seed", "4"})
                .code == 0);
    write("c.ini",
          "[data]\ntrain = d.csv\n"
          "[loss]\nkind = dgpd\nalpha = 5\n"
          "[train]\nn_trees = 20\nmax_leaves = 4\n"
          "[features]\nuse = temp, dry, noise\n"
          "[cv]\nn_folds = 2\ntree_counts = 5, 10\nbeta0_cnt = -1.5\nbeta0_ba = -1.5\n"
          "[tune]\nlambda = 0.1, 5\n");
  }
  ~Workspace() { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const {
    io::write_text_file(dir_ / name, text);
  }
  std::string read(const std::string& name) const { return io::read_text_file(dir_ / name); }

  Result run(std::vector<std::string> args) const {
    args.insert(args.begin(), {"--run-log", path("run.log")});
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

 private:
  fs::path dir_;
  static inline int counter_ = 0;
};

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(cli::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(cli::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(cli::fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config parsing") {
  const auto cfg = cli::parse_config("[loss]\nkind = trgamma\n[mixture]\nu = 100\n");
  CHECK(cfg.recipe.response == Response::kBaBulk);
  CHECK(cfg.recipe.loss.u_trunc == doctest::Approx(std::log1p(100.0)));
  CHECK(!cfg.recipe.threshold_score);
  CHECK(cfg.n_folds == 5);
  CHECK(cli::parse_config("[loss]\nkind = gpd\n").recipe.response == Response::kBaExcess);
  CHECK(cli::parse_config("[loss]\nkind = cross_entropy\n").recipe.response ==
        Response::kBaClass);
  CHECK(cli::parse_config("[loss]\nkind = squared_log\n").recipe.response == Response::kBa);
  const auto count = cli::parse_config("[loss]\nkind = poisson\n[train]\nn_trees = 40\n");
  CHECK(count.recipe.threshold_score);
  CHECK(count.recipe.score.thresholds.size() == 28);
  CHECK(count.tree_counts == std::vector<int>{4, 8, 12, 16, 20, 24, 28, 32, 36, 40});

  const auto mix = cli::parse_config(
      "[mixture]\nenabled = true\ntail.n_trees = 7\nxi = 0.5\n[train]\nn_trees = 3\n"
      "[tune]\nmax_iters = 4\ntail.max_leaves = 2, 9\nxi = 0.2, 0.9\n");
  CHECK(mix.recipe.mixture);
  CHECK(mix.recipe.mixture_spec.tail.n_trees == 7);
  CHECK(mix.recipe.mixture_spec.bulk.n_trees == 3);
  CHECK(mix.recipe.mixture_spec.xi == 0.5);
  CHECK(mix.recipe.score.thresholds == ThresholdScoreSpec::sizes().thresholds);
  REQUIRE(mix.dims.size() == 2);
  CHECK(mix.dims[0].name == "tail.max_leaves");
  CHECK(mix.dims[0].integer);
  CHECK(!mix.dims[1].integer);
  CHECK(mix.max_iters == 4);

  CHECK_THROWS_AS(cli::parse_config("[train]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("x = 1\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[train]\nn_trees = many\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[data]\ntrain = /no/such/file.csv\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[tune]\ndepth = 1, 2\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[loss]\nkind = gpd\n[score]\nkind = threshold\n"),
                  ConfigError);
  CHECK_THROWS_AS(cli::parse_config("[mixture]\nbulk.depth = 3\n"), ConfigError);
}

TEST_CASE("thresholds files") {
  const auto s = cli::parse_thresholds("threshold,weight\n0,1\n5,2.5\n");
  CHECK(s.thresholds == std::vector<double>{0, 5});
  CHECK(s.weights == std::vector<double>{1, 2.5});
  CHECK(cli::parse_thresholds("threshold\n3\n").weights == std::vector<double>{1});
  CHECK_THROWS_AS(cli::parse_thresholds("value\n3\n"), ConfigError);
  CHECK_THROWS_AS(cli::parse_thresholds("threshold\n5\n1\n"), ConfigError);
}

TEST_CASE("train writes a model with the configured rounds") {
  Workspace w;
  const auto r = w.run({"train", "--config", w.path("c.ini"), "--out", w.path("m.json")});
  REQUIRE(r.code == 0);
  const auto kv = key_values(r.out);
  CHECK(kv.at("rounds") == "20");
  CHECK(std::stod(kv.at("train_loss")) > 0.0);
  CHECK(load_model_file(w.path("m.json")).n_rounds() == 20);
  const auto first = w.read("m.json");
  REQUIRE(w.run({"train", "--config", w.path("c.ini"), "--out", w.path("m.json")}).code == 0);
  CHECK(w.read("m.json") == first);
}

TEST_CASE("exit codes") {
  Workspace w;
  w.write("gpd.ini", "[data]\ntrain = d.csv\n[loss]\nkind = gpd\nresponse = ba\n");
  const auto bad = w.run({"train", "--config", w.path("gpd.ini"), "--out", w.path("g.json")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("row ") != std::string::npos);
  CHECK(w.run({"train", "--config", w.path("none.ini"), "--out", w.path("g.json")}).code == 1);
  w.write("bad.ini", "[train]\nn_tree = 3\n");
  CHECK(w.run({"train", "--config", w.path("bad.ini"), "--out", w.path("g.json")}).code == 1);
  CHECK(w.run({}).code == 1);
  CHECK(w.run({"train"}).code == 1);
  CHECK(w.run({"frobnicate"}).code == 1);
  std::ostringstream out, err;
  CHECK(cli::run({"--run-log", "", "--help"}, out, err) == 0);
}

TEST_CASE("predict outputs") {
  Workspace w;
  REQUIRE(w.run({"train", "--config", w.path("c.ini"), "--loss", "mixture", "--out",
                 w.path("mix.json")})
              .code == 0);
  w.write("two.csv", "threshold\n10\n500\n");
  auto r = w.run({"predict", "--model", w.path("mix.json"), "--data", w.path("d.csv"),
                  "--thresholds", w.path("two.csv"), "--out", w.path("p.csv")});
  REQUIRE(r.code == 0);
  const auto p = w.read("p.csv");
  CHECK(p.substr(0, p.find('\n')) == "lon,lat,year,month,p_le_10,p_le_500");
  CHECK(count_lines(p) == count_lines(w.read("d.csv")));

  r = w.run({"predict", "--model", w.path("mix.json"), "--data", w.path("d.csv"), "--out",
             w.path("p28.csv")});
  REQUIRE(r.code == 0);
  CHECK(key_values(r.out).at("columns") == "28");

  const auto data = w.read("d.csv");
  w.write("empty.csv", data.substr(0, data.find('\n') + 1));
  r = w.run({"predict", "--model", w.path("mix.json"), "--data", w.path("empty.csv"),
             "--thresholds", w.path("two.csv"), "--out", w.path("e.csv")});
  CHECK(r.code == 0);
  CHECK(w.read("e.csv") == "lon,lat,year,month,p_le_10,p_le_500\n");

  // Drop the last covariate column.
  std::istringstream in(data);
  std::string line, trimmed;
  while (std::getline(in, line)) trimmed += line.substr(0, line.rfind(',')) + "\n";
  w.write("short.csv", trimmed);
  r = w.run({"predict", "--model", w.path("mix.json"), "--data", w.path("short.csv"), "--out",
             w.path("s.csv")});
  CHECK(r.code == 2);

  REQUIRE(w.run({"train", "--config", w.path("c.ini"), "--out", w.path("m.json")}).code == 0);
  r = w.run({"predict", "--model", w.path("m.json"), "--data", w.path("d.csv"), "--out",
             w.path("raw.csv")});
  REQUIRE(r.code == 0);
  const auto raw = w.read("raw.csv");
  CHECK(raw.substr(0, raw.find('\n')) == "lon,lat,year,month,raw,mean");
}

TEST_CASE("train, predict and score reproduce the in-process pipeline") {
  Workspace w;
  REQUIRE(w.run({"train", "--config", w.path("c.ini"), "--out", w.path("m.json")}).code == 0);
  w.write("t.csv", "threshold,weight\n0,1\n2,0.5\n10,2\n");
  REQUIRE(w.run({"predict", "--model", w.path("m.json"), "--data", w.path("d.csv"),
                 "--thresholds", w.path("t.csv"), "--out", w.path("p.csv")})
              .code == 0);
  const auto r = w.run({"score", "--predictions", w.path("p.csv"), "--data", w.path("d.csv"),
                        "--thresholds", w.path("t.csv")});
  REQUIRE(r.code == 0);

  const auto cfg = cli::load_config(w.path("c.ini"));
  Recipe recipe = cfg.recipe;
  recipe.score = cli::parse_thresholds(w.read("t.csv"));
  const auto ds = load_csv(cfg.data, cfg.schema);
  const auto prepared = recipe.plan.apply(ds);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto fitted = fit_recipe(recipe, prepared, all);
  std::vector<std::size_t> rows;
  std::vector<double> truth;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (is_missing(ds.rows()[i].cnt)) continue;
    rows.push_back(i);
    truth.push_back(ds.rows()[i].cnt);
  }
  const double expect = fitted.score(recipe, prepared, rows, truth, -1);
  CHECK(key_values(r.out).at("score") == io::format_double(expect));
  CHECK(key_values(r.out).at("n") == std::to_string(rows.size()));
}

TEST_CASE("perfect predictions score zero") {
  Workspace w;
  const auto ds = load_csv(w.path("d.csv"));
  std::string csv = "lon,lat,year,month,p_le_0,p_le_3\n";
  for (const auto& o : ds.rows()) {
    const auto& c = ds.cells()[static_cast<std::size_t>(o.cell)];
    csv += io::format_double(c.lon) + "," + io::format_double(c.lat) + "," +
           std::to_string(o.year) + "," + std::to_string(o.month) + ",";
    const double y = is_missing(o.cnt) ? 0.0 : o.cnt;
    csv += std::string(y <= 0 ? "1" : "0") + "," + (y <= 3 ? "1" : "0") + "\n";
  }
  w.write("perfect.csv", csv);
  const auto r = w.run({"score", "--predictions", w.path("perfect.csv"), "--data", w.path("d.csv")});
  REQUIRE(r.code == 0);
  CHECK(key_values(r.out).at("score") == "0");
}

TEST_CASE("cvfolds, cv and tune") {
  Workspace w;
  w.write("folds.ini", "[data]\ntrain = d.csv\n[cv]\nbeta0_cnt = -2\nbeta0_ba = -2\n");
  auto r = w.run({"cvfolds", "--config", w.path("folds.ini"), "--out", w.path("f.csv")});
  REQUIRE(r.code == 0);
  CHECK(key_values(r.out).at("n_folds") == "5");
  const auto first = w.read("f.csv");
  REQUIRE(w.run({"cvfolds", "--config", w.path("folds.ini"), "--out", w.path("f.csv")}).code == 0);
  CHECK(w.read("f.csv") == first);
  REQUIRE(w.run({"cvfolds", "--config", w.path("folds.ini"), "--seed", "1", "--n-folds", "3",
                 "--out", w.path("f3.csv")})
              .code == 0);
  CHECK(w.read("f3.csv") != first);

  r = w.run({"cv", "--config", w.path("c.ini"), "--out", w.path("cv.csv")});
  REQUIRE(r.code == 0);
  CHECK(count_lines(w.read("cv.csv")) == 3);
  const auto sel = key_values(r.out).at("selected_trees");
  CHECK((sel == "5" || sel == "10"));

  r = w.run({"tune", "--config", w.path("c.ini"), "--max-iters", "3", "--out", w.path("t.csv")});
  REQUIRE(r.code == 0);
  CHECK(key_values(r.out).at("iterations") == "3");
  const auto log = w.read("t.csv");
  CHECK(count_lines(log) == 4);
  CHECK(log.rfind("iteration,lambda,trees,score\n", 0) == 0);
}

TEST_CASE("importance and pdp") {
  Workspace w;
  // One split on feature 'dry'.
  BoostedModel m;
  m.base_score = {0.0};
  m.feature_names = {"temp", "dry", "noise"};
  std::vector<TreeNode> n(3);
  n[0].feature = 1;
  n[0].threshold = 0.5;
  n[0].left = 1;
  n[0].right = 2;
  n[0].gain = 2.0;
  n[0].cover = 8.0;
  n[1].weight = -1.0;
  n[2].weight = 1.0;
  m.trees.emplace_back(std::move(n));
  save_model_file(m, w.path("one.json"));
  auto r = w.run({"importance", "--model", w.path("one.json"), "--out", w.path("imp.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.out == "dry=1\n");
  CHECK(w.read("imp.csv") == "feature,proportion\ndry,1\n");

  r = w.run({"pdp", "--model", w.path("one.json"), "--data", w.path("d.csv"), "--feature", "dry",
             "--feature", "temp", "--grid-size", "4", "--out", w.path("pdp.csv")});
  REQUIRE(r.code == 0);
  const auto pdp = w.read("pdp.csv");
  CHECK(pdp.rfind("dry,temp,estimate,lo,hi\n", 0) == 0);
  CHECK(count_lines(pdp) == 17);
  CHECK(w.run({"pdp", "--model", w.path("one.json"), "--data", w.path("d.csv"), "--feature",
               "wind", "--out", w.path("x.csv")})
            .code == 1);
}

TEST_CASE("run log records every command") {
  Workspace w;
  w.run({"importance", "--model", w.path("missing.json")});
  const auto log = w.read("run.log");
  CHECK(count_lines(log) == 2);  // synth from setup, then importance
  CHECK(log.find("command=synth") != std::string::npos);
  CHECK(log.find("seed=4") != std::string::npos);
  CHECK(log.find("config_hash=") != std::string::npos);
  CHECK(log.find("wall_time_s=") != std::string::npos);
  CHECK(log.find("command=importance") != std::string::npos);
  CHECK(log.find("exit=1") != std::string::npos);
}
