#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "banditmd/experiment.hpp"

using namespace banditmd;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

json quadratic_game_spec() {
  return json::parse(R"({
    "kind": "quadratic",
    "dims": [2, 2],
    "beta": 1.0,
    "xstar": [0.25, 0.75, 0.4, 0.6]
  })");
}

json base_config() {
  json j;
  j["schema_version"] = 1;
  j["game"] = quadratic_game_spec();
  return j;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // column 0 carries n as a double
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  CsvTable t;
  std::string line;
  REQUIRE(std::getline(in, line));
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    REQUIRE(row.size() == t.header.size());
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("banditmd_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("game construction from JSON", "[experiment]") {
  Game q = make_game(quadratic_game_spec());
  REQUIRE(q.players() == 2);
  REQUIRE(q.layout().total == 4);
  REQUIRE(q.equilibrium().has_value());

  Game c = make_game(json::parse(R"({"kind":"cournot","a":2.0,"b":1.0,"c":[0.8,1.0,1.2]})"));
  REQUIRE(c.players() == 3);
  REQUIRE_THAT((*c.equilibrium())[0], WithinAbs(0.45, 1e-12));

  Game a = make_game(json::parse(R"({"kind":"auction","g":[1.0,2.0],"q":[1.0,0.5],"c":[1.0,1.0]})"));
  REQUIRE(a.players() == 2);
  REQUIRE(a.set(0).kind() == SetKind::simplex);

  REQUIRE_THROWS_AS(make_game(json::parse(R"({"kind":"nope"})")), config_error);
  REQUIRE_THROWS_AS(make_game(json::parse(R"({"a": 1.0})")), config_error);
}

TEST_CASE("query anchor overrides", "[experiment]") {
  json spec = quadratic_game_spec();
  spec["base_point"] = {{0.3, 0.3}, {0.5, 0.5}};
  spec["safety_radius"] = {0.25, 0.3};
  Game g = make_game(spec);
  REQUIRE(g.set(0).base_point() == Vec{0.3, 0.3});
  REQUIRE(g.set(1).base_point() == Vec{0.5, 0.5});
  REQUIRE(g.set(0).safety_radius() == 0.25);
  REQUIRE(g.set(1).safety_radius() == 0.3);

  json bad = quadratic_game_spec();
  bad["base_point"] = {{0.05, 0.05}, {0.5, 0.5}};
  bad["safety_radius"] = {0.25, 0.3};  // the first anchor ball does not fit
  REQUIRE_THROWS_AS(make_game(bad), std::invalid_argument);

  json wrong = quadratic_game_spec();
  wrong["base_point"] = {{0.5, 0.5}};
  REQUIRE_THROWS_AS(make_game(wrong), config_error);
}

TEST_CASE("config parsing and defaults", "[experiment]") {
  ExperimentConfig cfg = ExperimentConfig::from_json(base_config());
  REQUIRE(cfg.feedback == FeedbackMode::bandit);
  REQUIRE(cfg.regularizer == RegKind::euclidean);
  REQUIRE(cfg.horizon == 100000);
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>{1});
  REQUIRE(cfg.log_stride == 1.2);
  REQUIRE_FALSE(cfg.fit_window.has_value());
  REQUIRE(cfg.schedule_mode() == Schedule::Mode::bandit_asymptotic);

  json j = base_config();
  j["feedback"] = "oracle";
  j["sigma"] = 0.5;
  j["preset"] = "oracle-rate";
  j["schedule"] = {{"gamma", 2.0}, {"p", 0.7}};
  j["seeds"] = 3;
  j["horizon"] = 5000;
  j["fit_window"] = {100, 5000};
  cfg = ExperimentConfig::from_json(j);
  REQUIRE(cfg.feedback == FeedbackMode::oracle);
  REQUIRE(cfg.sigma == 0.5);
  REQUIRE(cfg.schedule.gamma == 2.0);
  REQUIRE(cfg.schedule.p == 1.0);  // preset overrides the exponent
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  REQUIRE(cfg.fit_window == std::make_pair(100L, 5000L));
  REQUIRE(cfg.schedule_mode() == Schedule::Mode::oracle_rate);

  j["seeds"] = json::array({7, 11});
  cfg = ExperimentConfig::from_json(j);
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>{7, 11});

  j["preset"] = "bandit-rate";
  j["feedback"] = "bandit";
  cfg = ExperimentConfig::from_json(j);
  REQUIRE(cfg.schedule.p == 1.0);
  REQUIRE_THAT(cfg.schedule.q, WithinAbs(1.0 / 3.0, 1e-15));
  REQUIRE(cfg.schedule_mode() == Schedule::Mode::bandit_rate);
}

TEST_CASE("config validation errors", "[experiment]") {
  json j = base_config();
  j["schema_version"] = 2;
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j.erase("game");
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["regularizer"] = "fancy";
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["feedback"] = "spy";
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["preset"] = "warp";
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["seeds"] = 0;
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["seeds"] = json::array();
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["horizon"] = 0;
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["log_stride"] = 1.0;
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  j = base_config();
  j["fit_window"] = {50, 10};
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(j), config_error);

  REQUIRE_THROWS_AS(ExperimentConfig::from_file("/nonexistent/path.json"), config_error);
}

TEST_CASE("power-law fitting", "[experiment]") {
  std::vector<std::pair<long, double>> series;
  for (long n = 1; n <= 100000; n = n * 3 / 2 + 1) series.emplace_back(n, 3.0 * std::pow(double(n), -0.75));
  FitResult fit = fit_rate(series, 10, 100000);
  REQUIRE_THAT(fit.slope, WithinAbs(-0.75, 1e-10));
  REQUIRE_THAT(fit.intercept, WithinAbs(std::log(3.0), 1e-9));
  REQUIRE_THAT(fit.r2, WithinAbs(1.0, 1e-12));
  REQUIRE(fit.points >= 5);

  // Window filtering drops everything outside [lo, hi] and non-positive values.
  series.push_back({200000, 0.0});
  FitResult narrow = fit_rate(series, 10, 100000);
  REQUIRE(narrow.points == fit.points);

  REQUIRE_THROWS_AS(fit_rate(series, 99998, 99999), std::invalid_argument);
}

TEST_CASE("experiment writes a complete bundle", "[experiment]") {
  json j = base_config();
  j["feedback"] = "bandit";
  j["schedule"] = {{"gamma", 1.0}, {"p", 1.0}, {"delta0", 0.1}, {"q", 1.0 / 3.0}};
  j["horizon"] = 5000;
  j["seeds"] = 3;
  j["hit_threshold"] = 0.25;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);

  TempDir dir("bundle");
  AggregateResult agg = run_experiment(cfg, dir.path.string());

  REQUIRE(agg.xstar_method == "closed-form");
  REQUIRE(agg.xstar == Vec{0.25, 0.75, 0.4, 0.6});
  REQUIRE(agg.n.front() == 1);
  REQUIRE(agg.n.back() == 5000);
  REQUIRE(agg.mean_sq_dist_realized.size() == agg.n.size());
  REQUIRE(agg.std_err.size() == agg.n.size());
  REQUIRE(agg.seeds.size() == 3);
  for (const auto& s : agg.seeds) {
    REQUIRE(s.min_dist_realized < std::sqrt(s.terminal_sq_dist_realized) + 1e-12);
    REQUIRE(s.first_hit_n > 0);  // threshold 0.25 is reached on this horizon
  }

  for (const char* name : {"traces/1.csv", "traces/2.csv", "traces/3.csv", "aggregate.csv", "summary.json"})
    REQUIRE(fs::exists(dir.path / name));

  json summary;
  std::ifstream(dir.path / "summary.json") >> summary;
  REQUIRE(summary.at("schema_version") == 1);
  REQUIRE(summary.at("config") == j);
  REQUIRE(summary.at("equilibrium").at("method") == "closed-form");
  REQUIRE(summary.at("seeds").size() == 3);
  REQUIRE_FALSE(summary.at("delta0_adjusted").get<bool>());

  // The aggregate rows are exactly the seed-ordered means of the trace rows.
  CsvTable aggregate = read_csv(dir.path / "aggregate.csv");
  std::vector<CsvTable> traces;
  for (int s = 1; s <= 3; ++s) traces.push_back(read_csv(dir.path / "traces" / (std::to_string(s) + ".csv")));
  REQUIRE(aggregate.rows.size() == traces[0].rows.size());
  for (std::size_t k = 0; k < aggregate.rows.size(); ++k) {
    double mr = 0.0, mp = 0.0, mb = 0.0;
    for (const auto& t : traces) {
      REQUIRE(t.rows[k][0] == aggregate.rows[k][0]);
      mr += t.rows[k][1];
      mp += t.rows[k][2];
      mb += t.rows[k][3];
    }
    mr /= 3;
    mp /= 3;
    mb /= 3;
    double m2 = 0.0;
    for (const auto& t : traces) m2 += (t.rows[k][1] - mr) * (t.rows[k][1] - mr);
    double se = std::sqrt(m2 / 2.0 / 3.0);
    REQUIRE(aggregate.rows[k][1] == mr);
    REQUIRE(aggregate.rows[k][2] == mp);
    REQUIRE(aggregate.rows[k][4] == mb);
    REQUIRE_THAT(aggregate.rows[k][3], WithinAbs(se, 1e-16 + 1e-12 * se));
  }
}

TEST_CASE("experiments are reproducible byte for byte", "[experiment]") {
  json j = base_config();
  j["feedback"] = "bandit";
  j["schedule"] = {{"gamma", 1.0}, {"p", 1.0}, {"delta0", 0.1}, {"q", 1.0 / 3.0}};
  j["horizon"] = 1500;
  j["seeds"] = 4;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);

  TempDir a("rerun_a"), b("rerun_b");
  run_experiment(cfg, a.path.string());
  run_experiment(cfg, b.path.string());
  for (const char* name : {"aggregate.csv", "summary.json", "traces/1.csv", "traces/4.csv"})
    REQUIRE(read_bytes(a.path / name) == read_bytes(b.path / name));

  // Thread count must not change any output byte.
  json jt = j;
  jt["threads"] = 1;
  TempDir c("rerun_c");
  run_experiment(ExperimentConfig::from_json(jt), c.path.string());
  REQUIRE(read_bytes(a.path / "aggregate.csv") == read_bytes(c.path / "aggregate.csv"));
}

TEST_CASE("fit reports null when the window has too few points", "[experiment]") {
  json j = base_config();
  j["feedback"] = "exact";
  j["schedule"] = {{"gamma", 0.5}, {"p", 1.0}};
  j["horizon"] = 200;
  j["fit_window"] = {2, 3};
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  TempDir dir("nullfit");
  AggregateResult agg = run_experiment(cfg, dir.path.string());
  REQUIRE_FALSE(agg.fit.has_value());
  json summary;
  std::ifstream(dir.path / "summary.json") >> summary;
  REQUIRE(summary.at("fit").is_null());
}

TEST_CASE("very short horizons produce a null fit by default", "[experiment]") {
  json j = base_config();
  j["feedback"] = "exact";
  j["schedule"] = {{"gamma", 0.5}, {"p", 1.0}};
  j["horizon"] = 10;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  TempDir dir("shortfit");
  AggregateResult agg = run_experiment(cfg, dir.path.string());
  REQUIRE_FALSE(agg.fit.has_value());
  CsvTable trace = read_csv(dir.path / "traces" / "1.csv");
  REQUIRE(trace.rows.size() <= 10);
  REQUIRE(trace.rows.back()[0] == 10.0);
}

TEST_CASE("initial profile override reaches the dynamics", "[experiment]") {
  json j = base_config();
  j["feedback"] = "exact";
  j["schedule"] = {{"gamma", 0.5}, {"p", 1.0}};
  j["horizon"] = 50;
  j["x0"] = {0.3, 0.6, 0.35, 0.65};
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  AggregateResult agg = run_experiment(cfg);
  double d2 = 0.0;
  const Vec x0{0.3, 0.6, 0.35, 0.65};
  for (std::size_t k = 0; k < x0.size(); ++k)
    d2 += (x0[k] - agg.xstar[k]) * (x0[k] - agg.xstar[k]);
  REQUIRE(agg.n.front() == 1);
  REQUIRE_THAT(agg.mean_sq_dist_pivot.front(), WithinAbs(d2, 1e-15));
}

TEST_CASE("run is rejected when the schedule misses the regime", "[experiment]") {
  json j = base_config();
  j["feedback"] = "bandit";
  j["preset"] = "bandit-rate";
  j["schedule"] = {{"gamma", 0.2}, {"delta0", 0.1}};  // needs gamma > 1/(3 beta) = 1/3
  j["horizon"] = 10;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}
