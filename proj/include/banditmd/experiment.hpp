#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "banditmd/dynamics.hpp"
#include "banditmd/equilibrium.hpp"
#include "banditmd/games.hpp"

namespace banditmd {

using json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error("config: " + msg) {}
};

// Build a game from its JSON description. Common optional fields:
// "base_point" / "safety_radius" override the per-player query anchors.
inline Game make_game(const json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) throw config_error("game needs a \"kind\"");
  std::string kind = spec.at("kind").get<std::string>();
  Game game = [&]() -> Game {
    if (kind == "cournot") {
      CournotParams p;
      p.a = spec.value("a", 2.0);
      p.b = spec.value("b", 1.0);
      p.c = spec.at("c").get<Vec>();
      if (spec.contains("caps")) p.caps = spec.at("caps").get<Vec>();
      return make_cournot(p);
    }
    if (kind == "auction") {
      AuctionParams p;
      p.g = spec.at("g").get<Vec>();
      p.q = spec.at("q").get<Vec>();
      p.c = spec.at("c").get<Vec>();
      if (spec.contains("budget")) p.budget = spec.at("budget").get<Vec>();
      return make_auction(p);
    }
    if (kind == "quadratic") {
      QuadraticParams p;
      p.dims = spec.at("dims").get<std::vector<int>>();
      p.beta = spec.value("beta", 1.0);
      p.coupling = spec.value("coupling", 0.0);
      p.offset = spec.value("offset", 0.0);
      if (spec.contains("lo")) p.lo = spec.at("lo").get<Vec>();
      if (spec.contains("hi")) p.hi = spec.at("hi").get<Vec>();
      if (spec.contains("xstar")) p.xstar = spec.at("xstar").get<Vec>();
      if (spec.contains("coupling_seed")) p.coupling_seed = spec.at("coupling_seed").get<std::uint64_t>();
      return make_quadratic(p);
    }
    throw config_error("unknown game kind \"" + kind + "\"");
  }();

  if (spec.contains("base_point")) {
    const auto& bp = spec.at("base_point");
    if (!bp.is_array() || bp.size() != static_cast<std::size_t>(game.players()))
      throw config_error("base_point needs one entry per player");
    for (int i = 0; i < game.players(); ++i) {
      Vec p = bp.at(static_cast<std::size_t>(i)).get<Vec>();
      double r = game.set(i).safety_radius();
      if (spec.contains("safety_radius"))
        r = spec.at("safety_radius").at(static_cast<std::size_t>(i)).get<double>();
      game.set_base_point(i, std::move(p), r);
    }
  } else if (spec.contains("safety_radius")) {
    for (int i = 0; i < game.players(); ++i)
      game.set_base_point(i, game.set(i).base_point(),
                          spec.at("safety_radius").at(static_cast<std::size_t>(i)).get<double>());
  }
  return game;
}

enum class FeedbackMode { exact, oracle, bandit };

inline FeedbackMode feedback_from_string(const std::string& s) {
  if (s == "exact") return FeedbackMode::exact;
  if (s == "oracle") return FeedbackMode::oracle;
  if (s == "bandit") return FeedbackMode::bandit;
  throw config_error("feedback must be exact | oracle | bandit");
}

struct ExperimentConfig {
  json game;
  RegKind regularizer = RegKind::euclidean;
  FeedbackMode feedback = FeedbackMode::bandit;
  double sigma = 0.0;
  Schedule schedule;
  std::string preset;  // "", "bandit-rate", "oracle-rate"
  long horizon = 100000;
  std::vector<std::uint64_t> seeds;
  double log_stride = 1.2;
  std::optional<std::pair<long, long>> fit_window;
  double hit_threshold = 0.0;
  std::optional<Vec> x0;
  int threads = 0;  // 0: hardware concurrency
  json raw;         // original document, echoed into summaries

  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig from_file(const std::string& path);

  void apply_preset() {
    if (preset.empty()) return;
    if (preset == "bandit-rate") {
      schedule.p = 1.0;
      schedule.q = 1.0 / 3.0;
    } else if (preset == "oracle-rate") {
      schedule.p = 1.0;
    } else {
      throw config_error("unknown preset \"" + preset + "\"");
    }
  }

  Schedule::Mode schedule_mode() const {
    if (feedback == FeedbackMode::bandit)
      return preset == "bandit-rate" ? Schedule::Mode::bandit_rate : Schedule::Mode::bandit_asymptotic;
    if (preset == "oracle-rate") return Schedule::Mode::oracle_rate;
    return Schedule::Mode::exact;
  }
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw config_error("document must be an object");
  int version = j.value("schema_version", 0);
  if (version != kConfigSchemaVersion)
    throw config_error("unsupported schema_version " + std::to_string(version) + " (expected " +
                       std::to_string(kConfigSchemaVersion) + ")");
  ExperimentConfig cfg;
  cfg.raw = j;
  if (!j.contains("game")) throw config_error("missing \"game\"");
  cfg.game = j.at("game");
  std::string reg = j.value("regularizer", std::string("euclidean"));
  if (reg == "euclidean")
    cfg.regularizer = RegKind::euclidean;
  else if (reg == "entropic")
    cfg.regularizer = RegKind::entropic;
  else
    throw config_error("regularizer must be euclidean | entropic");
  cfg.feedback = feedback_from_string(j.value("feedback", std::string("bandit")));
  cfg.sigma = j.value("sigma", 0.0);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    cfg.schedule.gamma = s.value("gamma", 1.0);
    cfg.schedule.p = s.value("p", 1.0);
    cfg.schedule.delta0 = s.value("delta0", 0.1);
    cfg.schedule.q = s.value("q", 1.0 / 3.0);
  }
  cfg.preset = j.value("preset", std::string(""));
  cfg.apply_preset();
  cfg.horizon = j.value("horizon", 100000L);
  if (cfg.horizon < 1) throw config_error("horizon must be >= 1");
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_number_integer()) {
      long count = s.get<long>();
      if (count < 1) throw config_error("seeds count must be >= 1");
      for (long k = 1; k <= count; ++k) cfg.seeds.push_back(static_cast<std::uint64_t>(k));
    } else if (s.is_array()) {
      for (const auto& v : s) cfg.seeds.push_back(v.get<std::uint64_t>());
      if (cfg.seeds.empty()) throw config_error("seeds array must be non-empty");
    } else {
      throw config_error("seeds must be a count or an array");
    }
  } else {
    cfg.seeds = {1};
  }
  cfg.log_stride = j.value("log_stride", 1.2);
  if (!(cfg.log_stride > 1.0)) throw config_error("log_stride must be > 1");
  if (j.contains("fit_window")) {
    const auto& w = j.at("fit_window");
    if (!w.is_array() || w.size() != 2) throw config_error("fit_window must be [lo, hi]");
    cfg.fit_window = std::make_pair(w.at(0).get<long>(), w.at(1).get<long>());
    if (!(cfg.fit_window->first >= 1 && cfg.fit_window->first < cfg.fit_window->second))
      throw config_error("fit_window must satisfy 1 <= lo < hi");
  }
  cfg.hit_threshold = j.value("hit_threshold", 0.0);
  if (j.contains("x0")) cfg.x0 = j.at("x0").get<Vec>();
  cfg.threads = j.value("threads", 0);
  return cfg;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw config_error(std::string("parse error in ") + path + ": " + e.what());
  }
  return from_json(j);
}

// Least-squares slope of log(value) against log(n) over n in [lo, hi].
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  long lo = 0, hi = 0;
  int points = 0;
};

inline FitResult fit_rate(const std::vector<std::pair<long, double>>& series, long lo, long hi) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [n, v] : series)
    if (n >= lo && n <= hi && v > 0.0) pts.emplace_back(std::log(static_cast<double>(n)), std::log(v));
  FitResult fit;
  fit.lo = lo;
  fit.hi = hi;
  fit.points = static_cast<int>(pts.size());
  if (pts.size() < 5) throw std::invalid_argument("fit: need at least 5 positive points in the window");
  double sx = 0, sy = 0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  double mx = sx / pts.size(), my = sy / pts.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit: degenerate window");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

struct SeedSummary {
  std::uint64_t seed = 0;
  double terminal_sq_dist_realized = 0.0;
  double terminal_sq_dist_pivot = 0.0;
  double min_dist_realized = 0.0;
  long min_dist_n = 0;
  long first_hit_n = 0;
};

struct AggregateResult {
  std::vector<long> n;
  std::vector<double> mean_sq_dist_realized;
  std::vector<double> mean_sq_dist_pivot;
  std::vector<double> std_err;  // of sq_dist_realized across seeds
  std::vector<double> mean_bregman;
  std::vector<double> gamma_n;
  std::vector<double> delta_n;
  std::optional<FitResult> fit;
  std::vector<SeedSummary> seeds;
  Vec xstar;
  std::string xstar_method;
  bool delta0_adjusted = false;
  double delta0_used = 0.0;
};

namespace detail {

inline void parallel_for_index(int jobs, int threads, const std::function<void(int)>& fn) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int workers = threads > 0 ? threads : hw;
  workers = std::min(workers, jobs);
  if (workers <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trace_csv(const std::filesystem::path& path, const RunTrace& tr) {
  std::ofstream csv(path);
  csv << "n,sq_dist_realized,sq_dist_pivot,bregman,gamma_n,delta_n\n";
  for (const auto& pt : tr.points)
    csv << pt.n << ',' << fmt_double(pt.sq_dist_realized) << ',' << fmt_double(pt.sq_dist_pivot)
        << ',' << fmt_double(pt.bregman) << ',' << fmt_double(pt.gamma) << ','
        << fmt_double(pt.delta) << '\n';
}

}  // namespace detail

// Run every seed, write per-seed traces plus cross-seed aggregates, fit the
// decay rate over the requested window. out_dir empty: nothing is written.
inline AggregateResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "") {
  Game game = make_game(cfg.game);
  Regularizer reg(game.sets(), cfg.regularizer);

  AggregateResult agg;
  if (game.equilibrium()) {
    agg.xstar = *game.equilibrium();
    agg.xstar_method = "closed-form";
  } else {
    EquilibriumSolution sol = solve_extragradient(game);
    agg.xstar = sol.x;
    agg.xstar_method = sol.method;
  }

  cfg.schedule.validate(cfg.schedule_mode(), game.beta());

  RunOptions opts;
  opts.log_stride = cfg.log_stride;
  opts.x_ref = agg.xstar;
  opts.hit_threshold = cfg.hit_threshold;
  opts.x0 = cfg.x0;

  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(fs::path(out_dir) / "traces");

  int S = static_cast<int>(cfg.seeds.size());
  std::vector<RunTrace> traces(static_cast<std::size_t>(S));
  detail::parallel_for_index(S, cfg.threads, [&](int idx) {
    std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(idx)];
    RunTrace& tr = traces[static_cast<std::size_t>(idx)];
    switch (cfg.feedback) {
      case FeedbackMode::exact:
        tr = run_oracle(game, reg, cfg.schedule, cfg.horizon, NoiseModel::none(), seed, opts,
                        cfg.schedule_mode());
        break;
      case FeedbackMode::oracle:
        tr = run_oracle(game, reg, cfg.schedule, cfg.horizon, NoiseModel::gaussian(cfg.sigma), seed,
                        opts, cfg.schedule_mode());
        break;
      case FeedbackMode::bandit:
        tr = run_bandit(game, reg, cfg.schedule, cfg.horizon, seed, opts, cfg.schedule_mode());
        break;
    }
    // Written as soon as the seed finishes so a later failure keeps the
    // completed traces on disk.
    if (!out_dir.empty())
      detail::write_trace_csv(fs::path(out_dir) / "traces" / (std::to_string(seed) + ".csv"), tr);
  });

  agg.delta0_adjusted = traces.front().delta0_adjusted;
  agg.delta0_used = traces.front().delta0_used;

  // All runs log on the same grid; verify rather than assume.
  const auto& first = traces.front().points;
  for (const auto& tr : traces)
    if (tr.points.size() != first.size())
      throw std::runtime_error("aggregate: traces logged on different grids");
  std::size_t P = first.size();
  agg.n.reserve(P);
  for (std::size_t k = 0; k < P; ++k) {
    long n = first[k].n;
    double mr = 0.0, mp = 0.0, mb = 0.0, m2 = 0.0;
    for (int s = 0; s < S; ++s) {
      const TracePoint& pt = traces[static_cast<std::size_t>(s)].points[k];
      if (pt.n != n) throw std::runtime_error("aggregate: traces logged on different grids");
      mr += pt.sq_dist_realized;
      mp += pt.sq_dist_pivot;
      mb += pt.bregman;
    }
    mr /= S;
    mp /= S;
    mb /= S;
    for (int s = 0; s < S; ++s) {
      double d = traces[static_cast<std::size_t>(s)].points[k].sq_dist_realized - mr;
      m2 += d * d;
    }
    double se = S > 1 ? std::sqrt(m2 / (S - 1) / S) : 0.0;
    agg.n.push_back(n);
    agg.mean_sq_dist_realized.push_back(mr);
    agg.mean_sq_dist_pivot.push_back(mp);
    agg.std_err.push_back(se);
    agg.mean_bregman.push_back(mb);
    agg.gamma_n.push_back(first[k].gamma);
    agg.delta_n.push_back(first[k].delta);
  }

  for (int s = 0; s < S; ++s) {
    const RunTrace& tr = traces[static_cast<std::size_t>(s)];
    SeedSummary sum;
    sum.seed = tr.seed;
    sum.terminal_sq_dist_realized = tr.points.back().sq_dist_realized;
    sum.terminal_sq_dist_pivot = tr.points.back().sq_dist_pivot;
    sum.min_dist_realized = tr.min_dist_realized;
    sum.min_dist_n = tr.min_dist_n;
    sum.first_hit_n = tr.first_hit_n;
    agg.seeds.push_back(sum);
  }

  // Default window: the last decade, never starting before n = 10 (short
  // horizons end up with too few points and a null fit).
  long lo = cfg.fit_window ? cfg.fit_window->first : std::max(cfg.horizon / 10, 10L);
  long hi = cfg.fit_window ? cfg.fit_window->second : cfg.horizon;
  std::vector<std::pair<long, double>> series;
  for (std::size_t k = 0; k < P; ++k) series.emplace_back(agg.n[k], agg.mean_sq_dist_realized[k]);
  try {
    agg.fit = fit_rate(series, lo, hi);
  } catch (const std::invalid_argument&) {
    agg.fit.reset();  // window too small: summary reports null
  }

  if (!out_dir.empty()) {
    std::ofstream csv(fs::path(out_dir) / "aggregate.csv");
    csv << "n,mean_sq_dist_realized,mean_sq_dist_pivot,stderr,mean_bregman,gamma_n,delta_n\n";
    for (std::size_t k = 0; k < P; ++k)
      csv << agg.n[k] << ',' << detail::fmt_double(agg.mean_sq_dist_realized[k]) << ','
          << detail::fmt_double(agg.mean_sq_dist_pivot[k]) << ',' << detail::fmt_double(agg.std_err[k])
          << ',' << detail::fmt_double(agg.mean_bregman[k]) << ',' << detail::fmt_double(agg.gamma_n[k])
          << ',' << detail::fmt_double(agg.delta_n[k]) << '\n';

    json summary;
    summary["schema_version"] = kConfigSchemaVersion;
    summary["config"] = cfg.raw.is_null() ? json::object() : cfg.raw;
    summary["equilibrium"] = {{"x", agg.xstar}, {"method", agg.xstar_method}};
    summary["delta0_adjusted"] = agg.delta0_adjusted;
    summary["delta0_used"] = agg.delta0_used;
    if (agg.fit) {
      summary["fit"] = {{"slope", agg.fit->slope}, {"intercept", agg.fit->intercept},
                        {"r2", agg.fit->r2},       {"window", {agg.fit->lo, agg.fit->hi}},
                        {"points", agg.fit->points}};
    } else {
      summary["fit"] = nullptr;
    }
    json seeds = json::array();
    for (const auto& s : agg.seeds)
      seeds.push_back({{"seed", s.seed},
                       {"terminal_sq_dist_realized", s.terminal_sq_dist_realized},
                       {"terminal_sq_dist_pivot", s.terminal_sq_dist_pivot},
                       {"min_dist_realized", s.min_dist_realized},
                       {"min_dist_n", s.min_dist_n},
                       {"first_hit_n", s.first_hit_n}});
    summary["seeds"] = seeds;
    std::ofstream js(fs::path(out_dir) / "summary.json");
    js << summary.dump(2) << '\n';
  }

  return agg;
}

}  // namespace banditmd
