// Command-line front end: equilibrium solving, experiment execution,
// invariant checking, and the scalar comparison recursion.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "banditmd/banditmd.hpp"

namespace fs = std::filesystem;
using namespace banditmd;

namespace {

json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw config_error(std::string("parse error in ") + path + ": " + e.what());
  }
  return doc;
}

// Accept either a full experiment config (with a "game" object) or a bare
// game description.
json game_spec_of(const json& doc) { return doc.contains("game") ? doc.at("game") : doc; }

EquilibriumSolution solve_game(const Game& game) {
  if (game.equilibrium()) {
    EquilibriumSolution sol;
    sol.x = *game.equilibrium();
    sol.method = "closed-form";
    sol.residual = equilibrium_residual(game, sol.x, 1000);
    return sol;
  }
  return solve_extragradient(game);
}

json equilibrium_json(const EquilibriumSolution& sol) {
  return {{"x", sol.x},
          {"method", sol.method},
          {"residual", sol.residual},
          {"iterations", sol.iterations}};
}

void emit(const json& out) { std::cout << out.dump(2) << "\n"; }

int cmd_solve(const std::string& config_path, const std::string& out_dir) {
  Game game = make_game(game_spec_of(load_document(config_path)));
  EquilibriumSolution sol = solve_game(game);
  json out = equilibrium_json(sol);
  emit(out);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "equilibrium.json") << out.dump(2) << "\n";
  }
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, long seeds, int threads,
            const std::string& preset) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seeds > 0) {
    cfg.seeds.clear();
    for (long k = 1; k <= seeds; ++k) cfg.seeds.push_back(static_cast<std::uint64_t>(k));
  }
  if (threads > 0) cfg.threads = threads;
  if (!preset.empty()) {
    cfg.preset = preset;
    cfg.apply_preset();
  }

  AggregateResult agg = run_experiment(cfg, out_dir);

  json out;
  out["horizon"] = cfg.horizon;
  out["seeds"] = cfg.seeds.size();
  out["feedback"] = cfg.feedback == FeedbackMode::exact    ? "exact"
                    : cfg.feedback == FeedbackMode::oracle ? "oracle"
                                                           : "bandit";
  out["equilibrium"] = {{"x", agg.xstar}, {"method", agg.xstar_method}};
  out["delta0_adjusted"] = agg.delta0_adjusted;
  out["delta0_used"] = agg.delta0_used;
  if (agg.fit) {
    out["fit"] = {{"slope", agg.fit->slope},
                  {"intercept", agg.fit->intercept},
                  {"r2", agg.fit->r2},
                  {"window", {agg.fit->lo, agg.fit->hi}},
                  {"points", agg.fit->points}};
  } else {
    out["fit"] = nullptr;
  }
  out["terminal_mean_sq_dist"] = agg.mean_sq_dist_realized.back();
  if (!out_dir.empty()) out["out"] = out_dir;
  emit(out);
  return 0;
}

// Interior sample for divergence checks: shrink toward the anchor so
// entropic logs stay finite.
Vec interior_point(const ActionSet& set, SplitMix64& rng) {
  Vec x = set.random_point(rng);
  const Vec& p = set.base_point();
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.9 * x[k] + 0.1 * p[k];
  return x;
}

int cmd_check(const std::string& config_path, int samples, int trials) {
  json doc = load_document(config_path);
  Game game = make_game(game_spec_of(doc));
  bool passed = true;
  json out;

  {  // Sampled certificate that the weighted gradient field is monotone.
    MonotoneReport rep = check_monotone(game, samples);
    out["monotonicity"] = {{"monotone", rep.monotone},
                           {"samples", rep.samples},
                           {"max_quad_form", rep.max_quad_form}};
    passed = passed && rep.monotone;
  }

  {  // Equilibrium first-order condition.
    EquilibriumSolution sol = solve_game(game);
    bool ok = sol.residual <= 1e-6;
    out["equilibrium"] = equilibrium_json(sol);
    out["equilibrium"]["residual_ok"] = ok;
    passed = passed && ok;
  }

  RegKind kind = RegKind::euclidean;
  bool have_cfg = doc.contains("game");
  if (have_cfg && doc.value("regularizer", std::string("euclidean")) == std::string("entropic"))
    kind = RegKind::entropic;

  {  // Divergence identities and inequalities on random draws.
    Regularizer reg(game.sets(), kind);
    double K = reg.strong_convexity();
    SplitMix64 rng(20240);
    long identity_bad = 0, lower_bad = 0, compose_bad = 0, descent_bad = 0;
    for (int t = 0; t < trials; ++t) {
      for (int i = 0; i < game.players(); ++i) {
        const ActionSet& set = game.set(i);
        Vec p = interior_point(set, rng);
        Vec x = interior_point(set, rng);
        Vec xp = interior_point(set, rng);
        Vec gx(p.size()), gxp(p.size());
        reg.grad(i, x, gx);
        reg.grad(i, xp, gxp);
        double cross = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) cross += (gxp[k] - gx[k]) * (x[k] - p[k]);
        double lhs = reg.bregman(i, p, xp);
        double rhs = reg.bregman(i, p, x) + reg.bregman(i, x, xp) + cross;
        if (std::abs(lhs - rhs) > 1e-9) ++identity_bad;

        double d2 = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) d2 += (p[k] - x[k]) * (p[k] - x[k]);
        if (reg.bregman(i, p, x) < 0.5 * K * d2 - 1e-12) ++lower_bad;

        Vec y(p.size());
        for (auto& v : y) v = rng.next_gaussian();
        Vec via_prox(p.size()), shifted(p.size()), via_mirror(p.size());
        reg.prox(i, x, y, via_prox);
        reg.grad(i, x, shifted);
        for (std::size_t k = 0; k < y.size(); ++k) shifted[k] += y[k];
        reg.mirror(i, shifted, via_mirror);
        for (std::size_t k = 0; k < y.size(); ++k)
          if (std::abs(via_prox[k] - via_mirror[k]) > 1e-9) {
            ++compose_bad;
            break;
          }

        double ycross = 0.0, y2 = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
          ycross += y[k] * (x[k] - p[k]);
          y2 += y[k] * y[k];
        }
        if (reg.bregman(i, p, via_prox) > reg.bregman(i, p, x) + ycross + y2 / (2.0 * K) + 1e-9)
          ++descent_bad;
      }
    }
    json breg = {{"trials", trials},
                 {"three_point_identity_violations", identity_bad},
                 {"lower_bound_violations", lower_bad},
                 {"prox_mirror_mismatches", compose_bad},
                 {"descent_inequality_violations", descent_bad}};
    out["bregman"] = breg;
    passed = passed && identity_bad == 0 && lower_bad == 0 && compose_bad == 0 && descent_bad == 0;
  }

  if (have_cfg) {  // Schedule admissibility for the configured feedback mode.
    ExperimentConfig cfg = ExperimentConfig::from_json(doc);
    json sched = {{"gamma", cfg.schedule.gamma},
                  {"p", cfg.schedule.p},
                  {"delta0", cfg.schedule.delta0},
                  {"q", cfg.schedule.q}};
    try {
      cfg.schedule.validate(cfg.schedule_mode(), game.beta());
      sched["admissible"] = true;
    } catch (const std::invalid_argument& e) {
      sched["admissible"] = false;
      sched["reason"] = e.what();
      passed = false;
    }
    out["schedule"] = sched;
  }

  out["passed"] = passed;
  emit(out);
  return passed ? 0 : 2;
}

int cmd_chung(double P, double Q, double p, double q, double a1, long T, double stride,
              const std::string& out_dir) {
  ChungResult res = chung_recursion(P, Q, p, q, a1, T, stride);
  double rel_err = res.limit != 0.0 ? std::abs(res.final_scaled - res.limit) / std::abs(res.limit)
                                    : std::abs(res.final_scaled);
  json out = {{"P", P},         {"Q", Q},
              {"p", p},         {"q", q},
              {"a1", a1},       {"T", T},
              {"limit", res.limit}, {"final_scaled", res.final_scaled},
              {"rel_err", rel_err}};
  emit(out);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "chung.csv");
    csv << "n,scaled\n";
    for (const auto& [n, v] : res.scaled) csv << n << ',' << detail::fmt_double(v) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror-descent learning in concave games: equilibria, experiments, checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset;
  long seeds = 0;
  int threads = 0;

  auto* solve = app.add_subcommand("solve", "Compute the Nash equilibrium of a game");
  solve->add_option("--config", config_path, "Game or experiment JSON file")->required();
  solve->add_option("--out", out_dir, "Directory for equilibrium.json");

  auto* run = app.add_subcommand("run", "Run a multi-seed learning experiment");
  run->add_option("--config", config_path, "Experiment JSON file")->required();
  run->add_option("--out", out_dir, "Directory for traces/, aggregate.csv, summary.json");
  run->add_option("--seeds", seeds, "Override: use seeds 1..N");
  run->add_option("--threads", threads, "Override: worker thread count");
  run->add_option("--preset", preset, "Override: schedule preset (bandit-rate | oracle-rate)");

  auto* check = app.add_subcommand("check", "Verify invariants for a configured game");
  int samples = 200, trials = 10000;
  check->add_option("--config", config_path, "Game or experiment JSON file")->required();
  check->add_option("--samples", samples, "Monotonicity certificate sample count");
  check->add_option("--trials", trials, "Divergence property trial count");

  auto* chung = app.add_subcommand("chung", "Iterate the scalar comparison recursion");
  double P = 1.0, Q = 1.0, pexp = 1.0, qexp = 1.0 / 3.0, a1 = 1.0, stride = 1.2;
  long T = 1000000;
  chung->add_option("--P", P, "Decay coefficient");
  chung->add_option("--Q", Q, "Forcing coefficient");
  chung->add_option("--p", pexp, "Step exponent");
  chung->add_option("--q", qexp, "Forcing exponent");
  chung->add_option("--a1", a1, "Initial value");
  chung->add_option("--T", T, "Iterations");
  chung->add_option("--stride", stride, "Geometric logging stride");
  chung->add_option("--out", out_dir, "Directory for chung.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(config_path, out_dir);
    if (*run) return cmd_run(config_path, out_dir, seeds, threads, preset);
    if (*check) return cmd_check(config_path, samples, trials);
    if (*chung) return cmd_chung(P, Q, pexp, qexp, a1, T, stride, out_dir);
  } catch (const std::exception& e) {
    json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
