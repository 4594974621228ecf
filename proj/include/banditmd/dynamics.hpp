#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "banditmd/bregman.hpp"
#include "banditmd/feedback.hpp"
#include "banditmd/game.hpp"
#include "banditmd/rng.hpp"

namespace banditmd {

// Step sizes gamma_n = gamma / n^p and query radii delta_n = delta0 / n^q,
// n starting at 1.
//
// Admissibility for almost-sure convergence under payoff-only feedback needs
// p + q > 1 (summable gamma_n^2 / delta_n^2) and p - q > 1/2 (the
// bias-times-step series stays summable). The n^{-1/3} rate regime pins
// p = 1, q = 1/3 and additionally gamma > 1/(3 beta); the noisy-gradient
// O(1/n) regime pins p = 1 with gamma * beta > 1.
struct Schedule {
  double gamma = 1.0;
  double p = 1.0;
  double delta0 = 0.1;
  double q = 1.0 / 3.0;

  double gamma_at(long n) const { return gamma / std::pow(static_cast<double>(n), p); }
  double delta_at(long n) const { return delta0 / std::pow(static_cast<double>(n), q); }

  enum class Mode { exact, oracle_rate, bandit_asymptotic, bandit_rate };

  void validate(Mode mode, std::optional<double> beta = std::nullopt) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("schedule: need gamma > 0");
    if (!(p > 0.0) || !(p <= 1.0)) throw std::invalid_argument("schedule: need 0 < p <= 1");
    if (mode == Mode::exact) return;
    if (mode == Mode::oracle_rate) {
      if (p != 1.0) throw std::invalid_argument("schedule: O(1/n) oracle regime needs p = 1");
      if (beta && !(gamma * (*beta) > 1.0))
        throw std::invalid_argument("schedule: O(1/n) oracle regime needs gamma * beta > 1");
      return;
    }
    if (!(delta0 > 0.0)) throw std::invalid_argument("schedule: need delta0 > 0");
    if (!(q > 0.0) || !(q <= 1.0)) throw std::invalid_argument("schedule: need 0 < q <= 1");
    if (!(p + q > 1.0) || !(p - q > 0.5))
      throw std::invalid_argument("schedule: bandit feedback needs p + q > 1 and p - q > 1/2");
    if (mode == Mode::bandit_rate) {
      if (p != 1.0 || std::abs(q - 1.0 / 3.0) > 1e-12)
        throw std::invalid_argument("schedule: n^{-1/3} regime needs p = 1 and q = 1/3");
      if (beta && !(gamma > 1.0 / (3.0 * (*beta))))
        throw std::invalid_argument("schedule: n^{-1/3} regime needs gamma > 1/(3 beta)");
    }
  }
};

struct TracePoint {
  long n = 0;
  Vec pivot;
  Vec realized;
  double sq_dist_pivot = std::numeric_limits<double>::quiet_NaN();
  double sq_dist_realized = std::numeric_limits<double>::quiet_NaN();
  double bregman = std::numeric_limits<double>::quiet_NaN();
  double gamma = 0.0;
  double delta = 0.0;
};

struct RunTrace {
  std::vector<TracePoint> points;
  long horizon = 0;
  std::uint64_t seed = 0;
  double delta0_used = 0.0;
  bool delta0_adjusted = false;
  // Tracked against the reference point when one is supplied.
  double min_dist_realized = std::numeric_limits<double>::infinity();
  long min_dist_n = 0;
  long first_hit_n = 0;  // 0: threshold never reached (or not tracked)
  double hit_threshold = 0.0;
};

struct RunOptions {
  double log_stride = 1.2;          // geometric spacing of recorded iterations
  std::optional<Vec> x0;            // default: stacked base points
  std::optional<Vec> x_ref;         // reference point for distance metrics
  double hit_threshold = 0.0;       // > 0: record first n with ||query - ref|| < threshold
};

namespace detail {

inline Vec default_start(const Game& game) {
  Vec x(static_cast<std::size_t>(game.layout().total));
  for (int i = 0; i < game.players(); ++i) {
    const Vec& p = game.set(i).base_point();
    auto dst = game.layout().block(std::span<double>(x), i);
    std::copy(p.begin(), p.end(), dst.begin());
  }
  return x;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double t = a[k] - b[k];
    d2 += t * t;
  }
  return d2;
}

inline long next_logged(long n, double stride) {
  long nxt = static_cast<long>(std::ceil(static_cast<double>(n) * stride));
  return std::max(nxt, n + 1);
}

struct TraceRecorder {
  RunTrace& trace;
  const Game& game;
  const Regularizer& reg;
  const RunOptions& opts;
  long horizon;
  long next_log = 1;

  TraceRecorder(RunTrace& t, const Game& g, const Regularizer& r, const RunOptions& o, long T)
      : trace(t), game(g), reg(r), opts(o), horizon(T) {
    if (!(o.log_stride > 1.0)) throw std::invalid_argument("run: need log_stride > 1");
    trace.horizon = T;
    trace.hit_threshold = o.hit_threshold;
  }

  void observe(long n, std::span<const double> pivot, std::span<const double> realized,
               double gamma_n, double delta_n) {
    if (opts.x_ref) {
      double d2 = sq_dist(realized, *opts.x_ref);
      double d = std::sqrt(d2);
      if (d < trace.min_dist_realized) {
        trace.min_dist_realized = d;
        trace.min_dist_n = n;
      }
      if (opts.hit_threshold > 0.0 && trace.first_hit_n == 0 && d < opts.hit_threshold)
        trace.first_hit_n = n;
    }
    if (n != next_log && n != horizon) return;
    if (n == next_log) next_log = next_logged(n, opts.log_stride);
    TracePoint pt;
    pt.n = n;
    pt.pivot.assign(pivot.begin(), pivot.end());
    pt.realized.assign(realized.begin(), realized.end());
    pt.gamma = gamma_n;
    pt.delta = delta_n;
    if (opts.x_ref) {
      pt.sq_dist_pivot = sq_dist(pivot, *opts.x_ref);
      pt.sq_dist_realized = sq_dist(realized, *opts.x_ref);
      pt.bregman = reg.bregman(*opts.x_ref, pivot, game.lambda());
    }
    trace.points.push_back(std::move(pt));
  }
};

}  // namespace detail

// One mirror-descent step: x closed against the scaled dual update.
inline Vec step_md(const Regularizer& reg, std::span<const double> x, std::span<const double> v,
                   double gamma) {
  Vec y(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) y[k] = gamma * v[k];
  return reg.prox(x, y);
}

// Mirror descent driven by the (possibly noisy) first-order oracle.
inline RunTrace run_oracle(const Game& game, const Regularizer& reg, const Schedule& sched, long T,
                           const NoiseModel& noise, std::uint64_t seed, const RunOptions& opts = {},
                           Schedule::Mode mode = Schedule::Mode::exact) {
  sched.validate(mode, game.beta());
  if (T < 1) throw std::invalid_argument("run: need horizon >= 1");
  RunTrace trace;
  trace.seed = seed;
  trace.delta0_used = sched.delta0;
  detail::TraceRecorder rec(trace, game, reg, opts, T);

  Vec x = opts.x0 ? *opts.x0 : detail::default_start(game);
  game.check_feasible(x);
  RngBundle rng(seed, game.players());
  Vec v(static_cast<std::size_t>(game.layout().total));
  Vec scaled(v.size());
  for (long n = 1; n <= T; ++n) {
    double gamma_n = sched.gamma_at(n);
    game.check_feasible(x);
    for (int i = 0; i < game.players(); ++i)
      game.gradient_unchecked(i, x, game.layout().block(std::span<double>(v), i));
    if (noise.kind == NoiseKind::gaussian && noise.sigma > 0.0)
      for (auto& c : v) c += noise.sigma * rng.noise.next_gaussian();
    rec.observe(n, x, x, gamma_n, 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) scaled[k] = gamma_n * v[k];
    x = reg.prox(x, scaled);
  }
  return trace;
}

// Mirror descent driven by single-point payoff feedback. delta0 is clamped to
// 0.9 * min safety radius when the requested value is too large; the trace
// records both the adjustment flag and the value actually used.
inline RunTrace run_bandit(const Game& game, const Regularizer& reg, const Schedule& sched, long T,
                           std::uint64_t seed, const RunOptions& opts = {},
                           Schedule::Mode mode = Schedule::Mode::bandit_asymptotic) {
  sched.validate(mode, game.beta());
  if (T < 1) throw std::invalid_argument("run: need horizon >= 1");

  double r_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < game.players(); ++i) r_min = std::min(r_min, game.set(i).safety_radius());
  Schedule s = sched;
  RunTrace trace;
  trace.seed = seed;
  if (!(s.delta0 < r_min)) {
    s.delta0 = 0.9 * r_min;
    trace.delta0_adjusted = true;
  }
  trace.delta0_used = s.delta0;
  detail::TraceRecorder rec(trace, game, reg, opts, T);

  Vec x = opts.x0 ? *opts.x0 : detail::default_start(game);
  game.check_feasible(x);
  RngBundle rng(seed, game.players());
  FeedbackEvent ev;
  Vec scaled(static_cast<std::size_t>(game.layout().total));
  for (long n = 1; n <= T; ++n) {
    double gamma_n = s.gamma_at(n);
    double delta_n = s.delta_at(n);
    spsa_estimate_into(game, x, delta_n, rng, ev);
    rec.observe(n, x, ev.query, gamma_n, delta_n);
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = gamma_n * ev.estimate[k];
    x = reg.prox(x, scaled);
  }
  return trace;
}

// Scalar recursion a_{n+1} = a_n (1 - P/n^p) + Q/n^{p+q}, iterated as an
// equality (the extremal case of the comparison lemma). The scaled sequence
// n^q a_n converges to Q/(P - q) when p = 1 and to Q/P when p < 1.
struct ChungResult {
  std::vector<std::pair<long, double>> scaled;  // (n, n^q a_n) at geometric strides
  double final_scaled = 0.0;
  double limit = 0.0;
};

inline ChungResult chung_recursion(double P, double Q, double p, double q, double a1, long T,
                                   double log_stride = 1.2) {
  if (!(P > 0.0) || !(Q >= 0.0)) throw std::invalid_argument("chung: need P > 0 and Q >= 0");
  if (!(p > 0.0) || !(p <= 1.0) || !(q > 0.0)) throw std::invalid_argument("chung: need 0 < p <= 1 and q > 0");
  if (p == 1.0 && !(P > q)) throw std::invalid_argument("chung: p = 1 needs P > q");
  if (T < 1) throw std::invalid_argument("chung: need T >= 1");
  ChungResult res;
  res.limit = (p == 1.0) ? Q / (P - q) : Q / P;
  double a = a1;
  long next_log = 1;
  for (long n = 1; n <= T; ++n) {
    double scaled = std::pow(static_cast<double>(n), q) * a;
    if (n == next_log || n == T) {
      if (n == next_log) next_log = detail::next_logged(n, log_stride);
      res.scaled.emplace_back(n, scaled);
      res.final_scaled = scaled;
    }
    double np = std::pow(static_cast<double>(n), p);
    a = a * (1.0 - P / np) + Q / (np * std::pow(static_cast<double>(n), q));
  }
  return res;
}

}  // namespace banditmd
