#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditmd/dynamics.hpp"
#include "banditmd/game.hpp"
#include "banditmd/games.hpp"
#include "banditmd/hessian.hpp"

namespace banditmd {

struct EquilibriumSolution {
  Vec x;
  double residual = 0.0;  // max sampled <v_i(x*), x_i - x*_i>; <= 0 up to tolerance at a solution
  std::string method;
  long iterations = 0;
};

// First-order-condition residual: for each player, <v_i(x*), x_i - x*_i>
// over random feasible deviations x_i must stay non-positive.
inline double equilibrium_residual(const Game& game, std::span<const double> xstar, int samples,
                                   std::uint64_t seed = 7321) {
  SplitMix64 rng(seed);
  Vec v = game.gradient(xstar);
  const auto& L = game.layout();
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < game.players(); ++i) {
      Vec xi = game.set(i).random_point(rng);
      auto vi = L.block(std::span<const double>(v), i);
      auto si = L.block(xstar, i);
      double gap = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) gap += vi[k] * (xi[k] - si[k]);
      worst = std::max(worst, gap);
    }
  }
  return worst;
}

// Two-call projected extragradient iteration for monotone games. The step is
// 0.5 / L with L a sampled Lipschitz bound of the gradient field (the sampled
// maximum ratio, doubled for safety).
inline EquilibriumSolution solve_extragradient(const Game& game, double tol = 1e-8,
                                               long max_iter = 1000000, std::uint64_t seed = 4242) {
  MonotoneReport rep = check_monotone(game, 64, seed);
  if (!rep.monotone)
    throw std::runtime_error("extragradient: game failed the sampled monotonicity certificate");

  SplitMix64 rng(seed + 1);
  const auto& L = game.layout();
  auto random_profile = [&]() {
    Vec x(static_cast<std::size_t>(L.total));
    for (int i = 0; i < game.players(); ++i) {
      Vec xi = game.set(i).random_point(rng);
      auto dst = L.block(std::span<double>(x), i);
      std::copy(xi.begin(), xi.end(), dst.begin());
    }
    return x;
  };

  double lip = 0.0;
  for (int s = 0; s < 64; ++s) {
    Vec x = random_profile();
    Vec y = random_profile();
    Vec vx = game.gradient(x);
    Vec vy = game.gradient(y);
    double dv = 0.0, dx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double a = vx[k] - vy[k];
      double b = x[k] - y[k];
      dv += a * a;
      dx += b * b;
    }
    if (dx > 1e-20) lip = std::max(lip, std::sqrt(dv / dx));
  }
  if (lip <= 0.0) lip = 1.0;
  double tau = 0.5 / (2.0 * lip);

  auto project_step = [&](const Vec& x, const Vec& v, Vec& out) {
    Vec t(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) t[k] = x[k] + tau * v[k];
    for (int i = 0; i < game.players(); ++i)
      game.set(i).project(L.block(std::span<const double>(t), i), L.block(std::span<double>(out), i));
  };

  Vec x = detail::default_start(game);
  Vec mid(x.size()), next(x.size());
  EquilibriumSolution sol;
  sol.method = "extragradient";
  for (long it = 1; it <= max_iter; ++it) {
    Vec vx = game.gradient(x);
    project_step(x, vx, mid);
    Vec vm = game.gradient(mid);
    project_step(x, vm, next);
    double step2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double d = next[k] - x[k];
      step2 += d * d;
    }
    x = next;
    if (std::sqrt(step2) < tol) {
      sol.iterations = it;
      sol.x = std::move(x);
      sol.residual = equilibrium_residual(game, sol.x, 1000, seed + 2);
      return sol;
    }
  }
  throw std::runtime_error("extragradient: no convergence within max_iter");
}

// Cournot equilibrium: closed form when the unconstrained solution respects
// the caps, otherwise the extragradient solver on the capped game.
inline EquilibriumSolution cournot_equilibrium(const CournotParams& p) {
  CournotParams filled = p;
  if (filled.caps.empty()) filled.caps.assign(p.c.size(), p.a / p.b);
  Vec x = cournot_closed_form(filled);
  bool interior = true;
  for (std::size_t i = 0; i < x.size(); ++i)
    interior = interior && x[i] > 0.0 && x[i] < filled.caps[i];
  Game game = make_cournot(filled);
  if (interior) {
    EquilibriumSolution sol;
    sol.x = std::move(x);
    sol.method = "closed-form";
    sol.residual = equilibrium_residual(game, sol.x, 1000);
    return sol;
  }
  return solve_extragradient(game, 1e-10);
}

// Recompute distance and divergence metrics of a recorded trace against a
// reference point (weighted by the game's lambda).
inline void metrics(RunTrace& trace, std::span<const double> xstar, const Regularizer& reg,
                    std::span<const double> lambda = {}) {
  for (auto& pt : trace.points) {
    pt.sq_dist_pivot = detail::sq_dist(pt.pivot, xstar);
    pt.sq_dist_realized = detail::sq_dist(pt.realized, xstar);
    pt.bregman = reg.bregman(xstar, pt.pivot, lambda);
  }
}

}  // namespace banditmd
