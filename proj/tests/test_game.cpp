#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "banditmd/game.hpp"
#include "banditmd/games.hpp"
#include "banditmd/hessian.hpp"

using namespace banditmd;
using Catch::Matchers::WithinAbs;

namespace {

Vec random_profile(const Game& g, SplitMix64& rng) {
  Vec x(static_cast<std::size_t>(g.layout().total));
  for (int i = 0; i < g.players(); ++i) {
    Vec xi = g.set(i).random_point(rng);
    auto dst = g.layout().block(std::span<double>(x), i);
    std::copy(xi.begin(), xi.end(), dst.begin());
  }
  return x;
}

// Central finite difference of u_i along own coordinates.
Vec fd_own_gradient(const Game& g, int i, const Vec& x, double h) {
  int di = g.layout().dims[static_cast<std::size_t>(i)];
  int oi = g.layout().offsets[static_cast<std::size_t>(i)];
  Vec grad(static_cast<std::size_t>(di));
  Vec xp = x, xm = x;
  for (int k = 0; k < di; ++k) {
    xp[static_cast<std::size_t>(oi + k)] += h;
    xm[static_cast<std::size_t>(oi + k)] -= h;
    grad[static_cast<std::size_t>(k)] =
        (g.payoff_unchecked(i, xp) - g.payoff_unchecked(i, xm)) / (2.0 * h);
    xp[static_cast<std::size_t>(oi + k)] = x[static_cast<std::size_t>(oi + k)];
    xm[static_cast<std::size_t>(oi + k)] = x[static_cast<std::size_t>(oi + k)];
  }
  return grad;
}

}  // namespace

TEST_CASE("cournot payoffs and gradient at the known equilibrium", "[game][cournot]") {
  Game g = make_cournot({2.0, 1.0, {1.0, 1.0}, {}});
  Vec x{1.0 / 3.0, 1.0 / 3.0};
  Vec u = g.payoffs(x);
  REQUIRE_THAT(u[0], WithinAbs(1.0 / 9.0, 1e-12));
  REQUIRE_THAT(u[1], WithinAbs(1.0 / 9.0, 1e-12));
  Vec v = g.gradient(x);
  REQUIRE_THAT(v[0], WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(v[1], WithinAbs(0.0, 1e-12));
  Vec at_zero = g.gradient(Vec{0.0, 0.0});
  REQUIRE_THAT(at_zero[0], WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(at_zero[1], WithinAbs(1.0, 1e-12));
  REQUIRE(g.beta().has_value());
  REQUIRE(*g.beta() == 1.0);
  REQUIRE(g.equilibrium().has_value());
  REQUIRE_THAT((*g.equilibrium())[0], WithinAbs(1.0 / 3.0, 1e-12));
}

TEST_CASE("cournot three-firm closed form", "[game][cournot]") {
  CournotParams p{2.0, 1.0, {0.8, 1.0, 1.2}, {}};
  Vec xs = cournot_closed_form(p);
  REQUIRE_THAT(xs[0], WithinAbs(0.45, 1e-12));
  REQUIRE_THAT(xs[1], WithinAbs(0.25, 1e-12));
  REQUIRE_THAT(xs[2], WithinAbs(0.05, 1e-12));
  Game g = make_cournot(p);
  Vec u = g.payoffs(xs);
  REQUIRE_THAT(u[0], WithinAbs(0.2025, 1e-12));
  REQUIRE_THAT(u[1], WithinAbs(0.0625, 1e-12));
  REQUIRE_THAT(u[2], WithinAbs(0.0025, 1e-12));
}

TEST_CASE("auction payoff and gradient, single resource", "[game][auction]") {
  Game g = make_auction({{2.0}, {1.0}, {1.0}, {}});
  REQUIRE_THAT(g.payoff(0, Vec{1.0}), WithinAbs(0.0, 1e-12));
  Vec v = g.gradient(Vec{1.0});
  REQUIRE_THAT(v[0], WithinAbs(2.0 * (2.0 - 1.0) / 4.0 - 1.0, 1e-12));
  REQUIRE(g.lambda()[0] == 0.5);
}

TEST_CASE("infeasible profiles are rejected with player and distance", "[game]") {
  Game g = make_cournot({2.0, 1.0, {1.0, 1.0}, {}});
  try {
    g.payoffs(Vec{0.5, 2.5});
    FAIL("expected feasibility_error");
  } catch (const feasibility_error& e) {
    REQUIRE(e.player() == 1);
    REQUIRE_THAT(e.distance(), WithinAbs(0.5, 1e-12));
  }
  REQUIRE_THROWS_AS(g.gradient(Vec{-0.1, 0.5}), feasibility_error);
  REQUIRE_THROWS_AS(g.payoffs(Vec{0.5}), std::invalid_argument);
}

TEST_CASE("closed-form gradients match finite differences", "[game][property]") {
  SplitMix64 rng(21);
  std::vector<Game> games;
  games.push_back(make_cournot({2.0, 1.0, {0.8, 1.0, 1.2}, {}}));
  games.push_back(make_auction({{1.0, 2.0, 3.0}, {1.0, 2.0}, {1.0, 0.5}, {}}));
  games.push_back(make_quadratic({{2, 2}, 1.0, 0.3, 0.5, {}, {}, {0.25, 0.75, 0.4, 0.6}, 7}));
  const double h = 1e-5;
  for (const auto& g : games) {
    for (int trial = 0; trial < 100; ++trial) {
      Vec x = random_profile(g, rng);
      // Keep a margin so the probe stays numerically well-behaved.
      Vec v = g.gradient(x);
      for (int i = 0; i < g.players(); ++i) {
        Vec fd = fd_own_gradient(g, i, x, h);
        auto vi = g.layout().block(std::span<const double>(v), i);
        for (std::size_t k = 0; k < fd.size(); ++k) {
          double scale = std::max(1.0, std::abs(vi[k]));
          REQUIRE_THAT(fd[k] / scale, WithinAbs(vi[k] / scale, 1e-5));
        }
      }
    }
  }
}

TEST_CASE("cournot weighted hessian is constant and exact", "[game][hessian]") {
  Game g = make_cournot({2.0, 1.0, {1.0, 1.0}, {}});
  HessianMatrix H = weighted_hessian(g, Vec{0.3, 0.4});
  REQUIRE(H.at(0, 0) == -2.0);
  REQUIRE(H.at(1, 1) == -2.0);
  REQUIRE(H.at(0, 1) == -1.0);
  REQUIRE(H.at(1, 0) == -1.0);
}

TEST_CASE("cournot three-firm hessian eigenstructure", "[game][hessian]") {
  Game g = make_cournot({4.0, 2.0, {1.0, 1.0, 1.0}, {}});
  HessianMatrix H = weighted_hessian(g, Vec{0.5, 0.5, 0.5});
  // H = -b (1 + delta_ij); eigenvector (1,1,1) with value -b(N+1) = -8,
  // any zero-sum vector with value -b = -2.
  Vec ones{1.0, 1.0, 1.0};
  Vec zs{1.0, -1.0, 0.0};
  Vec h1(3), h2(3);
  H.matvec(ones, h1);
  H.matvec(zs, h2);
  for (int k = 0; k < 3; ++k) {
    REQUIRE_THAT(h1[static_cast<std::size_t>(k)], WithinAbs(-8.0 * ones[static_cast<std::size_t>(k)], 1e-12));
    REQUIRE_THAT(h2[static_cast<std::size_t>(k)], WithinAbs(-2.0 * zs[static_cast<std::size_t>(k)], 1e-12));
  }
}

TEST_CASE("quadratic game weighted hessian collapses to -beta I", "[game][hessian]") {
  Game g = make_quadratic({{2, 2}, 1.5, 0.4, 0.0, {}, {}, {0.25, 0.75, 0.4, 0.6}, 7});
  SplitMix64 rng(5);
  Vec x = random_profile(g, rng);
  HessianMatrix H = weighted_hessian(g, x);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      REQUIRE_THAT(H.at(r, c), WithinAbs(r == c ? -1.5 : 0.0, 1e-12));
}

TEST_CASE("finite-difference second derivatives agree with closed forms", "[game][hessian][property]") {
  SplitMix64 rng(23);
  Game g = make_auction({{1.0, 2.0}, {1.0, 2.0}, {1.0, 0.5}, {}});
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = random_profile(g, rng);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Vec closed(4), fd(4);
        g.second_deriv_block(i, j, x, closed);
        // Strip the registered closed form to force the fallback.
        Game plain = make_auction({{1.0, 2.0}, {1.0, 2.0}, {1.0, 0.5}, {}});
        plain.set_second_deriv(nullptr);
        plain.second_deriv_block(i, j, x, fd);
        for (int k = 0; k < 4; ++k)
          REQUIRE_THAT(fd[static_cast<std::size_t>(k)], WithinAbs(closed[static_cast<std::size_t>(k)], 1e-6));
      }
  }
}

TEST_CASE("monotonicity certificates", "[game][monotone]") {
  Game cournot = make_cournot({2.0, 1.0, {0.8, 1.0, 1.2}, {}});
  MonotoneReport r1 = check_monotone(cournot, 1000);
  REQUIRE(r1.monotone);
  REQUIRE(r1.max_quad_form < 0.0);

  Game auction = make_auction({{1.0, 2.0, 3.0}, {1.0, 2.0}, {1.0, 0.5}, {}});
  MonotoneReport r2 = check_monotone(auction, 1000);
  REQUIRE(r2.monotone);

  // Anti-monotone field v(x) = +x: payoffs u_i = x_i^2 / 2.
  std::vector<ActionSet> sets;
  sets.push_back(ActionSet::make_box({0.0}, {1.0}));
  sets.push_back(ActionSet::make_box({0.0}, {1.0}));
  Game bad("convex", std::move(sets),
           [](int i, std::span<const double> x) { return 0.5 * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)]; },
           [](int i, std::span<const double> x, std::span<double> out) { out[0] = x[static_cast<std::size_t>(i)]; });
  MonotoneReport r3 = check_monotone(bad, 50);
  REQUIRE_FALSE(r3.monotone);
  REQUIRE(r3.witness.has_value());
  REQUIRE(r3.witness->quad_form >= 0.0);
}

TEST_CASE("auction payoffs satisfy the concavity sampling criterion", "[game][auction][property]") {
  Game g = make_auction({{1.0, 2.0, 3.0}, {1.0, 2.0}, {1.0, 0.5}, {}});
  SplitMix64 rng(31);
  // Own-payoff concavity along own-action segments, opponents fixed.
  for (int trial = 0; trial < 300; ++trial) {
    Vec x = random_profile(g, rng);
    int i = static_cast<int>(rng.next_u64() % 3);
    Vec yi = g.set(i).random_point(rng);
    Vec y = x;
    auto dst = g.layout().block(std::span<double>(y), i);
    std::copy(yi.begin(), yi.end(), dst.begin());
    Vec mid(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) mid[k] = 0.5 * (x[k] + y[k]);
    double lhs = g.payoff(i, mid);
    double rhs = 0.5 * (g.payoff(i, x) + g.payoff(i, y));
    REQUIRE(lhs >= rhs - 1e-10);
  }
  // Weighted sum concavity along joint segments.
  for (int trial = 0; trial < 300; ++trial) {
    Vec x = random_profile(g, rng);
    Vec y = random_profile(g, rng);
    Vec mid(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) mid[k] = 0.5 * (x[k] + y[k]);
    auto weighted = [&](const Vec& z) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += g.lambda()[static_cast<std::size_t>(i)] * g.payoff(i, z);
      return s;
    };
    REQUIRE(weighted(mid) >= 0.5 * (weighted(x) + weighted(y)) - 1e-10);
  }
}

TEST_CASE("vi gap values", "[game]") {
  Game g = make_cournot({2.0, 1.0, {1.0, 1.0}, {}});
  Vec xstar{1.0 / 3.0, 1.0 / 3.0};
  REQUIRE_THAT(vi_gap(g, xstar, xstar), WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(vi_gap(g, Vec{0.0, 0.0}, xstar), WithinAbs(-2.0 / 3.0, 1e-12));

  Game q = make_quadratic({{2, 2}, 2.0, 0.3, 0.0, {}, {}, {0.25, 0.75, 0.4, 0.6}, 7});
  SplitMix64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x = random_profile(q, rng);
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double t = x[k] - (*q.equilibrium())[k];
      d2 += t * t;
    }
    REQUIRE_THAT(vi_gap(q, x, *q.equilibrium()), WithinAbs(-2.0 * d2, 1e-9));
  }
}

TEST_CASE("vi gap is negative toward the equilibrium", "[game][property]") {
  Game g = make_cournot({2.0, 1.0, {0.8, 1.0, 1.2}, {}});
  const Vec& xstar = *g.equilibrium();
  SplitMix64 rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    Vec x = random_profile(g, rng);
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double t = x[k] - xstar[k];
      d2 += t * t;
    }
    if (d2 < 1e-12) continue;
    REQUIRE(vi_gap(g, x, xstar) < 0.0);
  }
}

TEST_CASE("quadratic game equals its defining field", "[game][quadratic]") {
  QuadraticParams p{{2, 2}, 1.0, 0.3, 0.25, {}, {}, {0.25, 0.75, 0.4, 0.6}, 7};
  Game g = make_quadratic(p);
  const Vec& xs = *g.equilibrium();
  Vec v = g.gradient(xs);
  for (double c : v) REQUIRE_THAT(c, WithinAbs(0.0, 1e-14));
  Vec u = g.payoffs(xs);
  for (double c : u) REQUIRE_THAT(c, WithinAbs(0.25, 1e-14));

  // <v(x) - v(y), x - y> = -beta ||x - y||^2 exactly: the coupling is skew.
  SplitMix64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x = random_profile(g, rng);
    Vec y = random_profile(g, rng);
    Vec vx = g.gradient(x), vy = g.gradient(y);
    double lhs = 0.0, d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      lhs += (vx[k] - vy[k]) * (x[k] - y[k]);
      d2 += (x[k] - y[k]) * (x[k] - y[k]);
    }
    REQUIRE_THAT(lhs, WithinAbs(-d2, 1e-10));
  }
}

TEST_CASE("factory validation", "[game]") {
  REQUIRE_THROWS_AS(make_cournot({2.0, 1.0, {}, {}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_cournot({2.0, 1.0, {2.5}, {}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_auction({{1.0}, {1.0}, {0.0}, {}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_quadratic({{2}, 1.0, 0.0, 0.0, {}, {}, {1.5, 0.5}, 7}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_quadratic({{2}, -1.0, 0.0, 0.0, {}, {}, {}, 7}), std::invalid_argument);
}
