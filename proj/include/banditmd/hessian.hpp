#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "banditmd/game.hpp"
#include "banditmd/rng.hpp"

namespace banditmd {

// Dense symmetric matrix over the full profile dimension.
struct HessianMatrix {
  int n = 0;
  Vec a;  // row-major

  explicit HessianMatrix(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * n + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * n + c]; }

  double quad_form(std::span<const double> z) const {
    double q = 0.0;
    for (int r = 0; r < n; ++r) {
      double row = 0.0;
      for (int c = 0; c < n; ++c) row += at(r, c) * z[static_cast<std::size_t>(c)];
      q += z[static_cast<std::size_t>(r)] * row;
    }
    return q;
  }

  double max_asymmetry() const {
    double m = 0.0;
    for (int r = 0; r < n; ++r)
      for (int c = r + 1; c < n; ++c) m = std::max(m, std::abs(at(r, c) - at(c, r)));
    return m;
  }

  void matvec(std::span<const double> z, std::span<double> out) const {
    for (int r = 0; r < n; ++r) {
      double row = 0.0;
      for (int c = 0; c < n; ++c) row += at(r, c) * z[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = row;
    }
  }
};

// Weighted symmetrized Hessian of the game's gradient field:
// block (i, j) = (lambda_i/2) d_j d_i u_i + (lambda_j/2) (d_i d_j u_j)^T.
// Negative definiteness on tangent directions certifies strict diagonal
// concavity, which is the uniqueness and convergence workhorse.
inline HessianMatrix weighted_hessian(const Game& game, std::span<const double> x) {
  const auto& L = game.layout();
  HessianMatrix H(L.total);
  const auto& lam = game.lambda();
  for (int i = 0; i < game.players(); ++i) {
    int di = L.dims[static_cast<std::size_t>(i)];
    int oi = L.offsets[static_cast<std::size_t>(i)];
    for (int j = 0; j < game.players(); ++j) {
      int dj = L.dims[static_cast<std::size_t>(j)];
      int oj = L.offsets[static_cast<std::size_t>(j)];
      Vec bij(static_cast<std::size_t>(di) * dj);  // d_j d_i u_i
      Vec bji(static_cast<std::size_t>(dj) * di);  // d_i d_j u_j
      game.second_deriv_block(i, j, x, bij);
      game.second_deriv_block(j, i, x, bji);
      for (int r = 0; r < di; ++r)
        for (int c = 0; c < dj; ++c)
          H.at(oi + r, oj + c) = 0.5 * lam[static_cast<std::size_t>(i)] * bij[static_cast<std::size_t>(r * dj + c)] +
                                 0.5 * lam[static_cast<std::size_t>(j)] * bji[static_cast<std::size_t>(c * di + r)];
    }
  }
  return H;
}

struct MonotoneWitness {
  Vec x;
  Vec z;
  double quad_form = 0.0;
};

struct MonotoneReport {
  bool monotone = true;
  int samples = 0;
  double max_quad_form = -std::numeric_limits<double>::infinity();
  std::optional<MonotoneWitness> witness;
};

// Random tangent direction over the whole profile, unit Euclidean norm.
inline Vec random_tangent_direction(const Game& game, SplitMix64& rng) {
  const auto& L = game.layout();
  Vec z(static_cast<std::size_t>(L.total));
  double n2 = 0.0;
  while (n2 < 1e-12) {
    for (auto& v : z) v = rng.next_gaussian();
    for (int i = 0; i < game.players(); ++i)
      game.set(i).project_tangent(L.block(std::span<double>(z), i));
    n2 = 0.0;
    for (double v : z) n2 += v * v;
  }
  double n = std::sqrt(n2);
  for (auto& v : z) v /= n;
  return z;
}

// Sampled certificate: z^T H(x; lambda) z < 0 over random feasible profiles
// and random tangent directions. Evidence, not proof; a single violation is
// returned as a concrete witness.
inline MonotoneReport check_monotone(const Game& game, int samples, std::uint64_t seed = 2024) {
  SplitMix64 rng(seed);
  MonotoneReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    Vec x(static_cast<std::size_t>(game.layout().total));
    for (int i = 0; i < game.players(); ++i) {
      Vec xi = game.set(i).random_point(rng);
      auto dst = game.layout().block(std::span<double>(x), i);
      std::copy(xi.begin(), xi.end(), dst.begin());
    }
    Vec z = random_tangent_direction(game, rng);
    HessianMatrix H = weighted_hessian(game, x);
    double q = H.quad_form(z);
    rep.max_quad_form = std::max(rep.max_quad_form, q);
    if (q >= 0.0 && !rep.witness) {
      rep.monotone = false;
      rep.witness = MonotoneWitness{std::move(x), std::move(z), q};
    }
  }
  return rep;
}

}  // namespace banditmd
