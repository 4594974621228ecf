#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "banditmd/game.hpp"
#include "banditmd/rng.hpp"

namespace banditmd {

// ---------------------------------------------------------------------------
// Cournot oligopoly. Firm i produces x_i in [0, cap_i], price is a - b * S
// with S the total supply, unit cost c_i:
//   u_i(x) = x_i (a - b S) - c_i x_i.
// The individual gradient field is affine with modulus b, so the game is
// strongly monotone with beta = b.
// ---------------------------------------------------------------------------

struct CournotParams {
  double a = 2.0;
  double b = 1.0;
  Vec c;
  Vec caps;  // empty: every cap defaults to a/b
};

// Unconstrained first-order solution of the Cournot system; valid as the
// equilibrium whenever it lands inside the caps.
inline Vec cournot_closed_form(const CournotParams& p) {
  int n = static_cast<int>(p.c.size());
  double total = (n * p.a - std::accumulate(p.c.begin(), p.c.end(), 0.0)) / (p.b * (n + 1));
  Vec x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = (p.a - p.c[static_cast<std::size_t>(i)]) / p.b - total;
  return x;
}

inline Game make_cournot(const CournotParams& p) {
  int n = static_cast<int>(p.c.size());
  if (n < 1) throw std::invalid_argument("cournot: need at least one firm");
  if (!(p.a > 0.0) || !(p.b > 0.0)) throw std::invalid_argument("cournot: need a > 0 and b > 0");
  for (double ci : p.c)
    if (!(ci >= 0.0) || !(ci < p.a)) throw std::invalid_argument("cournot: need 0 <= c_i < a");
  Vec caps = p.caps;
  if (caps.empty()) caps.assign(static_cast<std::size_t>(n), p.a / p.b);
  if (static_cast<int>(caps.size()) != n) throw std::invalid_argument("cournot: caps size mismatch");

  std::vector<ActionSet> sets;
  sets.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sets.push_back(ActionSet::make_box({0.0}, {caps[static_cast<std::size_t>(i)]}));

  auto prm = std::make_shared<const CournotParams>(CournotParams{p.a, p.b, p.c, caps});
  auto payoff = [prm](int i, std::span<const double> x) {
    double total = std::accumulate(x.begin(), x.end(), 0.0);
    return x[static_cast<std::size_t>(i)] * (prm->a - prm->b * total - prm->c[static_cast<std::size_t>(i)]);
  };
  auto gradient = [prm](int i, std::span<const double> x, std::span<double> out) {
    double total = std::accumulate(x.begin(), x.end(), 0.0);
    out[0] = prm->a - prm->b * total - prm->b * x[static_cast<std::size_t>(i)] - prm->c[static_cast<std::size_t>(i)];
  };

  Game g("cournot", std::move(sets), payoff, gradient);
  g.set_second_deriv([prm](int i, int j, std::span<const double>, std::span<double> out) {
    out[0] = -prm->b * (i == j ? 2.0 : 1.0);
  });
  g.set_beta(p.b);
  Vec xstar = cournot_closed_form(*prm);
  bool interior = true;
  for (int i = 0; i < n; ++i)
    interior = interior && xstar[static_cast<std::size_t>(i)] > 0.0 && xstar[static_cast<std::size_t>(i)] < caps[static_cast<std::size_t>(i)];
  if (interior) g.set_equilibrium(std::move(xstar));
  return g;
}

// ---------------------------------------------------------------------------
// Kelly-style resource auction. Player i bids x_ir on resource r and receives
// a share proportional to its bid:
//   u_i(x) = sum_r [ g_i q_r x_ir / (c_r + sum_j x_jr) - x_ir ].
// One resource gives a box [0, budget_i]; several resources give a simplex
// where the whole budget is allocated across resources. With weights
// lambda_i = 1/g_i the weighted Hessian test certifies monotonicity.
// ---------------------------------------------------------------------------

struct AuctionParams {
  Vec g;       // marginal valuation per player
  Vec q;       // resource capacities
  Vec c;       // price-softening constants, one per resource, > 0
  Vec budget;  // empty: every budget defaults to 1
};

inline Game make_auction(const AuctionParams& p) {
  int n = static_cast<int>(p.g.size());
  int m = static_cast<int>(p.q.size());
  if (n < 1 || m < 1) throw std::invalid_argument("auction: need players and resources");
  if (static_cast<int>(p.c.size()) != m) throw std::invalid_argument("auction: c size mismatch");
  for (double v : p.g)
    if (!(v > 0.0)) throw std::invalid_argument("auction: need g_i > 0");
  for (double v : p.q)
    if (!(v > 0.0)) throw std::invalid_argument("auction: need q_r > 0");
  for (double v : p.c)
    if (!(v > 0.0)) throw std::invalid_argument("auction: need c_r > 0");
  Vec budget = p.budget;
  if (budget.empty()) budget.assign(static_cast<std::size_t>(n), 1.0);
  if (static_cast<int>(budget.size()) != n) throw std::invalid_argument("auction: budget size mismatch");

  std::vector<ActionSet> sets;
  sets.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (m == 1)
      sets.push_back(ActionSet::make_box({0.0}, {budget[static_cast<std::size_t>(i)]}));
    else
      sets.push_back(ActionSet::make_simplex(m, budget[static_cast<std::size_t>(i)]));
  }

  struct Inner {
    Vec g, q, c;
    int n, m;
  };
  auto prm = std::make_shared<const Inner>(Inner{p.g, p.q, p.c, n, m});

  auto depth = [prm](std::span<const double> x, int r) {
    double s = prm->c[static_cast<std::size_t>(r)];
    for (int j = 0; j < prm->n; ++j) s += x[static_cast<std::size_t>(j * prm->m + r)];
    return s;
  };
  auto payoff = [prm, depth](int i, std::span<const double> x) {
    double u = 0.0;
    for (int r = 0; r < prm->m; ++r) {
      double xir = x[static_cast<std::size_t>(i * prm->m + r)];
      u += prm->g[static_cast<std::size_t>(i)] * prm->q[static_cast<std::size_t>(r)] * xir / depth(x, r) - xir;
    }
    return u;
  };
  auto gradient = [prm, depth](int i, std::span<const double> x, std::span<double> out) {
    for (int r = 0; r < prm->m; ++r) {
      double d = depth(x, r);
      double xir = x[static_cast<std::size_t>(i * prm->m + r)];
      out[static_cast<std::size_t>(r)] =
          prm->g[static_cast<std::size_t>(i)] * prm->q[static_cast<std::size_t>(r)] * (d - xir) / (d * d) - 1.0;
    }
  };

  Game g("auction", std::move(sets), payoff, gradient);
  g.set_second_deriv([prm, depth](int i, int j, std::span<const double> x, std::span<double> out) {
    // Resources do not interact, so the block is diagonal in r.
    std::fill(out.begin(), out.end(), 0.0);
    for (int r = 0; r < prm->m; ++r) {
      double d = depth(x, r);
      double xir = x[static_cast<std::size_t>(i * prm->m + r)];
      double own = (i == j) ? 1.0 : 0.0;
      double val = prm->g[static_cast<std::size_t>(i)] * prm->q[static_cast<std::size_t>(r)] *
                   ((1.0 - own) * d - 2.0 * (d - xir)) / (d * d * d);
      out[static_cast<std::size_t>(r * prm->m + r)] = val;
    }
  });
  Vec lam(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) lam[static_cast<std::size_t>(i)] = 1.0 / p.g[static_cast<std::size_t>(i)];
  g.set_lambda(std::move(lam));
  return g;
}

// ---------------------------------------------------------------------------
// Synthetic strongly monotone quadratic game with a planted equilibrium:
//   v(x) = (-beta I + A)(x - x*),  A block-skew (A_ji = -A_ij^T, zero
// diagonal blocks), so x* is the unique equilibrium and
// <v(x') - v(x), x' - x> = -beta ||x' - x||^2 exactly.
// Payoffs integrate the field:
//   u_i(x) = offset - (beta/2) ||x_i - x*_i||^2
//            + (x_i - x*_i)^T sum_{j>i} A_ij (x_j - x*_j)   [signs via skewness]
// The offset shifts payoff magnitude without touching gradients; bandit
// feedback variance scales with it, which is exactly what it is for.
// ---------------------------------------------------------------------------

struct QuadraticParams {
  std::vector<int> dims;  // per-player dimensions
  double beta = 1.0;
  double coupling = 0.0;         // scale of the skew interaction blocks
  double offset = 0.0;           // payoff level at the equilibrium
  Vec lo, hi;                    // full-profile box bounds; empty: [0, 1]
  Vec xstar;                     // empty: box center
  std::uint64_t coupling_seed = 12345;
};

inline Game make_quadratic(const QuadraticParams& p) {
  int n = static_cast<int>(p.dims.size());
  if (n < 1) throw std::invalid_argument("quadratic: need at least one player");
  if (!(p.beta > 0.0)) throw std::invalid_argument("quadratic: need beta > 0");
  int total = std::accumulate(p.dims.begin(), p.dims.end(), 0);
  Vec lo = p.lo.empty() ? Vec(static_cast<std::size_t>(total), 0.0) : p.lo;
  Vec hi = p.hi.empty() ? Vec(static_cast<std::size_t>(total), 1.0) : p.hi;
  if (static_cast<int>(lo.size()) != total || static_cast<int>(hi.size()) != total)
    throw std::invalid_argument("quadratic: bounds size mismatch");
  Vec xstar = p.xstar;
  if (xstar.empty()) {
    xstar.resize(static_cast<std::size_t>(total));
    for (int k = 0; k < total; ++k)
      xstar[static_cast<std::size_t>(k)] = 0.5 * (lo[static_cast<std::size_t>(k)] + hi[static_cast<std::size_t>(k)]);
  }
  if (static_cast<int>(xstar.size()) != total) throw std::invalid_argument("quadratic: xstar size mismatch");
  for (int k = 0; k < total; ++k)
    if (!(lo[static_cast<std::size_t>(k)] < xstar[static_cast<std::size_t>(k)] &&
          xstar[static_cast<std::size_t>(k)] < hi[static_cast<std::size_t>(k)]))
      throw std::invalid_argument("quadratic: xstar must be strictly interior");

  struct Inner {
    std::vector<int> dims, offsets;
    int n, total;
    double beta, offset;
    Vec xstar;
    // A_ij for i < j, row-major d_i x d_j; the mirrored block is -A_ij^T.
    std::vector<std::vector<Vec>> upper;
    std::span<const double> block(std::span<const double> x, int i) const {
      return x.subspan(static_cast<std::size_t>(offsets[static_cast<std::size_t>(i)]),
                       static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]));
    }
  };
  auto inner = std::make_shared<Inner>();
  inner->dims = p.dims;
  inner->n = n;
  inner->total = total;
  inner->beta = p.beta;
  inner->offset = p.offset;
  inner->xstar = xstar;
  inner->offsets.resize(static_cast<std::size_t>(n));
  int off = 0;
  for (int i = 0; i < n; ++i) {
    inner->offsets[static_cast<std::size_t>(i)] = off;
    off += p.dims[static_cast<std::size_t>(i)];
  }
  inner->upper.assign(static_cast<std::size_t>(n), {});
  SplitMix64 gen(p.coupling_seed);
  for (int i = 0; i < n; ++i) {
    inner->upper[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(n), {});
    for (int j = i + 1; j < n; ++j) {
      SplitMix64 blk = gen.split(static_cast<std::uint64_t>(i) * 1000003ULL + static_cast<std::uint64_t>(j));
      Vec& A = inner->upper[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      A.resize(static_cast<std::size_t>(p.dims[static_cast<std::size_t>(i)]) *
               static_cast<std::size_t>(p.dims[static_cast<std::size_t>(j)]));
      for (auto& a : A) a = p.coupling * (2.0 * blk.next_double() - 1.0);
    }
  }

  // y_i = sum_{j != i} A_ij (x_j - x*_j) with A_ji = -A_ij^T.
  auto coupling_term = [inner](int i, std::span<const double> x, std::span<double> out) {
    int di = inner->dims[static_cast<std::size_t>(i)];
    std::fill(out.begin(), out.end(), 0.0);
    for (int j = 0; j < inner->n; ++j) {
      if (j == i) continue;
      int dj = inner->dims[static_cast<std::size_t>(j)];
      auto xj = inner->block(x, j);
      auto xsj = inner->block(inner->xstar, j);
      if (i < j) {
        const Vec& A = inner->upper[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        for (int r = 0; r < di; ++r)
          for (int c = 0; c < dj; ++c)
            out[static_cast<std::size_t>(r)] += A[static_cast<std::size_t>(r * dj + c)] * (xj[static_cast<std::size_t>(c)] - xsj[static_cast<std::size_t>(c)]);
      } else {
        const Vec& A = inner->upper[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];  // d_j x d_i
        for (int r = 0; r < di; ++r)
          for (int c = 0; c < dj; ++c)
            out[static_cast<std::size_t>(r)] -= A[static_cast<std::size_t>(c * di + r)] * (xj[static_cast<std::size_t>(c)] - xsj[static_cast<std::size_t>(c)]);
      }
    }
  };

  auto payoff = [inner, coupling_term](int i, std::span<const double> x) {
    int di = inner->dims[static_cast<std::size_t>(i)];
    auto xi = inner->block(x, i);
    auto xsi = inner->block(inner->xstar, i);
    Vec y(static_cast<std::size_t>(di));
    coupling_term(i, x, y);
    double u = inner->offset;
    for (int k = 0; k < di; ++k) {
      double d = xi[static_cast<std::size_t>(k)] - xsi[static_cast<std::size_t>(k)];
      u += -0.5 * inner->beta * d * d + d * y[static_cast<std::size_t>(k)];
    }
    return u;
  };
  auto gradient = [inner, coupling_term](int i, std::span<const double> x, std::span<double> out) {
    auto xi = inner->block(x, i);
    auto xsi = inner->block(inner->xstar, i);
    coupling_term(i, x, out);
    for (std::size_t k = 0; k < xi.size(); ++k) out[k] += -inner->beta * (xi[k] - xsi[k]);
  };

  std::vector<ActionSet> sets;
  sets.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int di = p.dims[static_cast<std::size_t>(i)];
    int oi = inner->offsets[static_cast<std::size_t>(i)];
    Vec l(lo.begin() + oi, lo.begin() + oi + di);
    Vec h(hi.begin() + oi, hi.begin() + oi + di);
    sets.push_back(ActionSet::make_box(std::move(l), std::move(h)));
  }

  Game g("quadratic", std::move(sets), payoff, gradient);
  g.set_second_deriv([inner](int i, int j, std::span<const double>, std::span<double> out) {
    int di = inner->dims[static_cast<std::size_t>(i)];
    int dj = inner->dims[static_cast<std::size_t>(j)];
    std::fill(out.begin(), out.end(), 0.0);
    if (i == j) {
      for (int k = 0; k < di; ++k) out[static_cast<std::size_t>(k * di + k)] = -inner->beta;
    } else if (i < j) {
      const Vec& A = inner->upper[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      std::copy(A.begin(), A.end(), out.begin());
    } else {
      const Vec& A = inner->upper[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];  // d_j x d_i
      for (int r = 0; r < di; ++r)
        for (int c = 0; c < dj; ++c) out[static_cast<std::size_t>(r * dj + c)] = -A[static_cast<std::size_t>(c * di + r)];
    }
  });
  g.set_beta(p.beta);
  g.set_equilibrium(std::move(xstar));
  return g;
}

}  // namespace banditmd
