#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "banditmd/game.hpp"
#include "banditmd/rng.hpp"

namespace banditmd {

enum class NoiseKind { none, gaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  double sigma = 0.0;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("noise: need sigma >= 0");
    return {NoiseKind::gaussian, sigma};
  }
};

// First-order oracle: exact individual gradients plus optional i.i.d.
// Gaussian noise per coordinate.
inline Vec oracle_estimate(const Game& game, std::span<const double> x, const NoiseModel& noise,
                           SplitMix64& rng) {
  Vec v = game.gradient(x);
  if (noise.kind == NoiseKind::gaussian && noise.sigma > 0.0)
    for (auto& c : v) c += noise.sigma * rng.next_gaussian();
  return v;
}

// Uniform direction on the unit sphere of the set's tangent space. For the
// simplex the Gaussian vector is first projected onto the zero-sum subspace,
// so the query stays inside the affine hull.
inline void sample_direction(const ActionSet& set, SplitMix64& rng, std::span<double> out) {
  double n2 = 0.0;
  do {
    for (auto& v : out) v = rng.next_gaussian();
    set.project_tangent(out);
    n2 = 0.0;
    for (double v : out) n2 += v * v;
  } while (n2 < 1e-24);
  double n = std::sqrt(n2);
  for (auto& v : out) v /= n;
}

inline Vec sample_direction(const ActionSet& set, SplitMix64& rng) {
  Vec z(static_cast<std::size_t>(set.dim()));
  sample_direction(set, rng, z);
  return z;
}

// One round of payoff-only feedback. pivot is the internal state x_n; query
// is the action actually played; estimate is the gradient surrogate fed to
// the update.
struct FeedbackEvent {
  Vec pivot;
  Vec adjusted_pivot;  // x_i - (delta/r_i)(x_i - p_i): where the estimator is centered
  Vec direction;       // z, per-player unit tangent directions, stacked
  Vec displacement;    // w = z - (x - p)/r
  Vec query;           // x + delta w, feasible by construction
  Vec payoffs;         // u_i(query)
  Vec estimate;        // v_hat, stacked
  double delta = 0.0;
  std::optional<Vec> bias;        // instrumented runs: E[v_hat] - v(pivot)
  std::optional<Vec> noise_part;  // instrumented runs: v_hat - E[v_hat]
};

namespace detail {

inline void spsa_finalize(const Game& game, std::span<const double> x, double delta,
                          FeedbackEvent& ev) {
  const auto& L = game.layout();
  ev.delta = delta;
  ev.pivot.assign(x.begin(), x.end());
  ev.adjusted_pivot.resize(static_cast<std::size_t>(L.total));
  ev.displacement.resize(static_cast<std::size_t>(L.total));
  ev.query.resize(static_cast<std::size_t>(L.total));
  ev.estimate.resize(static_cast<std::size_t>(L.total));
  ev.payoffs.resize(static_cast<std::size_t>(game.players()));
  ev.bias.reset();
  ev.noise_part.reset();

  for (int i = 0; i < game.players(); ++i) {
    const ActionSet& set = game.set(i);
    double r = set.safety_radius();
    if (!(delta > 0.0) || !(delta < r))
      throw std::invalid_argument("spsa: need 0 < delta < safety radius of every player");
    const Vec& p = set.base_point();
    auto xi = L.block(x, i);
    auto zi = L.block(std::span<const double>(ev.direction), i);
    auto wi = L.block(std::span<double>(ev.displacement), i);
    auto qi = L.block(std::span<double>(ev.query), i);
    auto ai = L.block(std::span<double>(ev.adjusted_pivot), i);
    for (std::size_t k = 0; k < xi.size(); ++k) {
      double pull = (xi[k] - p[k]) / r;
      wi[k] = zi[k] - pull;
      qi[k] = xi[k] + delta * wi[k];
      ai[k] = xi[k] - delta * pull;
    }
  }

  game.check_feasible(ev.query);
  for (int i = 0; i < game.players(); ++i)
    ev.payoffs[static_cast<std::size_t>(i)] = game.payoff_unchecked(i, ev.query);

  for (int i = 0; i < game.players(); ++i) {
    double scale = static_cast<double>(game.set(i).effective_dim()) / delta *
                   ev.payoffs[static_cast<std::size_t>(i)];
    auto zi = L.block(std::span<const double>(ev.direction), i);
    auto vi = L.block(std::span<double>(ev.estimate), i);
    for (std::size_t k = 0; k < zi.size(); ++k) vi[k] = scale * zi[k];
  }
}

}  // namespace detail

// Deterministic core, reusing the event's buffers across calls: hot loops run
// allocation-free once capacities settle.
inline void spsa_estimate_into(const Game& game, std::span<const double> x, double delta,
                               RngBundle& rng, FeedbackEvent& ev) {
  const auto& L = game.layout();
  game.check_feasible(x);
  ev.direction.resize(static_cast<std::size_t>(L.total));
  for (int i = 0; i < game.players(); ++i)
    sample_direction(game.set(i), rng.players[static_cast<std::size_t>(i)],
                     L.block(std::span<double>(ev.direction), i));
  detail::spsa_finalize(game, x, delta, ev);
}

inline FeedbackEvent spsa_estimate(const Game& game, std::span<const double> x, double delta,
                                   RngBundle& rng) {
  FeedbackEvent ev;
  spsa_estimate_into(game, x, delta, rng, ev);
  return ev;
}

// Same estimator with a caller-supplied direction profile; the unit tests use
// it to enumerate directions exactly.
inline FeedbackEvent spsa_from_direction(const Game& game, std::span<const double> x, double delta,
                                         std::span<const double> z) {
  game.check_feasible(x);
  FeedbackEvent ev;
  ev.direction.assign(z.begin(), z.end());
  detail::spsa_finalize(game, x, delta, ev);
  return ev;
}

struct SmoothedReference {
  Vec mean;     // Monte Carlo estimate of E[v_hat] at the fixed pivot
  Vec std_err;  // per-coordinate standard error of that mean
  long samples = 0;
};

// Brute-force E[v_hat]: repeated single-point estimates at a fixed pivot.
// Converges to the gradient of the delta-smoothed payoffs at the adjusted
// pivot, which is what the bias diagnostics compare against.
inline SmoothedReference smoothed_gradient_reference(const Game& game, std::span<const double> x,
                                                     double delta, long mc_samples,
                                                     std::uint64_t seed = 99991) {
  if (mc_samples < 2) throw std::invalid_argument("smoothed reference: need at least 2 samples");
  const int total = game.layout().total;
  RngBundle rng(seed, game.players());
  FeedbackEvent ev;
  Vec mean(static_cast<std::size_t>(total), 0.0);
  Vec m2(static_cast<std::size_t>(total), 0.0);
  for (long s = 1; s <= mc_samples; ++s) {
    spsa_estimate_into(game, x, delta, rng, ev);
    for (int k = 0; k < total; ++k) {
      double d = ev.estimate[static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)];
      mean[static_cast<std::size_t>(k)] += d / static_cast<double>(s);
      m2[static_cast<std::size_t>(k)] += d * (ev.estimate[static_cast<std::size_t>(k)] - mean[static_cast<std::size_t>(k)]);
    }
  }
  SmoothedReference ref;
  ref.samples = mc_samples;
  ref.mean = std::move(mean);
  ref.std_err.resize(static_cast<std::size_t>(total));
  for (int k = 0; k < total; ++k)
    ref.std_err[static_cast<std::size_t>(k)] =
        std::sqrt(m2[static_cast<std::size_t>(k)] / (static_cast<double>(mc_samples) - 1.0) /
                  static_cast<double>(mc_samples));
  return ref;
}

// Estimator plus bias/noise split for instrumented runs. Costs mc_samples
// extra payoff sweeps, so it never belongs in a training loop.
inline FeedbackEvent spsa_estimate_instrumented(const Game& game, std::span<const double> x,
                                                double delta, RngBundle& rng, long mc_samples,
                                                std::uint64_t ref_seed = 99991) {
  FeedbackEvent ev = spsa_estimate(game, x, delta, rng);
  SmoothedReference ref = smoothed_gradient_reference(game, x, delta, mc_samples, ref_seed);
  Vec v = game.gradient(x);
  Vec bias(v.size()), noise(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    bias[k] = ref.mean[k] - v[k];
    noise[k] = ev.estimate[k] - ref.mean[k];
  }
  ev.bias = std::move(bias);
  ev.noise_part = std::move(noise);
  return ev;
}

}  // namespace banditmd
