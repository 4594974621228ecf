#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "banditmd/action_set.hpp"

namespace banditmd {

class feasibility_error : public std::runtime_error {
 public:
  feasibility_error(int player, double distance)
      : std::runtime_error("infeasible action for player " + std::to_string(player) +
                           " (distance " + std::to_string(distance) + ")"),
        player_(player),
        distance_(distance) {}
  int player() const { return player_; }
  double distance() const { return distance_; }

 private:
  int player_;
  double distance_;
};

// Flat storage layout of a joint action profile: player i owns the slice
// [offset(i), offset(i) + dim(i)).
struct ProfileLayout {
  std::vector<int> dims;
  std::vector<int> offsets;
  int total = 0;

  explicit ProfileLayout(const std::vector<ActionSet>& sets) {
    dims.reserve(sets.size());
    offsets.reserve(sets.size());
    for (const auto& s : sets) {
      offsets.push_back(total);
      dims.push_back(s.dim());
      total += s.dim();
    }
  }

  std::span<const double> block(std::span<const double> x, int i) const {
    return x.subspan(static_cast<std::size_t>(offsets[i]), static_cast<std::size_t>(dims[i]));
  }
  std::span<double> block(std::span<double> x, int i) const {
    return x.subspan(static_cast<std::size_t>(offsets[i]), static_cast<std::size_t>(dims[i]));
  }
};

// A concave continuous game: per-player action sets, payoff functions and
// their own-action gradients. Evaluation is pure, so a single instance can be
// shared across worker threads.
class Game {
 public:
  using PayoffFn = std::function<double(int, std::span<const double>)>;
  using GradientFn = std::function<void(int, std::span<const double>, std::span<double>)>;
  // Block of second partials d²u_i / dx_j dx_i, row-major d_i x d_j.
  using SecondDerivFn = std::function<void(int, int, std::span<const double>, std::span<double>)>;

  Game(std::string name, std::vector<ActionSet> sets, PayoffFn payoff, GradientFn gradient)
      : name_(std::move(name)),
        sets_(std::move(sets)),
        layout_(sets_),
        payoff_(std::move(payoff)),
        gradient_(std::move(gradient)),
        lambda_(sets_.size(), 1.0) {
    if (sets_.empty()) throw std::invalid_argument("game: need at least one player");
  }

  const std::string& name() const { return name_; }
  int players() const { return static_cast<int>(sets_.size()); }
  const ActionSet& set(int i) const { return sets_[static_cast<std::size_t>(i)]; }
  const std::vector<ActionSet>& sets() const { return sets_; }
  const ProfileLayout& layout() const { return layout_; }

  const std::vector<double>& lambda() const { return lambda_; }
  void set_lambda(std::vector<double> lam) {
    if (lam.size() != sets_.size()) throw std::invalid_argument("lambda: wrong size");
    for (double l : lam)
      if (!(l > 0.0)) throw std::invalid_argument("lambda: weights must be positive");
    lambda_ = std::move(lam);
  }

  std::optional<double> beta() const { return beta_; }
  void set_beta(double b) { beta_ = b; }

  const std::optional<Vec>& equilibrium() const { return equilibrium_; }
  void set_equilibrium(Vec x) { equilibrium_ = std::move(x); }

  // Re-anchor one player's query ball; payoffs and gradients are unaffected.
  void set_base_point(int i, Vec p, double r) {
    sets_.at(static_cast<std::size_t>(i)).set_base_point(std::move(p), r);
  }

  void set_second_deriv(SecondDerivFn f) { second_ = std::move(f); }
  bool has_closed_form_second_deriv() const { return static_cast<bool>(second_); }

  void check_feasible(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != layout_.total)
      throw std::invalid_argument("profile: wrong total dimension");
    for (int i = 0; i < players(); ++i) {
      auto xi = layout_.block(x, i);
      if (!sets_[static_cast<std::size_t>(i)].contains(xi))
        throw feasibility_error(i, sets_[static_cast<std::size_t>(i)].distance(xi));
    }
  }

  double payoff(int i, std::span<const double> x) const {
    check_feasible(x);
    return payoff_(i, x);
  }

  Vec payoffs(std::span<const double> x) const {
    check_feasible(x);
    Vec u(static_cast<std::size_t>(players()));
    for (int i = 0; i < players(); ++i) u[static_cast<std::size_t>(i)] = payoff_(i, x);
    return u;
  }

  void gradient(int i, std::span<const double> x, std::span<double> out) const {
    check_feasible(x);
    gradient_(i, x, out);
  }

  // Stacked individual gradient field v(x) = (v_1(x), ..., v_N(x)).
  Vec gradient(std::span<const double> x) const {
    check_feasible(x);
    Vec v(static_cast<std::size_t>(layout_.total));
    for (int i = 0; i < players(); ++i) gradient_(i, x, layout_.block(std::span<double>(v), i));
    return v;
  }

  // Unchecked access: finite-difference probes may leave the set by the step
  // size, which is deliberate and harmless for the smooth payoffs used here.
  double payoff_unchecked(int i, std::span<const double> x) const { return payoff_(i, x); }
  void gradient_unchecked(int i, std::span<const double> x, std::span<double> out) const {
    gradient_(i, x, out);
  }

  // d²u_i/dx_j dx_i, closed form when registered, else a central difference
  // of the gradient with step 1e-5.
  void second_deriv_block(int i, int j, std::span<const double> x, std::span<double> out) const {
    int di = layout_.dims[static_cast<std::size_t>(i)];
    int dj = layout_.dims[static_cast<std::size_t>(j)];
    if (static_cast<int>(out.size()) != di * dj) throw std::invalid_argument("second deriv: bad output size");
    if (second_) {
      second_(i, j, x, out);
      return;
    }
    const double h = 1e-5;
    Vec xp(x.begin(), x.end()), xm(x.begin(), x.end());
    Vec gp(static_cast<std::size_t>(di)), gm(static_cast<std::size_t>(di));
    int off_j = layout_.offsets[static_cast<std::size_t>(j)];
    for (int l = 0; l < dj; ++l) {
      xp[static_cast<std::size_t>(off_j + l)] = x[static_cast<std::size_t>(off_j + l)] + h;
      xm[static_cast<std::size_t>(off_j + l)] = x[static_cast<std::size_t>(off_j + l)] - h;
      gradient_(i, xp, gp);
      gradient_(i, xm, gm);
      for (int k = 0; k < di; ++k)
        out[static_cast<std::size_t>(k * dj + l)] = (gp[static_cast<std::size_t>(k)] - gm[static_cast<std::size_t>(k)]) / (2.0 * h);
      xp[static_cast<std::size_t>(off_j + l)] = x[static_cast<std::size_t>(off_j + l)];
      xm[static_cast<std::size_t>(off_j + l)] = x[static_cast<std::size_t>(off_j + l)];
    }
  }

 private:
  std::string name_;
  std::vector<ActionSet> sets_;
  ProfileLayout layout_;
  PayoffFn payoff_;
  GradientFn gradient_;
  std::vector<double> lambda_;
  std::optional<double> beta_;
  std::optional<Vec> equilibrium_;
  SecondDerivFn second_;
};

// Weighted gap sum_i lambda_i <v_i(x), x_i - ref_i>. Negative at every x != x*
// with ref = x* certifies x* through the variational characterization.
inline double vi_gap(const Game& game, std::span<const double> x, std::span<const double> ref) {
  Vec v = game.gradient(x);
  const auto& L = game.layout();
  double gap = 0.0;
  for (int i = 0; i < game.players(); ++i) {
    auto vi = L.block(std::span<const double>(v), i);
    auto xi = L.block(x, i);
    auto ri = L.block(ref, i);
    double s = 0.0;
    for (std::size_t k = 0; k < vi.size(); ++k) s += vi[k] * (xi[k] - ri[k]);
    gap += game.lambda()[static_cast<std::size_t>(i)] * s;
  }
  return gap;
}

}  // namespace banditmd
