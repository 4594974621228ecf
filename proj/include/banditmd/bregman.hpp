#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "banditmd/action_set.hpp"

namespace banditmd {

enum class RegKind { euclidean, entropic };

// Per-player distance-generating functions paired with the action sets they
// regularize. Euclidean h = ||x||^2/2 works on any set; entropic
// h = sum x log x is restricted to simplices, where the induced prox is the
// multiplicative-weights update. strong_convexity() returns the modulus K
// valid for the Euclidean norm (via Pinsker on the simplex).
class Regularizer {
 public:
  Regularizer(std::vector<ActionSet> sets, RegKind kind)
      : Regularizer(std::move(sets), std::vector<RegKind>{}) {
    kinds_.assign(sets_.size(), kind);
    validate();
  }

  Regularizer(std::vector<ActionSet> sets, std::vector<RegKind> kinds)
      : sets_(std::move(sets)), kinds_(std::move(kinds)) {
    if (!kinds_.empty()) validate();
  }

  int players() const { return static_cast<int>(sets_.size()); }
  RegKind kind(int i) const { return kinds_[static_cast<std::size_t>(i)]; }
  const ActionSet& set(int i) const { return sets_[static_cast<std::size_t>(i)]; }

  double strong_convexity() const {
    double k = std::numeric_limits<double>::infinity();
    for (int i = 0; i < players(); ++i) {
      double ki = kinds_[static_cast<std::size_t>(i)] == RegKind::euclidean
                      ? 1.0
                      : 1.0 / sets_[static_cast<std::size_t>(i)].mass();
      k = std::min(k, ki);
    }
    return k;
  }

  // D_i(p, x) = h_i(p) - h_i(x) - <grad h_i(x), p - x>, player block.
  double bregman(int i, std::span<const double> p, std::span<const double> x) const {
    if (kinds_[static_cast<std::size_t>(i)] == RegKind::euclidean) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        double t = p[k] - x[k];
        d2 += t * t;
      }
      return 0.5 * d2;
    }
    double d = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!(x[k] > 0.0)) throw std::domain_error("entropic bregman: x on the simplex boundary");
      if (p[k] < 0.0) throw std::domain_error("entropic bregman: p outside the simplex");
      if (p[k] > 0.0) d += p[k] * std::log(p[k] / x[k]);
      d += x[k] - p[k];
    }
    return d;
  }

  // Profile divergence, optionally weighted per player.
  double bregman(std::span<const double> p, std::span<const double> x,
                 std::span<const double> lambda = {}) const {
    double d = 0.0;
    std::size_t off = 0;
    for (int i = 0; i < players(); ++i) {
      std::size_t di = static_cast<std::size_t>(sets_[static_cast<std::size_t>(i)].dim());
      double w = lambda.empty() ? 1.0 : lambda[static_cast<std::size_t>(i)];
      d += w * bregman(i, p.subspan(off, di), x.subspan(off, di));
      off += di;
    }
    return d;
  }

  void grad(int i, std::span<const double> x, std::span<double> out) const {
    if (kinds_[static_cast<std::size_t>(i)] == RegKind::euclidean) {
      std::copy(x.begin(), x.end(), out.begin());
      return;
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!(x[k] > 0.0)) throw std::domain_error("entropic grad: x on the simplex boundary");
      out[k] = 1.0 + std::log(x[k]);
    }
  }

  // prox_x(y) = argmax_{x' in X} { <y, x'> - D(x', x) }.
  void prox(int i, std::span<const double> x, std::span<const double> y, std::span<double> out) const {
    if (kinds_[static_cast<std::size_t>(i)] == RegKind::euclidean) {
      Vec t(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) t[k] = x[k] + y[k];
      sets_[static_cast<std::size_t>(i)].project(t, out);
      return;
    }
    // Multiplicative weights with max-subtraction to avoid overflow.
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < y.size(); ++k) m = std::max(m, y[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!(x[k] > 0.0)) throw std::domain_error("entropic prox: x on the simplex boundary");
      out[k] = x[k] * std::exp(y[k] - m);
      sum += out[k];
    }
    double mass = sets_[static_cast<std::size_t>(i)].mass();
    for (std::size_t k = 0; k < x.size(); ++k) out[k] *= mass / sum;
  }

  Vec prox(std::span<const double> x, std::span<const double> y) const {
    Vec out(x.size());
    std::size_t off = 0;
    for (int i = 0; i < players(); ++i) {
      std::size_t di = static_cast<std::size_t>(sets_[static_cast<std::size_t>(i)].dim());
      prox(i, x.subspan(off, di), y.subspan(off, di), std::span<double>(out).subspan(off, di));
      off += di;
    }
    return out;
  }

  // Mirror map Q(y) = argmax_{x in X} { <y, x> - h(x) }; prox_x(y) equals
  // Q(grad h(x) + y), which the tests pin down numerically.
  void mirror(int i, std::span<const double> y, std::span<double> out) const {
    if (kinds_[static_cast<std::size_t>(i)] == RegKind::euclidean) {
      sets_[static_cast<std::size_t>(i)].project(y, out);
      return;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < y.size(); ++k) m = std::max(m, y[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      out[k] = std::exp(y[k] - m);
      sum += out[k];
    }
    double mass = sets_[static_cast<std::size_t>(i)].mass();
    for (std::size_t k = 0; k < y.size(); ++k) out[k] *= mass / sum;
  }

  Vec mirror(std::span<const double> y) const {
    Vec out(y.size());
    std::size_t off = 0;
    for (int i = 0; i < players(); ++i) {
      std::size_t di = static_cast<std::size_t>(sets_[static_cast<std::size_t>(i)].dim());
      mirror(i, y.subspan(off, di), std::span<double>(out).subspan(off, di));
      off += di;
    }
    return out;
  }

  Vec grad(std::span<const double> x) const {
    Vec out(x.size());
    std::size_t off = 0;
    for (int i = 0; i < players(); ++i) {
      std::size_t di = static_cast<std::size_t>(sets_[static_cast<std::size_t>(i)].dim());
      grad(i, x.subspan(off, di), std::span<double>(out).subspan(off, di));
      off += di;
    }
    return out;
  }

 private:
  void validate() const {
    if (kinds_.size() != sets_.size()) throw std::invalid_argument("regularizer: kinds size mismatch");
    for (std::size_t i = 0; i < sets_.size(); ++i)
      if (kinds_[i] == RegKind::entropic && sets_[i].kind() != SetKind::simplex)
        throw std::invalid_argument("regularizer: entropic kind requires a simplex action set");
  }

  std::vector<ActionSet> sets_;
  std::vector<RegKind> kinds_;
};

}  // namespace banditmd
