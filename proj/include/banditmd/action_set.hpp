#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditmd/rng.hpp"

namespace banditmd {

using Vec = std::vector<double>;

inline constexpr double kFeasTol = 1e-10;

enum class SetKind { box, simplex, ball };

// One player's feasible action set. Every set carries a strictly interior
// base point p and a safety radius r such that the ball B(p, r), intersected
// with the affine hull for the simplex case, stays inside the set. Bandit
// queries are formed as convex combinations against that ball, which is what
// keeps them feasible for any query radius below r.
class ActionSet {
 public:
  static ActionSet make_box(Vec lo, Vec hi) {
    if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("box: bad bounds");
    for (std::size_t j = 0; j < lo.size(); ++j)
      if (!(lo[j] < hi[j])) throw std::invalid_argument("box: need lo < hi in every coordinate");
    ActionSet s;
    s.kind_ = SetKind::box;
    s.dim_ = static_cast<int>(lo.size());
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    s.base_point_.resize(s.lo_.size());
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.lo_.size(); ++j) {
      s.base_point_[j] = 0.5 * (s.lo_[j] + s.hi_[j]);
      slack = std::min(slack, 0.5 * (s.hi_[j] - s.lo_[j]));
    }
    s.safety_radius_ = slack;
    return s;
  }

  static ActionSet make_simplex(int dim, double mass = 1.0) {
    if (dim < 2) throw std::invalid_argument("simplex: need dim >= 2");
    if (!(mass > 0.0)) throw std::invalid_argument("simplex: need mass > 0");
    ActionSet s;
    s.kind_ = SetKind::simplex;
    s.dim_ = dim;
    s.mass_ = mass;
    s.base_point_.assign(static_cast<std::size_t>(dim), mass / dim);
    // Largest ball around the barycenter, inside the affine hull, that fits.
    s.safety_radius_ = mass / std::sqrt(static_cast<double>(dim) * (dim - 1));
    return s;
  }

  static ActionSet make_ball(Vec center, double radius) {
    if (center.empty()) throw std::invalid_argument("ball: empty center");
    if (!(radius > 0.0)) throw std::invalid_argument("ball: need radius > 0");
    ActionSet s;
    s.kind_ = SetKind::ball;
    s.dim_ = static_cast<int>(center.size());
    s.center_ = std::move(center);
    s.radius_ = radius;
    s.base_point_ = s.center_;
    s.safety_radius_ = radius;
    return s;
  }

  SetKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double mass() const { return mass_; }
  double radius() const { return radius_; }
  const Vec& lower() const { return lo_; }
  const Vec& upper() const { return hi_; }
  const Vec& base_point() const { return base_point_; }
  double safety_radius() const { return safety_radius_; }

  // Dimension of the sphere the query direction lives on: the simplex loses
  // one degree of freedom to the mass constraint.
  int effective_dim() const { return kind_ == SetKind::simplex ? dim_ - 1 : dim_; }

  void set_base_point(Vec p, double r) {
    if (static_cast<int>(p.size()) != dim_) throw std::invalid_argument("base point: wrong dimension");
    if (!(r > 0.0)) throw std::invalid_argument("base point: need safety radius > 0");
    double margin = boundary_distance(p);
    if (!(margin >= r)) throw std::invalid_argument("base point: ball of radius r does not fit in the set");
    base_point_ = std::move(p);
    safety_radius_ = r;
  }

  bool contains(std::span<const double> x, double tol = kFeasTol) const {
    if (static_cast<int>(x.size()) != dim_) return false;
    switch (kind_) {
      case SetKind::box:
        for (int j = 0; j < dim_; ++j)
          if (x[j] < lo_[j] - tol || x[j] > hi_[j] + tol) return false;
        return true;
      case SetKind::simplex: {
        double sum = 0.0;
        for (int j = 0; j < dim_; ++j) {
          if (x[j] < -tol) return false;
          sum += x[j];
        }
        return std::abs(sum - mass_) <= tol * std::max(1.0, mass_);
      }
      case SetKind::ball: {
        double d2 = 0.0;
        for (int j = 0; j < dim_; ++j) {
          double t = x[j] - center_[j];
          d2 += t * t;
        }
        return std::sqrt(d2) <= radius_ + tol;
      }
    }
    return false;
  }

  // Euclidean projection onto the set.
  void project(std::span<const double> x, std::span<double> out) const {
    switch (kind_) {
      case SetKind::box:
        for (int j = 0; j < dim_; ++j) out[j] = std::clamp(x[j], lo_[j], hi_[j]);
        return;
      case SetKind::simplex:
        project_simplex(x, out);
        return;
      case SetKind::ball: {
        double d2 = 0.0;
        for (int j = 0; j < dim_; ++j) {
          double t = x[j] - center_[j];
          d2 += t * t;
        }
        double d = std::sqrt(d2);
        if (d <= radius_) {
          std::copy(x.begin(), x.end(), out.begin());
        } else {
          double scale = radius_ / d;
          for (int j = 0; j < dim_; ++j) out[j] = center_[j] + scale * (x[j] - center_[j]);
        }
        return;
      }
    }
  }

  Vec project(std::span<const double> x) const {
    Vec out(static_cast<std::size_t>(dim_));
    project(x, out);
    return out;
  }

  double distance(std::span<const double> x) const {
    Vec p = project(x);
    double d2 = 0.0;
    for (int j = 0; j < dim_; ++j) {
      double t = x[j] - p[j];
      d2 += t * t;
    }
    return std::sqrt(d2);
  }

  // Orthogonal projection onto the tangent space of the affine hull
  // (subtracts the mean on the simplex, identity elsewhere).
  void project_tangent(std::span<double> z) const {
    if (kind_ != SetKind::simplex) return;
    double mean = std::accumulate(z.begin(), z.end(), 0.0) / dim_;
    for (auto& v : z) v -= mean;
  }

  // Uniform-ish sample used by monotonicity certificates and solver probes.
  Vec random_point(SplitMix64& rng) const {
    Vec x(static_cast<std::size_t>(dim_));
    switch (kind_) {
      case SetKind::box:
        for (int j = 0; j < dim_; ++j) x[j] = lo_[j] + (hi_[j] - lo_[j]) * rng.next_double();
        break;
      case SetKind::simplex: {
        double sum = 0.0;
        for (int j = 0; j < dim_; ++j) {
          x[j] = -std::log(rng.next_double_pos());
          sum += x[j];
        }
        for (int j = 0; j < dim_; ++j) x[j] *= mass_ / sum;
        break;
      }
      case SetKind::ball: {
        double n2 = 0.0;
        for (int j = 0; j < dim_; ++j) {
          x[j] = rng.next_gaussian();
          n2 += x[j] * x[j];
        }
        double n = std::sqrt(n2);
        double scale = n > 0.0 ? radius_ * std::pow(rng.next_double(), 1.0 / dim_) / n : 0.0;
        for (int j = 0; j < dim_; ++j) x[j] = center_[j] + scale * x[j];
        break;
      }
    }
    return x;
  }

  // Distance from an interior point to the set boundary (within the affine
  // hull for the simplex). Used to validate custom base points.
  double boundary_distance(std::span<const double> p) const {
    switch (kind_) {
      case SetKind::box: {
        double m = std::numeric_limits<double>::infinity();
        for (int j = 0; j < dim_; ++j) m = std::min({m, p[j] - lo_[j], hi_[j] - p[j]});
        return m;
      }
      case SetKind::simplex: {
        double sum = std::accumulate(p.begin(), p.end(), 0.0);
        if (std::abs(sum - mass_) > kFeasTol * std::max(1.0, mass_)) return -1.0;
        double pmin = *std::min_element(p.begin(), p.end());
        return pmin * std::sqrt(static_cast<double>(dim_) / (dim_ - 1));
      }
      case SetKind::ball: {
        double d2 = 0.0;
        for (int j = 0; j < dim_; ++j) {
          double t = p[j] - center_[j];
          d2 += t * t;
        }
        return radius_ - std::sqrt(d2);
      }
    }
    return -1.0;
  }

 private:
  void project_simplex(std::span<const double> x, std::span<double> out) const {
    // Sort-based projection: O(d log d) threshold search.
    Vec u(x.begin(), x.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0;
    double tau = 0.0;
    int active = 0;
    for (int k = 0; k < dim_; ++k) {
      css += u[k];
      double t = (css - mass_) / (k + 1);
      if (u[k] > t) {
        tau = t;
        active = k + 1;
      }
    }
    (void)active;
    for (int j = 0; j < dim_; ++j) out[j] = std::max(x[j] - tau, 0.0);
  }

  SetKind kind_ = SetKind::box;
  int dim_ = 0;
  Vec lo_, hi_;
  double mass_ = 1.0;
  Vec center_;
  double radius_ = 0.0;
  Vec base_point_;
  double safety_radius_ = 0.0;
};

}  // namespace banditmd
