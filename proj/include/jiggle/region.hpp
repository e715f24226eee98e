#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "simplex_geometry.hpp"

namespace jiggle {

/// Subset of the ambient space used to cut subcomplexes and steer
/// subdivision. Balls, boxes, half-space intersections and the whole space
/// are convex and support exact containment; arbitrary predicates are
/// supported but force sampled queries downstream.
class Region {
public:
  enum class Kind { All, Ball, Box, Halfspaces, Predicate };

  static Region all() { return Region(Kind::All); }

  static Region ball(Vec center, double radius) {
    Region r(Kind::Ball);
    r.center_ = std::move(center);
    r.radius_ = radius;
    return r;
  }

  static Region box(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Region::box: dim mismatch");
    Region r(Kind::Box);
    r.lo_ = std::move(lo);
    r.hi_ = std::move(hi);
    return r;
  }

  /// Intersection of half-spaces a_i . x <= b_i (rows of A, entries of b).
  static Region halfspaces(Mat A, Vec b) {
    if (A.rows() != b.size()) throw std::invalid_argument("Region::halfspaces: row mismatch");
    Region r(Kind::Halfspaces);
    r.A_ = std::move(A);
    r.b_ = std::move(b);
    return r;
  }

  static Region predicate(std::function<bool(const Vec&)> fn) {
    Region r(Kind::Predicate);
    r.pred_ = std::move(fn);
    return r;
  }

  Kind kind() const { return kind_; }
  bool is_convex() const { return kind_ != Kind::Predicate; }

  bool contains(const Vec& x) const {
    switch (kind_) {
      case Kind::All: return true;
      case Kind::Ball: return (x - center_).norm() <= radius_;
      case Kind::Box:
        for (int i = 0; i < x.size(); ++i)
          if (x(i) < lo_(i) || x(i) > hi_(i)) return false;
        return true;
      case Kind::Halfspaces: return ((A_ * x - b_).array() <= 0.0).all();
      case Kind::Predicate: return pred_(x);
    }
    return false;
  }

  bool supports_distance() const {
    return kind_ == Kind::All || kind_ == Kind::Ball || kind_ == Kind::Box;
  }

  /// Euclidean distance to the set (0 inside). Balls, boxes and All only.
  double distance(const Vec& x) const {
    switch (kind_) {
      case Kind::All: return 0.0;
      case Kind::Ball: return std::max(0.0, (x - center_).norm() - radius_);
      case Kind::Box: {
        double d2 = 0.0;
        for (int i = 0; i < x.size(); ++i) {
          const double g = std::max({lo_(i) - x(i), x(i) - hi_(i), 0.0});
          d2 += g * g;
        }
        return std::sqrt(d2);
      }
      default: throw std::logic_error("Region::distance: unsupported kind");
    }
  }

  /// Nearest point of the region. Balls, boxes and All only.
  Vec project(const Vec& x) const {
    switch (kind_) {
      case Kind::All: return x;
      case Kind::Ball: {
        const Vec d = x - center_;
        const double n = d.norm();
        if (n <= radius_) return x;
        return center_ + (radius_ / n) * d;
      }
      case Kind::Box: {
        Vec y = x;
        for (int i = 0; i < y.size(); ++i) y(i) = std::min(std::max(y(i), lo_(i)), hi_(i));
        return y;
      }
      default: throw std::logic_error("Region::project: unsupported kind");
    }
  }

  const Vec& ball_center() const {
    if (kind_ != Kind::Ball) throw std::logic_error("Region::ball_center: not a ball");
    return center_;
  }
  double ball_radius() const {
    if (kind_ != Kind::Ball) throw std::logic_error("Region::ball_radius: not a ball");
    return radius_;
  }
  const Vec& box_lo() const {
    if (kind_ != Kind::Box) throw std::logic_error("Region::box_lo: not a box");
    return lo_;
  }
  const Vec& box_hi() const {
    if (kind_ != Kind::Box) throw std::logic_error("Region::box_hi: not a box");
    return hi_;
  }
  const Mat& halfspace_normals() const {
    if (kind_ != Kind::Halfspaces) throw std::logic_error("Region::halfspace_normals: wrong kind");
    return A_;
  }
  const Vec& halfspace_offsets() const {
    if (kind_ != Kind::Halfspaces) throw std::logic_error("Region::halfspace_offsets: wrong kind");
    return b_;
  }

  /// Closed delta-neighborhood; exact for balls, boxes and All.
  Region inflate(double delta) const {
    switch (kind_) {
      case Kind::All: return all();
      case Kind::Ball: return ball(center_, radius_ + delta);
      case Kind::Box: {
        Region base = *this;
        return predicate([base, delta](const Vec& x) { return base.distance(x) <= delta; });
      }
      default: throw std::logic_error("Region::inflate: unsupported kind");
    }
  }

  /// Neighborhood of a ball or box that is still queried exactly and stays
  /// convex (distance-based), preferred over inflate for box regions.
  static Region neighborhood(const Region& base, double delta) {
    if (!base.supports_distance())
      throw std::invalid_argument("Region::neighborhood: base must be ball, box or all");
    Region r(Kind::Predicate);
    r.pred_ = [base, delta](const Vec& x) { return base.distance(x) <= delta; };
    r.convex_override_ = true;
    return r;
  }

  bool convex_override() const { return convex_override_; }
  bool treat_as_convex() const { return is_convex() || convex_override_; }

private:
  explicit Region(Kind k) : kind_(k) {}

  Kind kind_;
  Vec center_, lo_, hi_, b_;
  Mat A_;
  double radius_ = 0.0;
  std::function<bool(const Vec&)> pred_;
  bool convex_override_ = false;
};

}  // namespace jiggle
