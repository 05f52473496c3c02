#pragma once

#include <string>

#include "cconv/linalg.hpp"

namespace cconv {

/// Compact box or closed ball in R^n. Membership, boundary distance and
/// Euclidean projection are exact for both shapes.
class Region {
 public:
  enum class Shape { Box, Ball };

  static Region box(Vec lo, Vec hi);
  static Region ball(Vec center, double radius);

  Shape shape() const { return shape_; }
  int dim() const { return static_cast<int>(lo_.size()); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }

  bool contains(const Vec& x, double tol = 0.0) const;
  /// Signed distance to the boundary: positive inside, negative outside.
  double depth(const Vec& x) const;
  Vec project(const Vec& x) const;
  double diameter() const;
  /// Same shape grown (or shrunk, for negative margin) by `margin`.
  Region inflated(double margin) const;
  /// Smallest distance between two regions (0 when they intersect).
  double distance_to(const Region& other) const;

  std::string describe() const;

 private:
  Shape shape_ = Shape::Box;
  Vec lo_, hi_;  // bounding box for both shapes
  Vec center_;
  double radius_ = 0.0;
};

struct DomainPair {
  Region X;
  Region Y;

  DomainPair(Region x, Region y);
  int dim() const { return X.dim(); }
  double separation() const { return separation_; }
  double diameter() const;  // diameter of X x Y

 private:
  double separation_ = 0.0;
};

}  // namespace cconv
