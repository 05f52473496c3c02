#include "cconv/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cconv/errors.hpp"

namespace cconv {

Region Region::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw Error(ErrorKind::InvalidArgument, "box bounds must have equal, positive dimension");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(hi[i] > lo[i])) throw Error(ErrorKind::InvalidArgument, "box must have non-empty interior");
  }
  Region r;
  r.shape_ = Shape::Box;
  r.center_ = 0.5 * (lo + hi);
  r.lo_ = std::move(lo);
  r.hi_ = std::move(hi);
  return r;
}

Region Region::ball(Vec center, double radius) {
  if (!(radius > 0.0) || center.size() == 0) {
    throw Error(ErrorKind::InvalidArgument, "ball must have positive radius");
  }
  Region r;
  r.shape_ = Shape::Ball;
  r.lo_ = center.array() - radius;
  r.hi_ = center.array() + radius;
  r.center_ = std::move(center);
  r.radius_ = radius;
  return r;
}

bool Region::contains(const Vec& x, double tol) const { return depth(x) >= -tol; }

double Region::depth(const Vec& x) const {
  if (shape_ == Shape::Ball) return radius_ - (x - center_).norm();
  bool inside = true;
  double inner = std::numeric_limits<double>::infinity();
  double outer_sq = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double below = lo_[i] - x[i];
    const double above = x[i] - hi_[i];
    if (below > 0.0 || above > 0.0) {
      inside = false;
      const double d = std::max(below, above);
      outer_sq += d * d;
    } else {
      inner = std::min({inner, -below, -above});
    }
  }
  return inside ? inner : -std::sqrt(outer_sq);
}

Vec Region::project(const Vec& x) const {
  if (shape_ == Shape::Ball) {
    const Vec d = x - center_;
    const double n = d.norm();
    return n <= radius_ ? x : Vec(center_ + d * (radius_ / n));
  }
  return x.cwiseMax(lo_).cwiseMin(hi_);
}

double Region::diameter() const {
  return shape_ == Shape::Ball ? 2.0 * radius_ : (hi_ - lo_).norm();
}

Region Region::inflated(double margin) const {
  if (shape_ == Shape::Ball) return ball(center_, radius_ + margin);
  return box(lo_.array() - margin, hi_.array() + margin);
}

double Region::distance_to(const Region& other) const {
  if (shape_ == Shape::Box && other.shape_ == Shape::Box) {
    double sq = 0.0;
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
      const double gap = std::max({0.0, other.lo_[i] - hi_[i], lo_[i] - other.hi_[i]});
      sq += gap * gap;
    }
    return std::sqrt(sq);
  }
  if (shape_ == Shape::Ball && other.shape_ == Shape::Ball) {
    return std::max(0.0, (center_ - other.center_).norm() - radius_ - other.radius_);
  }
  const Region& ball_r = shape_ == Shape::Ball ? *this : other;
  const Region& box_r = shape_ == Shape::Ball ? other : *this;
  return std::max(0.0, -box_r.depth(ball_r.center_) - ball_r.radius_);
}

std::string Region::describe() const {
  std::ostringstream os;
  if (shape_ == Shape::Ball) {
    os << "ball(center=" << center_.transpose() << ", radius=" << radius_ << ")";
  } else {
    os << "box(lo=" << lo_.transpose() << ", hi=" << hi_.transpose() << ")";
  }
  return os.str();
}

DomainPair::DomainPair(Region x, Region y) : X(std::move(x)), Y(std::move(y)) {
  if (X.dim() != Y.dim()) throw Error(ErrorKind::InvalidArgument, "X and Y dimensions differ");
  separation_ = X.distance_to(Y);
}

double DomainPair::diameter() const { return std::hypot(X.diameter(), Y.diameter()); }

}  // namespace cconv
