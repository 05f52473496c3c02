#include "cconv/cones.hpp"

#include <cmath>

#include "cconv/errors.hpp"

namespace cconv {

bool Cone::contains(const Vec& v, double tol) const {
  const Vec d = v - apex;
  const double dn = d.norm();
  if (dn > radius + tol) return false;
  if (dn == 0.0) return true;
  return d.dot(axis) >= std::cos(opening) * dn * axis.norm() - tol;
}

namespace {

// max over s in S of <v, s>
double support(const Region& s, const Vec& v) {
  if (s.shape() == Region::Shape::Ball) return v.dot(s.center()) + s.radius() * v.norm();
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) m += std::max(v[i] * s.lo()[i], v[i] * s.hi()[i]);
  return m;
}

}  // namespace

bool dual_cone_contains(const Region& s, const Vec& v, double tol) { return -support(s, -v) >= -tol; }

bool normal_cone_contains(const Region& s, const Vec& p, const Vec& v, double tol) {
  return support(s, v) <= v.dot(p) + tol;
}

double cone_radius(const ConstantEstimates& k, double theta, double l0, double l1, double diam, double grid_ratio,
                   int grid_steps) {
  if (!(theta > 0.0 && theta < M_PI / 2)) throw Error(ErrorKind::InvalidArgument, "theta must lie in (0, pi/2)");
  if (!(l0 > 0.0 && l0 <= l1)) throw Error(ErrorKind::InvalidArgument, "need 0 < l0 <= l1");
  const double rhs = l0 / k.alpha * std::cos(theta);
  double rho = diam;
  for (int step = 0; step <= grid_steps; ++step, rho /= grid_ratio) {
    const double lhs = 2.0 * k.beta * k.L * k.L * rho + k.beta * k.beta * l1 * k.omega_upper(k.L * rho);
    if (lhs <= rhs) return rho;
  }
  throw Error(ErrorKind::NoFeasibleRadius, "no grid radius satisfies the cone-in-section bound");
}

double mu_theta(const ConstantEstimates& k, double theta) {
  if (!(theta > 0.0 && theta < M_PI / 2)) throw Error(ErrorKind::InvalidArgument, "theta must lie in (0, pi/2)");
  const double bound = std::cos(theta) / (4.0 * k.alpha * k.beta * k.beta);
  double rho_theta = 0.0;
  for (const auto& [rho, w] : k.omega_table) {
    if (w <= bound) rho_theta = rho;
  }
  if (rho_theta == 0.0) throw Error(ErrorKind::NoFeasibleRadius, "no tabulated scale meets the small-tilt bound");
  return rho_theta / (k.L * k.alpha);
}

}  // namespace cconv
