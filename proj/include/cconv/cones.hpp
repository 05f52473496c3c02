#pragma once

#include <limits>

#include "cconv/constants.hpp"
#include "cconv/domain.hpp"

namespace cconv {

struct Cone {
  Vec apex;
  Vec axis;
  double opening = 0.0;  // radians, in [0, pi/2]
  double radius = std::numeric_limits<double>::infinity();

  bool contains(const Vec& v, double tol = 0.0) const;
};

/// v in K*(S): <v, p> >= 0 for every p in S.
bool dual_cone_contains(const Region& s, const Vec& v, double tol = 1e-12);

/// v in N(S; p) = -K*(S - p): <v, s - p> <= 0 for every s in S.
bool normal_cone_contains(const Region& s, const Vec& p, const Vec& v, double tol = 1e-12);

/// Largest rho on the geometric grid diam * ratio^-k with
/// 2 beta L^2 rho + beta^2 l1 omega(L rho) <= (l0 / alpha) cos(theta).
/// Throws NoFeasibleRadius when even the smallest grid value fails.
double cone_radius(const ConstantEstimates& k, double theta, double l0, double l1, double diam,
                   double grid_ratio = 1.0442737824274138 /* 2^(1/16) */, int grid_steps = 640);

/// rho_theta / (L alpha) with rho_theta the largest tabulated scale where
/// omega(rho_theta) <= cos(theta) / (4 alpha beta^2).
double mu_theta(const ConstantEstimates& k, double theta);

}  // namespace cconv
