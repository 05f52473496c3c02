#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "cconv/cost.hpp"

namespace cconv {

struct DualPair {
  Vec p;  // -D_y c(x, y)
  Vec q;  // -D_x c(x, y)
};

DualPair dual_coordinates(const CostModel& model, const Vec& x, const Vec& y);

/// Which variable the c-exponential is focused at. Focus y inverts
/// x -> -D_y c(x, y) (result in X); focus x inverts y -> -D_x c(x, y).
enum class Focus { X, Y };

struct NewtonOptions {
  int max_iters = 100;
  double residual_tol = 1e-11;  // relative to 1 + |target|
  double membership_tol = 1e-9; // relative to 1 + diam of the opposite domain
  double inflation = 0.25;      // iterates are projected onto the opposite domain grown by this fraction of its diameter
};

struct CExpResult {
  Vec point;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double outside = 0.0;  // distance outside the opposite domain (0 if inside)
};

/// Damped Newton solve without the membership verdict; never throws NoConvergence.
CExpResult c_exp_solve(const CostModel& model, const Vec& focus, Focus focus_kind, const Vec& target,
                       const std::optional<Vec>& initial_guess = std::nullopt, const NewtonOptions& opt = {});

/// Throws NoConvergence / TargetOutsideImage.
Vec c_exp(const CostModel& model, const Vec& focus, Focus focus_kind, const Vec& target,
          const std::optional<Vec>& initial_guess = std::nullopt, const NewtonOptions& opt = {});

/// cexp_y(t p1 + (1 - t) p0) for each t, with p_i = -D_y c(x_i, y).
std::vector<Vec> c_segment(const CostModel& model, const Vec& y, const Vec& x0, const Vec& x1,
                           const std::vector<double>& ts);

void write_segment_csv(std::ostream& os, const std::vector<double>& ts, const std::vector<Vec>& points);

struct DomainConvexityReport {
  bool holds = true;
  double worst_midpoint_violation = 0.0;
  int checks = 0;
  int nonconverged = 0;
};

/// Midpoint sampling in p-space ([X]_y) and q-space ([Y]_x).
DomainConvexityReport check_domain_c_convexity(const CostModel& model, int check_budget, std::uint64_t seed);

}  // namespace cconv
