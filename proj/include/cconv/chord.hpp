#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "cconv/convexity.hpp"
#include "cconv/cost.hpp"
#include "cconv/grid.hpp"
#include "cconv/support.hpp"

namespace cconv {

struct LiftedPoint {
  Vec x;
  double u = 0.0;
};

struct ChordOptions {
  std::optional<int> y_count;  // Y lattice nodes per axis
  SupportOptions support;
};

/// F(x) = sup over c-affine functions lying below both lifted endpoints,
/// evaluated as sup_y [min_i (c(x_i, y) + u_i) - c(x, y)].
class Chord {
 public:
  Chord(const CostModel& model, LiftedPoint x0, LiftedPoint x1, const ChordOptions& opt = {});
  /// Shares a prebuilt Y lattice (must outlive the chord).
  Chord(const CostModel& model, LiftedPoint x0, LiftedPoint x1, std::shared_ptr<const Lattice> ylat,
        const SupportOptions& sopt = {});

  double operator()(const Vec& x) const { return eval(x).value; }
  /// Value plus the maximizing c-affine (y, h).
  SupportSolver::Result eval(const Vec& x) const;
  const SupportSolver& solver() const { return *solver_; }
  const LiftedPoint& end0() const { return x0_; }
  const LiftedPoint& end1() const { return x1_; }

 private:
  const CostModel& model_;
  LiftedPoint x0_, x1_;
  std::shared_ptr<const Lattice> ylat_;
  std::unique_ptr<SupportSolver> solver_;
};

double chord_eval(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1, const Vec& x,
                  const ChordOptions& opt = {});

/// Chord sampled on a lattice over X.
GridFunction chord_surface(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1, const Lattice& xlat,
                           const ChordOptions& opt = {});

struct ConnectResult {
  double u0p = 0.0;
  double u1p = 0.0;
  std::optional<CAffine> touching;
  double residual = 0.0;  // max_i |-c(x_i, y) + h - u_i'|
};

/// Endpoint values of the chord and a c-affine through both lifted points.
/// Throws TouchingNotFound when no root of the endpoint equation is located.
ConnectResult connect(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1,
                      const ChordOptions& opt = {});

/// Touching c-affine through (x0, u0) and (x1, u1), or nullopt.
std::optional<CAffine> find_touching(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1,
                                     const Lattice& ylat, double residual_tol = 1e-6);

struct AltConvexityOptions {
  int pair_budget = 8;
  std::uint64_t seed = 0;
  std::optional<double> tolerance;  // default 1e-3 * lip_c * spacing
  std::optional<int> y_count;
  /// Pairs of lattice node indices checked before the random ones.
  std::vector<std::pair<int, int>> extra_pairs;
  SupportOptions support;
};

struct AltConvexityReport {
  bool holds = true;
  double worst_gap = 0.0;
  Vec x0, x1, x;
  long triples = 0;
  int pairs = 0;
  double tolerance = 0.0;
};

AltConvexityReport is_alternative_c_convex(const CostModel& model, const GridFunction& phi,
                                           const AltConvexityOptions& opt = {});

/// max over the t grid of |F(x_t) - (-c(x_t, y) + h)| along the c-segment
/// w.r.t. touching.y. Points whose segment solve fails are skipped.
double segment_identity_check(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1,
                              const CAffine& touching, int t_grid, const ChordOptions& opt = {});

}  // namespace cconv
