#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cconv/convexity.hpp"
#include "cconv/cost.hpp"
#include "cconv/grid.hpp"
#include "cconv/mtw.hpp"

namespace cconv {

/// A Loeper violation with the intermediate level h1p:
/// m(x_i) < -h1p < m(x_t0), m = -c(., y1) + c(., y0), x_t0 on the c-segment w.r.t. y0.
struct RawViolation {
  Vec x0, x1, y0, y1;
  double h1p = 0.0;
  double t0 = 0.0;
  Vec xt0;
  double margin_end0 = 0.0;  // -h1p - m(x0)
  double margin_end1 = 0.0;  // -h1p - m(x1)
  double margin_mid = 0.0;   // m(x_t0) + h1p
};

struct FindOptions {
  double interior_margin = 1e-3;  // fraction of the region diameter
  double violation_floor = 1e-9;
  int t_grid = 9;
};

/// Runs the Loeper search; throws NoViolationFound.
RawViolation find_violation(const CostModel& model, int budget, std::uint64_t seed, const FindOptions& opt = {});

/// Moves the certificate points inward by the interior margin, recomputes x_t0
/// and re-verifies the three inequalities; throws NoViolationFound on failure.
RawViolation violation_from_certificate(const CostModel& model, const ViolationCertificate& cert,
                                        const FindOptions& opt = {});

/// m along the p-segment: -c(x(p), y1) + c(x(p), y0) with x(p) = cexp_y0(p).
double level_profile(const CostModel& model, const Vec& y0, const Vec& y1, const Vec& p,
                     const std::optional<Vec>& guess = std::nullopt, Vec* x_out = nullptr);

struct StructuredViolation {
  Vec z0, z1, y0, y1;
  double h1 = 0.0;
  Vec w0, w1;  // -D_y c(z_i, y0)
  double theta = 0.0;
  double rho = 0.0;
  double tau = 0.0, sigma = 0.0;       // crossing parameters on the raw p-segment
  double level_residual[2] = {0, 0};   // |f0(z_i) - f1(z_i)|
  double direction_margin[2] = {0, 0}; // the two directional derivative inequalities
  int cone_samples = 0;
};

struct RefineOptions {
  int profile_points = 2001;
  int cone_radial = 16;
  int cone_angular = 17;
  int theta_steps = 40;  // candidate angles acos(7/8) * 2^(-k/2), k = 1..theta_steps
  int rho_steps = 8;     // candidate radii |xi| * (1 - k / 16), then |xi| / (2 cos theta)
  /// Level between max(m(x0), m(x1)) (0) and m(x_t0) (1); unset keeps -h1p.
  std::optional<double> level_fraction;
};

/// Level crossings around the violation, then the angle and cone radius.
/// Throws RefinementFailed naming the failing condition.
StructuredViolation refine_violation(const CostModel& model, const RawViolation& raw, const RefineOptions& opt = {});

/// Re-evaluates the three conditions by direct evaluation; returns the index
/// of the first failing one (0 when all hold).
int check_structured(const CostModel& model, const StructuredViolation& sv, const RefineOptions& opt = {});

struct CounterexampleParams {
  double r = 0.0;        // tilt radius (dual to p; to first order the y displacement)
  double delta = 0.0;    // cap radius (p-space)
  double epsilon = 0.0;  // cap lift (cost units)
  int cone_direction_count = 32;
  double theta_tilde = 0.0;               // pi/2 - theta/4
  std::optional<double> mu;               // small-tilt radius when the constant chain is feasible
  double epsilon_delta = 0.0;             // sampled inf of f1 - f0 over the double cone minus the balls
  double tilt_bound = 0.0;                // delta r cos(theta_tilde) / 2
  /// min of Phi + c(., y0) over X nodes outside B_delta(w0) and B_delta(w1);
  /// epsilon below it keeps the cap inactive on the ball boundary.
  double sampled_bound = 0.0;
};

/// Tilted c-affine points for V0 and V1 (directions at r and r/2).
std::vector<CAffine> tilt_family(const CostModel& model, const StructuredViolation& sv,
                                 const CounterexampleParams& params);

struct PhiEpsilon {
  GridFunction phi;
  std::vector<int> flat_nodes;           // nodes where the cap is active
  std::vector<int> interior_flat_nodes;  // inside nodes whose neighbors are all flat
};

/// Phi = sup of the tilted families and -c(., y1) + h1, capped by
/// -c(., y0) + epsilon inside B_delta(w1). Throws TiltOutOfDomain, CapEmpty.
PhiEpsilon build_phi_epsilon(const CostModel& model, const StructuredViolation& sv,
                             const CounterexampleParams& params, const Lattice& xlat);

/// Phi_eps at an arbitrary point of X (the lattice-free version of the above).
double phi_epsilon_at(const CostModel& model, const StructuredViolation& sv, const CounterexampleParams& params,
                      const Vec& x);

/// Starting parameters: delta = rho / 2, r from the room around y0, epsilon
/// half of the sampled bound.
CounterexampleParams initial_params(const CostModel& model, const StructuredViolation& sv, const Lattice& xlat);
/// Fills theta_tilde, mu, epsilon_delta, tilt_bound and sampled_bound for the
/// current r and delta.
void update_bounds(const CostModel& model, const StructuredViolation& sv, CounterexampleParams& params,
                   const Lattice& xlat);

struct VerifyOptions {
  std::optional<int> y_count;
  int subdiff_candidates = 5;
};

struct VerifyReport {
  bool alt_holds = false;
  double alt_worst_gap = 0.0;
  double alt_tolerance = 0.0;
  long alt_triples = 0;
  double c_convex_gap = 0.0;
  double envelope_tolerance = 0.0;
  std::optional<Vec> subdiff_empty_at;
  bool verdict = false;
};

/// alt_holds over at least `budget` chord triples, envelope gap, and an empty
/// c-subdifferential at a flat cap node. verdict = alt_holds && gap >= epsilon / 2.
VerifyReport verify_counterexample(const CostModel& model, const GridFunction& phi_eps,
                                   const StructuredViolation& sv, const CounterexampleParams& params, int budget,
                                   std::uint64_t seed, const std::vector<int>& cap_nodes = {},
                                   const VerifyOptions& opt = {});

struct SearchOptions {
  int loeper_budget = 10000;
  int triple_budget = 10000;
  int x_count = 64;
  int levels = 6;
  VerifyOptions verify;
  FindOptions find;
  RefineOptions refine;
};

struct SearchAttempt {
  CounterexampleParams params;
  std::string status;  // "ok", or the error that stopped the level
  VerifyReport report;
};

struct CounterexampleResult {
  RawViolation raw;
  StructuredViolation sv;
  std::vector<SearchAttempt> attempts;
  std::optional<int> success;  // index into attempts
  std::optional<GridFunction> phi;  // phi_eps of the successful level, else of the last built one
};

/// Halves delta, r and epsilon per level until verify_counterexample passes.
/// Throws NoViolationFound / RefinementFailed from the first two stages.
CounterexampleResult search_counterexample(const CostModel& model, std::uint64_t seed, const SearchOptions& opt = {});

}  // namespace cconv
