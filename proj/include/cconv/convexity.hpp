#pragma once

#include <optional>
#include <vector>

#include "cconv/cost.hpp"
#include "cconv/grid.hpp"
#include "cconv/support.hpp"

namespace cconv {

struct CAffine {
  Vec y;
  double h = 0.0;
};

double c_affine_eval(const CostModel& model, const CAffine& f, const Vec& x);

/// Sample a c-affine on a lattice over X.
GridFunction sample_c_affine(const CostModel& model, const CAffine& f, const Lattice& xlat);

/// phi(x) = sup_y -c(x, y) + psi(y) over the Y nodes, then one golden-section
/// pass per coordinate on the interpolated psi around the best node.
GridFunction c_transform(const CostModel& model, const GridFunction& psi, const Lattice& xlat, bool refine = true);

/// psi(y) = inf_x c(x, y) + phi(x) over the X nodes, refined the same way.
GridFunction reverse_transform(const CostModel& model, const GridFunction& phi, const Lattice& ylat,
                               bool refine = true);

/// Default tolerance for the envelope test: 1e-4 * lip_c * lattice spacing.
double default_c_convexity_tolerance(const CostModel& model, const Lattice& xlat);
/// Default alternative-convexity tolerance: 1e-3 * lip_c * lattice spacing.
double default_alt_tolerance(const CostModel& model, const Lattice& xlat);
/// Sampled lip_c with the default budget; cached per model instance.
double model_lip_c(const CostModel& model);

struct EnvelopeOptions {
  std::optional<int> y_count;        // Y lattice nodes per axis
  std::optional<double> tolerance;   // c-convexity tolerance
  int starts = 4;                    // lattice local maxima tried when a gap remains
  int propagation_sweeps = 4;        // neighbor maximizer sweeps after the per-node solves
  std::vector<Vec> extra_starts;     // y points tried at every node (and by c_subdifferential)
  SupportOptions support;
};

struct EnvelopeResult {
  GridFunction envelope;
  double max_gap = 0.0;
  int argmax_node = -1;
  bool is_c_convex = true;
  double tolerance = 0.0;
  std::vector<Vec> maximizers;  // best y per inside node (empty elsewhere)
};

/// c-convex envelope phi^cc at the X nodes. The inner transform is exact for
/// the sampled phi (min over all X nodes at any continuous y), the outer sup is
/// refined in y, so envelope <= phi holds at every node.
EnvelopeResult c_envelope(const CostModel& model, const GridFunction& phi, const EnvelopeOptions& opt = {});

struct SubdiffEntry {
  Vec y;
  double residual = 0.0;
};

/// c-subdifferential of the sampled phi at x0; entries have residual <= tolerance.
std::vector<SubdiffEntry> c_subdifferential(const CostModel& model, const GridFunction& phi, const Vec& x0,
                                            const EnvelopeOptions& opt = {});

struct SectionSample {
  std::vector<int> member_nodes;
  std::vector<int> boundary_nodes;
};

struct SectionReport {
  SectionSample section;
  bool is_c_convex_wrt = true;
  int interior_strictness_violations = 0;
  int equality_nodes = 0;
  int midpoint_checks = 0;
};

struct SectionOptions {
  double equality_tol = 1e-9;
  int midpoint_pairs = 400;
  std::uint64_t seed = 0;
};

/// Section {phi <= f} on the lattice of phi; c-convexity w.r.t. y_probe by
/// midpoint sampling in p-space.
SectionReport section_analysis(const CostModel& model, const GridFunction& phi, const CAffine& f,
                               const Vec& y_probe, const SectionOptions& opt = {});

}  // namespace cconv
