#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cconv/cost.hpp"

namespace cconv {

/// MTW[eta, eta, xi, xi] = sum eta_i eta_j (c_ij,p c^pq c_q,st - c_ij,st) zeta_s zeta_t
/// with zeta = (D2xy c)^-1 xi.
double mtw_value(const CostModel& model, const Vec& x, const Vec& y, const Vec& eta, const Vec& xi);

enum class MtwVerdict { Nonneg, Violated, Inconclusive };
std::string to_string(MtwVerdict v);

struct MtwReport {
  double min_value = 0.0;  // at unit, orthogonal eta and xi
  Vec x, y, eta, xi;       // argmin (empty when samples = 0)
  int samples = 0;
  int skipped = 0;         // pairs rejected by the derivative bundle
  double tolerance = 0.0;
  MtwVerdict verdict = MtwVerdict::Nonneg;
};

struct CertifyOptions {
  /// Defaults to 1e-7 with analytic fourth derivatives, 1e-3 with FD.
  std::optional<double> tolerance;
  int refine_starts = 4;
};

MtwReport certify_mtw(const CostModel& model, int sample_budget, int refine_iters, std::uint64_t seed,
                      const CertifyOptions& opt = {});

struct ViolationCertificate {
  Vec x0, x1, y0, y1;
  double t = 0.0;
  double margin = 0.0;
};

/// -c(x_t, y1) + c(x_t, y0) - max_i(-c(x_i, y1) + c(x_i, y0)) with x_t on the
/// c-segment w.r.t. y0. Positive means Loeper's inequality fails.
double loeper_gap(const CostModel& model, const Vec& x0, const Vec& x1, const Vec& y0, const Vec& y1, double t);
double loeper_gap_at(const CostModel& model, const Vec& xt, const Vec& x0, const Vec& x1, const Vec& y0,
                     const Vec& y1);

struct LoeperReport {
  std::optional<ViolationCertificate> certificate;
  int evaluated = 0;
  int skipped_segments = 0;  // c-segment points that left X or failed to converge
  double best_gap = -INFINITY;
};

struct LoeperOptions {
  double violation_floor = 1e-9;  // relative to 1 + the largest |c| seen
  int refine_sweeps = 200;
};

LoeperReport check_loeper(const CostModel& model, int sample_budget, int t_grid_size, std::uint64_t seed,
                          const LoeperOptions& opt = {});

/// Recomputes the margin from scratch.
double revalidate(const CostModel& model, const ViolationCertificate& cert);

std::string certificate_csv_header(int n);
std::string certificate_csv_row(const ViolationCertificate& cert);

struct QQconvReport {
  bool unbounded = false;
  double C = 0.0;
  Vec x0, x1, y0, y;
  double t = 0.0;
  int tuples = 0;
};

QQconvReport estimate_qqconv(const CostModel& model, int sample_budget, std::uint64_t seed);

struct ChordProbeReport {
  double max_deviation = 0.0;
  Vec x0, x1, y;
  double h = 0.0;
  double t = 0.0;
  int tuples = 0;
};

/// Samples (x0, x1, y, h), lifts u_i = -c(x_i, y) + h and compares the chord
/// with the c-affine along the c-segment w.r.t. y.
ChordProbeReport chord_equivalence_probe(const CostModel& model, int sample_budget, std::uint64_t seed,
                                         int t_grid_size = 9);

}  // namespace cconv
