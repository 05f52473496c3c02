#pragma once

#include <vector>

#include "cconv/cost.hpp"
#include "cconv/grid.hpp"

namespace cconv {

struct SupportOptions {
  double radius_cells = 2.0;  // step cap of the refinement, in Y lattice cells
  int stages = 6;             // smoothing levels, each 100x sharper
  int iters_per_stage = 200;
  bool refine = true;
};

/// sup over y in Y of  min_k (c(x_k, y) + v_k) - c(x, y).
///
/// The inner min is the largest height h for which the c-affine -c(., y) + h
/// stays below every lifted piece (x_k, v_k); the outer sup then picks the
/// best such c-affine at x. Chords use two pieces, envelopes one per lattice node.
class SupportSolver {
 public:
  struct Result {
    double value = 0.0;  // h - c(x, y)
    Vec y;
    double h = 0.0;
    int node = -1;       // Y lattice node the search started from
  };

  SupportSolver(const CostModel& model, Mat piece_x, std::vector<double> piece_v, const Lattice& ylat,
                SupportOptions opt = {});

  /// min_k c(x_k, y_j) + v_k at every Y node (+inf at nodes outside Y).
  const std::vector<double>& lattice_min() const { return lat_min_; }
  double min_at(const Vec& y) const;
  double value_at(const Vec& x, const Vec& y) const;

  Result scan(const Vec& x) const;
  Result solve(const Vec& x) const;
  Result refine_from(const Vec& x, const Vec& start) const;
  /// Lattice local maxima of the objective, best first.
  std::vector<Result> local_maxima(const Vec& x, int max_count) const;

  const Lattice& y_lattice() const { return ylat_; }
  const Mat& pieces() const { return px_; }
  const std::vector<double>& piece_values() const { return pv_; }

 private:
  const CostModel& model_;
  Mat px_;
  std::vector<double> pv_;
  const Lattice& ylat_;
  SupportOptions opt_;
  std::vector<double> lat_min_;
};

}  // namespace cconv
