#include "cconv/constants.hpp"

#include <algorithm>
#include <cmath>

#include "cconv/errors.hpp"
#include "cconv/rng.hpp"

namespace cconv {

double ConstantEstimates::omega_upper(double rho) const {
  if (omega_table.empty()) return 0.0;
  for (const auto& [r, w] : omega_table) {
    if (r >= rho) return w;
  }
  return omega_table.back().second;
}

namespace {

struct PointSample {
  bool ok = false;
  double grad_norm = 0.0;
  double h_frob = 0.0;
  double hinv_frob = 0.0;
  double smax = 0.0;
  double smin = 0.0;
};

// Box vertices (or axis extremes of a ball) plus the center: suprema of the
// sampled quantities often sit on the boundary, which uniform draws rarely hit.
std::vector<Vec> anchor_points(const Region& r) {
  const int n = r.dim();
  std::vector<Vec> pts{r.center()};
  if (r.shape() == Region::Shape::Box) {
    if (n > 6) return pts;
    for (int mask = 0; mask < (1 << n); ++mask) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1 ? r.hi()[i] : r.lo()[i];
      pts.push_back(v);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Zero(n);
      e[i] = r.radius();
      pts.push_back(r.center() + e);
      pts.push_back(r.center() - e);
    }
  }
  return pts;
}

PointSample sample_point(const CostModel& model, const Vec& x, const Vec& y) {
  PointSample s;
  try {
    Vec gx = model.grad_x(x, y);
    Vec gy = model.grad_y(x, y);
    Mat h = model.mixed_hessian(x, y);
    Eigen::JacobiSVD<Mat> svd(h);
    const auto& sv = svd.singularValues();
    s.grad_norm = std::sqrt(gx.squaredNorm() + gy.squaredNorm());
    s.h_frob = h.norm();
    s.smax = sv[0];
    s.smin = sv[sv.size() - 1];
    if (!(s.smin > 0.0)) return s;
    s.hinv_frob = sv.cwiseInverse().norm();
    s.ok = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DiagonalSingularity) throw;
  }
  return s;
}

}  // namespace

ConstantEstimates estimate_constants(const CostModel& model, int sample_budget, std::uint64_t seed,
                                     const ConstantOptions& options) {
  if (sample_budget < 100) throw Error(ErrorKind::InvalidArgument, "sample_budget must be at least 100");
  const auto& dom = model.domain();
  const int n = model.dim();
  Rng rng(seed);

  double grad_max = 0.0, h_max = 0.0, h_min = INFINITY, hinv_max = 0.0;
  double smax = 0.0, smin = INFINITY;
  std::vector<std::pair<Vec, Vec>> anchors;
  for (const Vec& x : anchor_points(dom.X)) {
    for (const Vec& y : anchor_points(dom.Y)) anchors.emplace_back(x, y);
  }
  const int total = sample_budget + static_cast<int>(anchors.size());
  for (int k = 0; k < total; ++k) {
    const bool anchor = k < static_cast<int>(anchors.size());
    Vec x = anchor ? anchors[static_cast<size_t>(k)].first : rng.point_in(dom.X);
    Vec y = anchor ? anchors[static_cast<size_t>(k)].second : rng.point_in(dom.Y);
    PointSample s = sample_point(model, x, y);
    if (!s.ok) continue;
    grad_max = std::max(grad_max, s.grad_norm);
    h_max = std::max(h_max, s.h_frob);
    h_min = std::min(h_min, s.h_frob);
    hinv_max = std::max(hinv_max, s.hinv_frob);
    smax = std::max(smax, s.smax);
    smin = std::min(smin, s.smin);
  }
  if (!std::isfinite(h_min)) throw Error(ErrorKind::DegenerateHessian, "no admissible sample for the constants");

  ConstantEstimates out;
  const double sf = options.safety;
  out.lip_c = sf * grad_max;
  out.alpha = sf * std::max(h_max, 1.0 / hinv_max);
  out.beta = sf * std::max(hinv_max, 1.0 / h_min);
  out.L = sf * std::max(smax, 1.0 / smin);

  // Paired samples at geometric scales rho_k = diam * 2^-k; the pair offset is
  // drawn uniformly in the 2n-ball of radius rho and projected back into X x Y.
  const double diam = dom.diameter();
  const int scales = std::max(1, options.omega_scales);
  const int pairs = std::max(16, sample_budget / scales);
  std::vector<double> omega(static_cast<size_t>(scales), 0.0);
  std::vector<double> rhos(static_cast<size_t>(scales));
  for (int k = 0; k < scales; ++k) {
    const double rho = diam * std::ldexp(1.0, -(scales - 1 - k));
    rhos[static_cast<size_t>(k)] = rho;
    for (int j = 0; j < pairs; ++j) {
      Vec x0 = rng.point_in(dom.X);
      Vec y0 = rng.point_in(dom.Y);
      Vec dir = rng.unit_vector(2 * n);
      const double len = rho * std::pow(rng.uniform(), 1.0 / (2 * n));
      Vec x1 = dom.X.project(x0 + len * dir.head(n));
      Vec y1 = dom.Y.project(y0 + len * dir.tail(n));
      try {
        Mat h0 = model.mixed_hessian(x0, y0);
        Mat h1 = model.mixed_hessian(x1, y1);
        omega[static_cast<size_t>(k)] = std::max(omega[static_cast<size_t>(k)], (h1 - h0).norm());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DiagonalSingularity) throw;
      }
    }
  }
  double running = 0.0;
  for (int k = 0; k < scales; ++k) {
    running = std::max(running, omega[static_cast<size_t>(k)]);
    out.omega_table.emplace_back(rhos[static_cast<size_t>(k)], sf * running);
  }
  return out;
}

}  // namespace cconv
