#include "cconv/geometry.hpp"

#include <cmath>
#include <iomanip>

#include "cconv/errors.hpp"
#include "cconv/rng.hpp"

namespace cconv {

DualPair dual_coordinates(const CostModel& model, const Vec& x, const Vec& y) {
  return {-model.grad_y(x, y), -model.grad_x(x, y)};
}

namespace {

// Residual map of the c-exponential and its Jacobian in the unknown.
Vec dual_map(const CostModel& model, const Vec& focus, Focus kind, const Vec& z) {
  return kind == Focus::Y ? Vec(-model.grad_y(z, focus)) : Vec(-model.grad_x(focus, z));
}

Mat dual_jacobian(const CostModel& model, const Vec& focus, Focus kind, const Vec& z) {
  return kind == Focus::Y ? Mat(-model.mixed_hessian(z, focus).transpose()) : Mat(-model.mixed_hessian(focus, z));
}

}  // namespace

CExpResult c_exp_solve(const CostModel& model, const Vec& focus, Focus kind, const Vec& target,
                       const std::optional<Vec>& initial_guess, const NewtonOptions& opt) {
  const auto& dom = model.domain();
  const Region& opposite = kind == Focus::Y ? dom.X : dom.Y;
  double margin = opt.inflation * opposite.diameter();
  if (model.singular_on_diagonal() && dom.separation() > 0.0) margin = std::min(margin, 0.5 * dom.separation());
  const Region search = opposite.inflated(margin);

  CExpResult r;
  r.point = initial_guess ? search.project(*initial_guess) : opposite.center();
  const double tol = opt.residual_tol * (1.0 + target.norm());
  Vec f = dual_map(model, focus, kind, r.point) - target;
  double fn = f.norm();
  for (r.iterations = 0; r.iterations < opt.max_iters && fn > tol; ++r.iterations) {
    Mat j = dual_jacobian(model, focus, kind, r.point);
    Vec step = j.partialPivLu().solve(-f);
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, lambda *= 0.5) {
      Vec trial = search.project(r.point + lambda * step);
      Vec ft;
      try {
        ft = dual_map(model, focus, kind, trial) - target;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DiagonalSingularity) throw;
        continue;
      }
      const double ftn = ft.norm();
      if (ftn < fn) {
        r.point = trial;
        f = ft;
        fn = ftn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  r.residual = fn;
  r.converged = fn <= tol;
  r.outside = std::max(0.0, -opposite.depth(r.point));
  return r;
}

Vec c_exp(const CostModel& model, const Vec& focus, Focus kind, const Vec& target,
          const std::optional<Vec>& initial_guess, const NewtonOptions& opt) {
  CExpResult r = c_exp_solve(model, focus, kind, target, initial_guess, opt);
  if (!r.converged) {
    throw Error(ErrorKind::NoConvergence, "c-exponential Newton residual " + std::to_string(r.residual) +
                                              " after " + std::to_string(r.iterations) + " iterations");
  }
  const Region& opposite = kind == Focus::Y ? model.domain().X : model.domain().Y;
  if (r.outside > opt.membership_tol * (1.0 + opposite.diameter())) {
    throw Error(ErrorKind::TargetOutsideImage,
                "c-exponential lands " + std::to_string(r.outside) + " outside " + (kind == Focus::Y ? "X" : "Y"));
  }
  return r.point;
}

std::vector<Vec> c_segment(const CostModel& model, const Vec& y, const Vec& x0, const Vec& x1,
                           const std::vector<double>& ts) {
  const Vec p0 = -model.grad_y(x0, y);
  const Vec p1 = -model.grad_y(x1, y);
  std::vector<Vec> out;
  out.reserve(ts.size());
  for (double t : ts) {
    Vec guess = (1.0 - t) * x0 + t * x1;
    out.push_back(c_exp(model, y, Focus::Y, t * p1 + (1.0 - t) * p0, guess));
  }
  return out;
}

void write_segment_csv(std::ostream& os, const std::vector<double>& ts, const std::vector<Vec>& points) {
  const int n = points.empty() ? 0 : static_cast<int>(points.front().size());
  os << "t";
  for (int i = 0; i < n; ++i) os << ",x" << (i + 1);
  os << "\n" << std::setprecision(17);
  for (size_t k = 0; k < ts.size() && k < points.size(); ++k) {
    os << ts[k];
    for (int i = 0; i < n; ++i) os << "," << points[k][i];
    os << "\n";
  }
}

DomainConvexityReport check_domain_c_convexity(const CostModel& model, int check_budget, std::uint64_t seed) {
  const auto& dom = model.domain();
  Rng rng(seed);
  DomainConvexityReport rep;
  const double tol_x = 1e-9 * (1.0 + dom.X.diameter());
  const double tol_y = 1e-9 * (1.0 + dom.Y.diameter());
  auto record = [&](const CExpResult& r, double tol) {
    ++rep.checks;
    if (!r.converged) {
      ++rep.nonconverged;
      rep.holds = false;
      return;
    }
    rep.worst_midpoint_violation = std::max(rep.worst_midpoint_violation, r.outside);
    if (r.outside > tol) rep.holds = false;
  };
  for (int k = 0; k < check_budget; ++k) {
    // [X]_y
    Vec y = rng.point_in(dom.Y);
    Vec xa = rng.point_in(dom.X);
    Vec xb = rng.point_in(dom.X);
    try {
      Vec pm = 0.5 * (-model.grad_y(xa, y) - model.grad_y(xb, y));
      record(c_exp_solve(model, y, Focus::Y, pm, Vec(0.5 * (xa + xb))), tol_x);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DiagonalSingularity) throw;
    }
    // [Y]_x
    Vec x = rng.point_in(dom.X);
    Vec ya = rng.point_in(dom.Y);
    Vec yb = rng.point_in(dom.Y);
    try {
      Vec qm = 0.5 * (-model.grad_x(x, ya) - model.grad_x(x, yb));
      record(c_exp_solve(model, x, Focus::X, qm, Vec(0.5 * (ya + yb))), tol_y);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DiagonalSingularity) throw;
    }
  }
  return rep;
}

}  // namespace cconv
