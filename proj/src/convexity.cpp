#include "cconv/convexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "cconv/constants.hpp"
#include "cconv/errors.hpp"
#include "cconv/geometry.hpp"
#include "cconv/rng.hpp"

namespace cconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Maximize f over t in [a, b] by golden section; returns (t, f(t)).
template <class F>
std::pair<double, double> golden_max(F f, double a, double b, int iters = 40) {
  const double r = 0.6180339887498949;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? std::make_pair(c, fc) : std::make_pair(d, fd);
}

// One coordinate pass of golden-section search around `start`, within one
// lattice cell on each side. `objective` is maximized.
template <class F>
std::pair<Vec, double> coordinate_refine(F objective, const Vec& start, double start_value, const Lattice& lat) {
  Vec best = start;
  double best_value = start_value;
  for (int a = 0; a < lat.dim(); ++a) {
    const double h = lat.spacing(a);
    const double lo = std::max(lat.lo()[a], best[a] - h);
    const double hi = std::min(lat.hi()[a], best[a] + h);
    Vec trial = best;
    auto along = [&](double t) {
      trial[a] = t;
      if (!lat.region().contains(trial, 1e-12)) return -kInf;
      return objective(trial);
    };
    auto [t, v] = golden_max(along, lo, hi);
    if (v > best_value) {
      best[a] = t;
      best_value = v;
    }
  }
  return {best, best_value};
}

}  // namespace

double c_affine_eval(const CostModel& model, const CAffine& f, const Vec& x) { return -model.c(x, f.y) + f.h; }

GridFunction sample_c_affine(const CostModel& model, const CAffine& f, const Lattice& xlat) {
  std::vector<double> v(static_cast<size_t>(xlat.size()));
  Mat ycol = f.y;
  model.c_cols_x(xlat.nodes(), f.y, v.data());
  for (double& d : v) d = f.h - d;
  return GridFunction('X', xlat, std::move(v));
}

// Two passes keep the output c-convex: refined maximizers from every node are
// pooled, then each node takes the max over the lattice and the whole pool.
// A per-node refinement alone would be a max over node-dependent sets.
GridFunction c_transform(const CostModel& model, const GridFunction& psi, const Lattice& xlat, bool refine) {
  const Lattice& ylat = psi.lattice;
  if (psi.all_minus_inf()) throw Error(ErrorKind::AllMinusInfinity, "c-transform of a potential that is -inf everywhere");
  GridFunction out('X', xlat);
  std::vector<double> cx(static_cast<size_t>(ylat.size()));
  std::vector<Vec> pool;
  std::vector<double> pool_psi;
  for (int k = 0; k < xlat.size(); ++k) {
    const Vec x = xlat.node(k);
    model.c_cols_y(x, ylat.nodes(), cx.data());
    double best = -kInf;
    int arg = -1;
    for (int j : ylat.inside_nodes()) {
      if (psi.is_minus_inf(j)) continue;
      const double v = psi.values[static_cast<size_t>(j)] - cx[static_cast<size_t>(j)];
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    out.values[static_cast<size_t>(k)] = best;
    if (refine) {
      auto obj = [&](const Vec& y) {
        const double p = psi.eval(y);
        return std::isfinite(p) ? p - model.c(x, y) : -kInf;
      };
      auto [y, v] = coordinate_refine(obj, ylat.node(arg), best, ylat);
      if (v > best) {
        pool.push_back(y);
        pool_psi.push_back(psi.eval(y));
      }
    }
  }
  if (!pool.empty()) {
    Mat ys(ylat.dim(), static_cast<Eigen::Index>(pool.size()));
    for (size_t i = 0; i < pool.size(); ++i) ys.col(static_cast<Eigen::Index>(i)) = pool[i];
    std::vector<double> cp(pool.size());
    for (int k = 0; k < xlat.size(); ++k) {
      model.c_cols_y(xlat.node(k), ys, cp.data());
      double& v = out.values[static_cast<size_t>(k)];
      for (size_t i = 0; i < pool.size(); ++i) v = std::max(v, pool_psi[i] - cp[i]);
    }
  }
  return out;
}

GridFunction reverse_transform(const CostModel& model, const GridFunction& phi, const Lattice& ylat, bool refine) {
  const Lattice& xlat = phi.lattice;
  GridFunction out('Y', ylat);
  std::vector<double> cy(static_cast<size_t>(xlat.size()));
  std::vector<Vec> pool;
  std::vector<double> pool_phi;
  for (int j = 0; j < ylat.size(); ++j) {
    const Vec y = ylat.node(j);
    model.c_cols_x(xlat.nodes(), y, cy.data());
    double best = kInf;
    int arg = -1;
    for (int k : xlat.inside_nodes()) {
      const double v = cy[static_cast<size_t>(k)] + phi.values[static_cast<size_t>(k)];
      if (v < best) {
        best = v;
        arg = k;
      }
    }
    out.values[static_cast<size_t>(j)] = best;
    if (refine) {
      auto obj = [&](const Vec& x) { return -(model.c(x, y) + phi.eval(x)); };
      auto [x, v] = coordinate_refine(obj, xlat.node(arg), -best, xlat);
      if (-v < best) {
        pool.push_back(x);
        pool_phi.push_back(phi.eval(x));
      }
    }
  }
  if (!pool.empty()) {
    Mat xs(xlat.dim(), static_cast<Eigen::Index>(pool.size()));
    for (size_t i = 0; i < pool.size(); ++i) xs.col(static_cast<Eigen::Index>(i)) = pool[i];
    std::vector<double> cp(pool.size());
    for (int j = 0; j < ylat.size(); ++j) {
      model.c_cols_x(xs, ylat.node(j), cp.data());
      double& v = out.values[static_cast<size_t>(j)];
      for (size_t i = 0; i < pool.size(); ++i) v = std::min(v, pool_phi[i] + cp[i]);
    }
  }
  return out;
}

double model_lip_c(const CostModel& model) {
  static std::mutex mu;
  static std::map<const CostModel*, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(&model);
  if (it != cache.end()) return it->second;
  const double lip = estimate_constants(model, 500, 0).lip_c;
  cache[&model] = lip;
  return lip;
}

double default_c_convexity_tolerance(const CostModel& model, const Lattice& xlat) {
  return 1e-4 * model_lip_c(model) * xlat.max_spacing();
}

double default_alt_tolerance(const CostModel& model, const Lattice& xlat) {
  return 1e-3 * model_lip_c(model) * xlat.max_spacing();
}

namespace {

Mat inside_nodes_matrix(const Lattice& lat, std::vector<double>* values, const GridFunction* phi) {
  const auto& ids = lat.inside_nodes();
  Mat m(lat.dim(), static_cast<Eigen::Index>(ids.size()));
  for (size_t i = 0; i < ids.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = lat.node(ids[i]);
    if (values) values->push_back(phi->values[static_cast<size_t>(ids[i])]);
  }
  return m;
}

}  // namespace

EnvelopeResult c_envelope(const CostModel& model, const GridFunction& phi, const EnvelopeOptions& opt) {
  const Lattice& xlat = phi.lattice;
  for (int k : xlat.inside_nodes()) {
    if (phi.is_minus_inf(k)) throw Error(ErrorKind::InvalidArgument, "envelope input must be finite");
  }
  const Lattice ylat = Lattice::uniform(model.domain().Y, opt.y_count.value_or(Lattice::default_count(model.dim())));
  std::vector<double> pv;
  Mat px = inside_nodes_matrix(xlat, &pv, &phi);
  SupportSolver solver(model, std::move(px), std::move(pv), ylat, opt.support);

  EnvelopeResult res{phi, 0.0, -1, true, opt.tolerance.value_or(default_c_convexity_tolerance(model, xlat)), {}};
  res.maximizers.resize(static_cast<size_t>(xlat.size()));
  std::vector<double> best(static_cast<size_t>(xlat.size()), -kInf);
  auto stop_for = [](double target) { return 1e-12 * (1.0 + std::fabs(target)); };
  // Tries y as a start at node k; refines when it beats the current value.
  auto try_start = [&](int k, const Vec& x, const Vec& y) {
    const size_t i = static_cast<size_t>(k);
    if (!(solver.value_at(x, y) > best[i])) return false;
    auto rr = opt.support.refine ? solver.refine_from(x, y) : SupportSolver::Result{solver.value_at(x, y), y, 0.0};
    if (!(rr.value > best[i])) return false;
    best[i] = rr.value;
    res.maximizers[i] = rr.y;
    return true;
  };
  for (int k : xlat.inside_nodes()) {
    const size_t i = static_cast<size_t>(k);
    const Vec x = xlat.node(k);
    const double target = phi.values[i];
    const double stop = stop_for(target);
    auto r = solver.scan(x);
    const int first = r.node;
    if (target - r.value > stop && opt.support.refine) {
      auto rr = solver.refine_from(x, r.y);
      if (rr.value > r.value) r = rr;
    }
    best[i] = r.value;
    res.maximizers[i] = r.y;
    // Other lattice local maxima may lead to a higher continuous maximum.
    if (target - best[i] > stop && opt.support.refine && opt.starts > 1) {
      for (const auto& s : solver.local_maxima(x, opt.starts)) {
        if (s.node == first) continue;
        try_start(k, x, s.y);
        if (target - best[i] <= stop) break;
      }
    }
    for (const Vec& y : opt.extra_starts) {
      if (target - best[i] <= stop) break;
      try_start(k, x, y);
    }
  }
  // Maximizers are shared across neighboring nodes; a spike of the outer
  // objective missed by the Y lattice at one node is often found at another.
  for (int sweep = 0; sweep < opt.propagation_sweeps; ++sweep) {
    bool changed = false;
    const auto& ids = xlat.inside_nodes();
    for (size_t n = 0; n < ids.size(); ++n) {
      const int k = sweep % 2 == 0 ? ids[n] : ids[ids.size() - 1 - n];
      const size_t i = static_cast<size_t>(k);
      const double target = phi.values[i];
      if (target - best[i] <= stop_for(target)) continue;
      const Vec x = xlat.node(k);
      for (int nb : xlat.neighbors(k)) {
        const Vec& y = res.maximizers[static_cast<size_t>(nb)];
        if (y.size() == 0) continue;
        changed = try_start(k, x, y) || changed;
      }
    }
    if (!changed) break;
  }
  for (int k : xlat.inside_nodes()) {
    const size_t i = static_cast<size_t>(k);
    const double target = phi.values[i];
    const double env = std::min(best[i], target);
    res.envelope.values[i] = env;
    const double gap = target - env;
    if (gap > res.max_gap || res.argmax_node < 0) {
      res.max_gap = std::max(gap, res.max_gap);
      res.argmax_node = k;
    }
  }
  res.is_c_convex = res.max_gap <= res.tolerance;
  return res;
}

std::vector<SubdiffEntry> c_subdifferential(const CostModel& model, const GridFunction& phi, const Vec& x0,
                                            const EnvelopeOptions& opt) {
  const Lattice& xlat = phi.lattice;
  const Lattice ylat = Lattice::uniform(model.domain().Y, opt.y_count.value_or(Lattice::default_count(model.dim())));
  std::vector<double> pv;
  Mat px = inside_nodes_matrix(xlat, &pv, &phi);
  SupportSolver solver(model, std::move(px), std::move(pv), ylat, opt.support);
  const double tol = opt.tolerance.value_or(default_c_convexity_tolerance(model, xlat));
  const double phi0 = phi.eval(x0);

  std::vector<SubdiffEntry> out;
  std::vector<Vec> starts;
  for (const auto& s : solver.local_maxima(x0, opt.starts)) starts.push_back(s.y);
  starts.insert(starts.end(), opt.extra_starts.begin(), opt.extra_starts.end());
  for (const Vec& start : starts) {
    auto r = opt.support.refine ? solver.refine_from(x0, start) : SupportSolver::Result{solver.value_at(x0, start), start, 0.0};
    // residual = max_x -c(x, y) + c(x0, y) + phi(x0) - phi(x) = phi(x0) - value
    const double residual = std::max(0.0, phi0 - r.value);
    if (residual > tol) continue;
    bool dup = false;
    for (const auto& e : out) dup = dup || (e.y - r.y).norm() <= 0.5 * ylat.max_spacing();
    if (!dup) out.push_back({r.y, residual});
  }
  return out;
}

SectionReport section_analysis(const CostModel& model, const GridFunction& phi, const CAffine& f, const Vec& y_probe,
                               const SectionOptions& opt) {
  const Lattice& lat = phi.lattice;
  std::vector<double> fv(static_cast<size_t>(lat.size()));
  model.c_cols_x(lat.nodes(), f.y, fv.data());
  for (double& v : fv) v = f.h - v;

  enum : std::uint8_t { Out = 0, Member = 1, Equal = 2 };
  std::vector<std::uint8_t> cls(static_cast<size_t>(lat.size()), Out);
  SectionReport rep;
  for (int k : lat.inside_nodes()) {
    const double d = phi.values[static_cast<size_t>(k)] - fv[static_cast<size_t>(k)];
    if (std::fabs(d) <= opt.equality_tol) {
      cls[static_cast<size_t>(k)] = Equal;
      ++rep.equality_nodes;
    } else if (d < 0.0) {
      cls[static_cast<size_t>(k)] = Member;
    }
  }
  for (int k : lat.inside_nodes()) {
    if (cls[static_cast<size_t>(k)] == Out) continue;
    rep.section.member_nodes.push_back(k);
    bool touches_out = false;
    for (int nb : lat.neighbors(k)) touches_out = touches_out || (lat.inside(nb) && cls[static_cast<size_t>(nb)] == Out);
    if (touches_out || cls[static_cast<size_t>(k)] == Equal) rep.section.boundary_nodes.push_back(k);
    // An equality node with no neighbor outside the section sits in its interior.
    if (cls[static_cast<size_t>(k)] == Equal && !touches_out) ++rep.interior_strictness_violations;
  }

  // Midpoints in p-space must map back into the section (within one lattice
  // cell of slack, since membership between nodes is interpolated).
  const auto& members = rep.section.member_nodes;
  if (members.size() >= 2) {
    Rng rng(opt.seed);
    const double slack = model_lip_c(model) * lat.max_spacing();
    for (int i = 0; i < opt.midpoint_pairs; ++i) {
      const Vec xa = lat.node(members[rng.index(members.size())]);
      const Vec xb = lat.node(members[rng.index(members.size())]);
      Vec pm = 0.5 * (-model.grad_y(xa, y_probe) - model.grad_y(xb, y_probe));
      CExpResult r = c_exp_solve(model, y_probe, Focus::Y, pm, Vec(0.5 * (xa + xb)));
      ++rep.midpoint_checks;
      if (!r.converged || r.outside > 1e-9) continue;  // left X: domain c-convexity, not the section
      if (phi.eval(r.point) > c_affine_eval(model, f, r.point) + slack) {
        rep.is_c_convex_wrt = false;
        break;
      }
    }
  }
  return rep;
}

}  // namespace cconv
