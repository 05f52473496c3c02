#include "cconv/chord.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cconv/errors.hpp"
#include "cconv/geometry.hpp"
#include "cconv/rng.hpp"

namespace cconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::shared_ptr<const Lattice> y_lattice(const CostModel& model, std::optional<int> count) {
  return std::make_shared<const Lattice>(
      Lattice::uniform(model.domain().Y, count.value_or(Lattice::default_count(model.dim()))));
}

Mat endpoints(const LiftedPoint& a, const LiftedPoint& b) {
  Mat m(a.x.size(), 2);
  m.col(0) = a.x;
  m.col(1) = b.x;
  return m;
}

}  // namespace

Chord::Chord(const CostModel& model, LiftedPoint x0, LiftedPoint x1, const ChordOptions& opt)
    : Chord(model, std::move(x0), std::move(x1), y_lattice(model, opt.y_count), opt.support) {}

Chord::Chord(const CostModel& model, LiftedPoint x0, LiftedPoint x1, std::shared_ptr<const Lattice> ylat,
             const SupportOptions& sopt)
    : model_(model), x0_(std::move(x0)), x1_(std::move(x1)), ylat_(std::move(ylat)) {
  solver_ = std::make_unique<SupportSolver>(model_, endpoints(x0_, x1_), std::vector<double>{x0_.u, x1_.u}, *ylat_,
                                            sopt);
}

SupportSolver::Result Chord::eval(const Vec& x) const { return solver_->solve(x); }

double chord_eval(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1, const Vec& x,
                  const ChordOptions& opt) {
  return Chord(model, x0, x1, opt)(x);
}

GridFunction chord_surface(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1, const Lattice& xlat,
                           const ChordOptions& opt) {
  Chord chord(model, x0, x1, opt);
  GridFunction out('X', xlat);
  for (int k : xlat.inside_nodes()) out.values[static_cast<size_t>(k)] = chord(xlat.node(k));
  return out;
}

std::optional<CAffine> find_touching(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1,
                                     const Lattice& ylat, double residual_tol) {
  // Along h(y) = u0 + c(x0, y) the c-affine passes through X0; a root of
  // g(y) = c(x0, y) - c(x1, y) + u0 - u1 makes it pass through X1 as well.
  auto g = [&](const Vec& y) { return model.c(x0.x, y) - model.c(x1.x, y) + x0.u - x1.u; };
  std::vector<double> c0(static_cast<size_t>(ylat.size())), c1(c0.size());
  model.c_cols_y(x0.x, ylat.nodes(), c0.data());
  model.c_cols_y(x1.x, ylat.nodes(), c1.data());
  std::vector<double> gv(c0.size());
  for (size_t j = 0; j < gv.size(); ++j) gv[j] = c0[j] - c1[j] + x0.u - x1.u;

  auto make = [&](const Vec& y) {
    CAffine f{y, x0.u + model.c(x0.x, y)};
    const double res = std::fabs(-model.c(x1.x, y) + f.h - x1.u);
    return res <= residual_tol ? std::optional<CAffine>(f) : std::nullopt;
  };

  int best = -1;
  for (int j : ylat.inside_nodes()) {
    if (best < 0 || std::fabs(gv[static_cast<size_t>(j)]) < std::fabs(gv[static_cast<size_t>(best)])) best = j;
    if (gv[static_cast<size_t>(j)] == 0.0) return make(ylat.node(j));
    for (int nb : ylat.neighbors(j)) {
      if (nb < j || !ylat.inside(nb)) continue;
      if ((gv[static_cast<size_t>(j)] < 0.0) == (gv[static_cast<size_t>(nb)] < 0.0)) continue;
      Vec a = ylat.node(j), b = ylat.node(nb);
      double ga = gv[static_cast<size_t>(j)];
      for (int it = 0; it < 200; ++it) {
        const Vec m = 0.5 * (a + b);
        const double gm = g(m);
        if (gm == 0.0 || (m - a).norm() <= 1e-15 * (1.0 + m.norm())) {
          a = m;
          break;
        }
        if ((gm < 0.0) == (ga < 0.0)) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      if (auto f = make(a)) return f;
    }
  }
  if (best < 0) return std::nullopt;

  // No sign change on the lattice: Newton steps on g from the best node.
  Vec y = ylat.node(best);
  for (int it = 0; it < 50; ++it) {
    const double gy = g(y);
    const Vec grad = model.grad_y(x0.x, y) - model.grad_y(x1.x, y);
    const double n2 = grad.squaredNorm();
    if (n2 <= 0.0) break;
    const Vec next = ylat.region().project(y - (gy / n2) * grad);
    if ((next - y).norm() <= 1e-15 * (1.0 + y.norm())) break;
    y = next;
  }
  return make(y);
}

ConnectResult connect(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1, const ChordOptions& opt) {
  auto ylat = y_lattice(model, opt.y_count);
  Chord chord(model, x0, x1, ylat, opt.support);
  ConnectResult res;
  res.u0p = std::min(chord(x0.x), x0.u);
  res.u1p = std::min(chord(x1.x), x1.u);
  res.touching = find_touching(model, {x0.x, res.u0p}, {x1.x, res.u1p}, *ylat);
  if (!res.touching) {
    throw Error(ErrorKind::TouchingNotFound, "no c-affine through both connected endpoints was located");
  }
  const CAffine& f = *res.touching;
  res.residual = std::max(std::fabs(c_affine_eval(model, f, x0.x) - res.u0p),
                          std::fabs(c_affine_eval(model, f, x1.x) - res.u1p));
  return res;
}

AltConvexityReport is_alternative_c_convex(const CostModel& model, const GridFunction& phi,
                                           const AltConvexityOptions& opt) {
  const Lattice& xlat = phi.lattice;
  const auto& ids = xlat.inside_nodes();
  AltConvexityReport rep;
  rep.tolerance = opt.tolerance.value_or(default_alt_tolerance(model, xlat));
  rep.worst_gap = -kInf;
  if (ids.size() < 2) {
    rep.worst_gap = 0.0;
    return rep;
  }
  auto ylat = y_lattice(model, opt.y_count);

  std::vector<std::pair<int, int>> pairs = opt.extra_pairs;
  Rng rng(opt.seed);
  for (int i = 0; i < opt.pair_budget; ++i) {
    const int a = ids[rng.index(ids.size())];
    int b = ids[rng.index(ids.size() - 1)];
    if (b == a) b = ids.back();
    pairs.emplace_back(a, b);
  }

  for (const auto& [a, b] : pairs) {
    Chord chord(model, {xlat.node(a), phi.at(a)}, {xlat.node(b), phi.at(b)}, ylat, opt.support);
    for (int k : ids) {
      const Vec x = xlat.node(k);
      const double target = phi.at(k);
      // Refinement only raises F, so a scan gap at or below the running worst
      // cannot change the maximum.
      auto r = chord.solver().scan(x);
      if (target - r.value > rep.worst_gap && opt.support.refine) {
        auto rr = chord.solver().refine_from(x, r.y);
        if (rr.value > r.value) r = rr;
        // The best node can sit in the wrong basin; try the other lattice maxima.
        if (target - r.value > rep.worst_gap) {
          for (const auto& m : chord.solver().local_maxima(x, 4)) {
            auto rm = chord.solver().refine_from(x, m.y);
            if (rm.value > r.value) r = rm;
          }
        }
      }
      const double gap = target - r.value;
      if (gap > rep.worst_gap) {
        rep.worst_gap = gap;
        rep.x0 = xlat.node(a);
        rep.x1 = xlat.node(b);
        rep.x = x;
      }
      ++rep.triples;
    }
    ++rep.pairs;
  }
  rep.holds = rep.worst_gap <= rep.tolerance;
  return rep;
}

double segment_identity_check(const CostModel& model, const LiftedPoint& x0, const LiftedPoint& x1,
                              const CAffine& touching, int t_grid, const ChordOptions& opt) {
  if (t_grid < 2) throw Error(ErrorKind::InvalidArgument, "t grid needs at least two points");
  Chord chord(model, x0, x1, opt);
  const Vec p0 = -model.grad_y(x0.x, touching.y);
  const Vec p1 = -model.grad_y(x1.x, touching.y);
  double worst = 0.0;
  for (int i = 0; i < t_grid; ++i) {
    const double t = static_cast<double>(i) / (t_grid - 1);
    Vec xt;
    if (i == 0) {
      xt = x0.x;
    } else if (i == t_grid - 1) {
      xt = x1.x;
    } else {
      CExpResult r = c_exp_solve(model, touching.y, Focus::Y, Vec((1.0 - t) * p0 + t * p1),
                                 Vec((1.0 - t) * x0.x + t * x1.x));
      if (!r.converged || r.outside > 1e-9) continue;
      xt = r.point;
    }
    worst = std::max(worst, std::fabs(chord(xt) - c_affine_eval(model, touching, xt)));
  }
  return worst;
}

}  // namespace cconv
