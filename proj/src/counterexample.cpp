#include "cconv/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cconv/chord.hpp"
#include "cconv/cones.hpp"
#include "cconv/constants.hpp"
#include "cconv/errors.hpp"
#include "cconv/geometry.hpp"

namespace cconv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kCosBound = 7.0 / 8.0;

double m_value(const CostModel& model, const Vec& x, const Vec& y0, const Vec& y1) {
  return -model.c(x, y1) + model.c(x, y0);
}

// Unit directions within `half` of `axis`: one fan per orthogonal complement
// basis vector, so 2D gets a single fan of `count` directions.
std::vector<Vec> cone_directions(const Vec& axis, double half, int count) {
  const int n = static_cast<int>(axis.size());
  const Vec a = axis.normalized();
  if (n == 1) return {a};
  std::vector<Vec> perps;
  for (int k = 0; k < n && static_cast<int>(perps.size()) < n - 1; ++k) {
    Vec u = Vec::Zero(n);
    u[k] = 1.0;
    u -= u.dot(a) * a;
    for (const Vec& w : perps) u -= u.dot(w) * w;
    if (u.norm() > 1e-8) perps.push_back(u.normalized());
  }
  const int per = std::max(2, count / static_cast<int>(perps.size()));
  std::vector<Vec> out;
  for (const Vec& u : perps) {
    for (int i = 0; i < per; ++i) {
      const double ang = -half + 2.0 * half * i / (per - 1);
      out.push_back(std::cos(ang) * a + std::sin(ang) * u);
    }
  }
  return out;
}

// Points of the cone apex + K^rho_{theta, axis}, excluding the apex.
std::vector<Vec> cone_points(const Vec& apex, const Vec& axis, double theta, double rho, int radial, int angular) {
  std::vector<Vec> out;
  for (const Vec& d : cone_directions(axis, theta, angular)) {
    for (int i = 1; i <= radial; ++i) out.push_back(apex + (rho * i / radial) * d);
  }
  return out;
}

// min over the cone samples of f1 - f0 = m - level, skipping points outside
// [X]_{y0} and points within `exclude` of either apex. Returns +inf when no
// sample qualifies.
double cone_min(const CostModel& model, const StructuredViolation& sv, double theta, double rho, double exclude,
                const RefineOptions& opt, int* samples = nullptr) {
  const Vec xi = sv.w1 - sv.w0;
  const double level = -sv.h1;
  double worst = std::numeric_limits<double>::infinity();
  int count = 0;
  for (int side = 0; side < 2; ++side) {
    const Vec& apex = side == 0 ? sv.w0 : sv.w1;
    const Vec axis = side == 0 ? xi : Vec(-xi);
    const Vec& guess = side == 0 ? sv.z0 : sv.z1;
    for (const Vec& p : cone_points(apex, axis, theta, rho, opt.cone_radial, opt.cone_angular)) {
      if ((p - sv.w0).norm() < exclude || (p - sv.w1).norm() < exclude) continue;
      Vec x;
      const double v = level_profile(model, sv.y0, sv.y1, p, guess, &x);
      if (std::isnan(v)) continue;
      worst = std::min(worst, v - level);
      ++count;
    }
  }
  if (samples) *samples = count;
  return worst;
}

double cond3_tol(const StructuredViolation& sv) { return 1e-12 * (1.0 + std::fabs(sv.h1)); }

}  // namespace

double level_profile(const CostModel& model, const Vec& y0, const Vec& y1, const Vec& p,
                     const std::optional<Vec>& guess, Vec* x_out) {
  CExpResult r = c_exp_solve(model, y0, Focus::Y, p, guess);
  if (!r.converged || r.outside > 0.0) return kNaN;
  if (x_out) *x_out = r.point;
  return m_value(model, r.point, y0, y1);
}

RawViolation find_violation(const CostModel& model, int budget, std::uint64_t seed, const FindOptions& opt) {
  LoeperOptions lo;
  lo.violation_floor = opt.violation_floor;
  LoeperReport rep = check_loeper(model, budget, opt.t_grid, seed, lo);
  if (!rep.certificate) {
    throw Error(ErrorKind::NoViolationFound,
                "no Loeper violation in " + std::to_string(rep.evaluated) + " c-segment evaluations");
  }
  return violation_from_certificate(model, *rep.certificate, opt);
}

RawViolation violation_from_certificate(const CostModel& model, const ViolationCertificate& cert,
                                        const FindOptions& opt) {
  const Region& X = model.domain().X;
  const Region& Y = model.domain().Y;
  const Region Xs = X.inflated(-opt.interior_margin * X.diameter());
  const Region Ys = Y.inflated(-opt.interior_margin * Y.diameter());
  RawViolation raw;
  raw.x0 = Xs.project(cert.x0);
  raw.x1 = Xs.project(cert.x1);
  raw.y0 = Ys.project(cert.y0);
  raw.y1 = Ys.project(cert.y1);

  const Vec p0 = -model.grad_y(raw.x0, raw.y0), p1 = -model.grad_y(raw.x1, raw.y0);
  const double m0 = m_value(model, raw.x0, raw.y0, raw.y1), m1 = m_value(model, raw.x1, raw.y0, raw.y1);
  const double scale = 1.0 + std::max({std::fabs(model.c(raw.x0, raw.y0)), std::fabs(model.c(raw.x0, raw.y1)),
                                       std::fabs(model.c(raw.x1, raw.y0)), std::fabs(model.c(raw.x1, raw.y1))});

  // The nudge moves the peak, so re-locate it on a fine grid around the certificate's t.
  std::vector<double> ts{cert.t};
  for (int i = 1; i < 200; ++i) ts.push_back(i / 200.0);
  double best = -std::numeric_limits<double>::infinity();
  for (double t : ts) {
    CExpResult r = c_exp_solve(model, raw.y0, Focus::Y, Vec((1 - t) * p0 + t * p1), Vec((1 - t) * raw.x0 + t * raw.x1));
    if (!r.converged || X.depth(r.point) <= 0.0) continue;
    const double v = m_value(model, r.point, raw.y0, raw.y1);
    if (v > best) {
      best = v;
      raw.t0 = t;
      raw.xt0 = r.point;
    }
  }
  const double base = std::max(m0, m1);
  if (!(best - base > 2.0 * opt.violation_floor * scale)) {
    throw Error(ErrorKind::NoViolationFound, "violation does not survive moving the points into the interior");
  }
  raw.h1p = -0.5 * (best + base);
  raw.margin_end0 = -raw.h1p - m0;
  raw.margin_end1 = -raw.h1p - m1;
  raw.margin_mid = best + raw.h1p;
  return raw;
}

StructuredViolation refine_violation(const CostModel& model, const RawViolation& raw, const RefineOptions& opt) {
  const Vec& y0 = raw.y0;
  const Vec& y1 = raw.y1;
  const Vec p0 = -model.grad_y(raw.x0, y0), p1 = -model.grad_y(raw.x1, y0);
  double level = -raw.h1p;
  if (opt.level_fraction) {
    const double top = -raw.h1p + raw.margin_mid, base = -raw.h1p - std::min(raw.margin_end0, raw.margin_end1);
    level = base + std::clamp(*opt.level_fraction, 1e-3, 1.0 - 1e-3) * (top - base);
  }
  auto point = [&](double t) { return Vec((1 - t) * p0 + t * p1); };
  auto g = [&](double t, const Vec& guess, Vec* x) { return level_profile(model, y0, y1, point(t), guess, x) - level; };

  // Walk from t0 toward each end until the profile drops below the level.
  auto crossing = [&](int dir) {
    const int n = opt.profile_points;
    double t_in = raw.t0;
    Vec x_in = raw.xt0;
    for (int i = 1; i <= n; ++i) {
      const double t = std::clamp(raw.t0 + dir * static_cast<double>(i) / (n - 1), 0.0, 1.0);
      Vec x;
      const double v = g(t, x_in, &x);
      if (std::isnan(v)) throw Error(ErrorKind::RefinementFailed, "condition 1: p-segment leaves [X]_y0 before the level crossing");
      if (v < 0.0) {
        double a = t_in, b = t;  // g(a) > 0 > g(b)
        for (int it = 0; it < 200 && a != b; ++it) {
          const double mid = 0.5 * (a + b);
          if (mid == a || mid == b) break;
          Vec xm;
          const double vm = g(mid, x_in, &xm);
          if (std::isnan(vm)) break;
          if (vm > 0.0) {
            a = mid;
            x_in = xm;
          } else {
            b = mid;
          }
        }
        // the endpoint whose value is closer to the level
        Vec xa, xb;
        const double ga = g(a, x_in, &xa), gb = g(b, x_in, &xb);
        return std::fabs(ga) <= std::fabs(gb) ? std::make_pair(a, xa) : std::make_pair(b, xb);
      }
      t_in = t;
      x_in = x;
      if (t == 0.0 || t == 1.0) break;
    }
    throw Error(ErrorKind::RefinementFailed, "condition 1: no level crossing on the p-segment");
  };

  StructuredViolation sv;
  sv.y0 = y0;
  sv.y1 = y1;
  sv.h1 = -level;
  auto [tau, z0] = crossing(-1);
  auto [sigma, z1] = crossing(+1);
  sv.tau = tau;
  sv.sigma = sigma;
  sv.z0 = z0;
  sv.z1 = z1;
  sv.w0 = -model.grad_y(z0, y0);
  sv.w1 = -model.grad_y(z1, y0);
  const Region& X = model.domain().X;
  if (X.depth(z0) <= 0.0 || X.depth(z1) <= 0.0) {
    throw Error(ErrorKind::RefinementFailed, "condition 1: crossing point on the boundary of X");
  }
  for (int i = 0; i < 2; ++i) {
    const Vec& z = i == 0 ? z0 : z1;
    sv.level_residual[i] = std::fabs(-model.c(z, y0) - (-model.c(z, y1) + sv.h1));
    if (sv.level_residual[i] > 1e-8) {
      throw Error(ErrorKind::RefinementFailed, "condition 1: level residual " + std::to_string(sv.level_residual[i]));
    }
  }

  const Vec xi = sv.w1 - sv.w0;
  for (int i = 0; i < 2; ++i) {
    const Vec& z = i == 0 ? z0 : z1;
    const Mat M = -model.mixed_hessian(z, y0);
    const Vec grad = M.lu().solve(Vec(-model.grad_x(z, y1) + model.grad_x(z, y0)));
    sv.direction_margin[i] = i == 0 ? grad.dot(xi) : grad.dot(-xi);
    if (!(sv.direction_margin[i] > 0.0)) {
      throw Error(ErrorKind::RefinementFailed, "condition 2: directional derivative at z" + std::to_string(i) +
                                                   " is not positive (degenerate crossing)");
    }
  }

  const double theta_max = std::acos(kCosBound);
  for (int k = 1; k <= opt.theta_steps; ++k) {
    const double theta = theta_max * std::pow(0.5, 0.5 * k);
    for (int j = 0; j <= opt.rho_steps; ++j) {
      // the last candidate just covers the midpoint of [w0, w1]
      const double rho = j < opt.rho_steps ? xi.norm() * (1.0 - j / 16.0) : 0.5 * xi.norm() / std::cos(theta);
      int samples = 0;
      const double worst = cone_min(model, sv, theta, rho, 0.0, opt, &samples);
      if (samples > 0 && worst >= -cond3_tol(sv)) {
        sv.theta = theta;
        sv.rho = rho;
        sv.cone_samples = samples;
        return sv;
      }
    }
  }
  throw Error(ErrorKind::RefinementFailed, "condition 3: no angle with cos > 7/8 whose double cone fits the section");
}

int check_structured(const CostModel& model, const StructuredViolation& sv, const RefineOptions& opt) {
  for (const Vec* z : {&sv.z0, &sv.z1}) {
    if (std::fabs(-model.c(*z, sv.y0) - (-model.c(*z, sv.y1) + sv.h1)) > 1e-8) return 1;
  }
  const Vec xi = sv.w1 - sv.w0;
  for (int i = 0; i < 2; ++i) {
    const Vec& z = i == 0 ? sv.z0 : sv.z1;
    const Vec grad = (-model.mixed_hessian(z, sv.y0)).lu().solve(Vec(-model.grad_x(z, sv.y1) + model.grad_x(z, sv.y0)));
    if (!((i == 0 ? grad.dot(xi) : grad.dot(-xi)) > 0.0)) return 2;
  }
  if (!(std::cos(sv.theta) > kCosBound) || !(sv.rho > 0.5 * xi.norm())) return 3;
  int samples = 0;
  if (cone_min(model, sv, sv.theta, sv.rho, 0.0, opt, &samples) < -cond3_tol(sv) || samples == 0) return 3;
  return 0;
}

std::vector<CAffine> tilt_family(const CostModel& model, const StructuredViolation& sv,
                                 const CounterexampleParams& params) {
  const Vec xi = sv.w1 - sv.w0;
  const double half = 0.5 * (M_PI - sv.theta);
  const Region& Y = model.domain().Y;
  std::vector<CAffine> out;
  for (int i = 0; i < 2; ++i) {
    const Vec& z = i == 0 ? sv.z0 : sv.z1;
    const Vec axis = i == 0 ? Vec(-xi) : xi;
    const Vec q0 = -model.grad_x(z, sv.y0);
    const Mat M = -model.mixed_hessian(z, sv.y0);
    const double base = model.c(z, sv.y0);
    for (const Vec& d : cone_directions(axis, half, params.cone_direction_count)) {
      for (double rr : {params.r, 0.5 * params.r}) {
        CExpResult r = c_exp_solve(model, z, Focus::X, Vec(q0 + rr * (M * d)), sv.y0);
        if (!r.converged || r.outside > 0.0 || Y.depth(r.point) <= 0.0) {
          throw Error(ErrorKind::TiltOutOfDomain, "tilted y-point leaves Y at r = " + std::to_string(params.r));
        }
        out.push_back({r.point, model.c(z, r.point) - base});
      }
    }
  }
  return out;
}

namespace {

struct Pullback {
  std::vector<double> Phi;  // sup of the family at each node
  std::vector<double> f0;   // -c(x, y0)
  Mat P;                    // -D_y c(x, y0) per column
};

Pullback pullback(const CostModel& model, const StructuredViolation& sv, const CounterexampleParams& params,
                  const Lattice& xlat) {
  std::vector<CAffine> family = tilt_family(model, sv, params);
  family.push_back({sv.y1, sv.h1});
  const int n = xlat.size();
  const Mat& nodes = xlat.nodes();
  Pullback pb;
  pb.Phi.assign(static_cast<size_t>(n), -std::numeric_limits<double>::infinity());
  pb.f0.resize(static_cast<size_t>(n));
  std::vector<double> buf(static_cast<size_t>(n));
  for (const CAffine& f : family) {
    model.c_cols_x(nodes, f.y, buf.data());
    for (size_t k = 0; k < buf.size(); ++k) pb.Phi[k] = std::max(pb.Phi[k], -buf[k] + f.h);
  }
  model.c_cols_x(nodes, sv.y0, pb.f0.data());
  for (double& v : pb.f0) v = -v;
  model.grad_y_cols_x(nodes, sv.y0, pb.P);
  pb.P = -pb.P;
  return pb;
}

}  // namespace

PhiEpsilon build_phi_epsilon(const CostModel& model, const StructuredViolation& sv,
                             const CounterexampleParams& params, const Lattice& xlat) {
  if (!(params.delta > 0.0) || !(params.delta < sv.rho)) {
    throw Error(ErrorKind::InvalidArgument, "cap radius must lie in (0, rho)");
  }
  if (params.epsilon < 0.0) throw Error(ErrorKind::InvalidArgument, "epsilon must be non-negative");
  const Pullback pb = pullback(model, sv, params, xlat);
  const int n = xlat.size();

  PhiEpsilon out{GridFunction('X', xlat, pb.Phi), {}, {}};
  std::vector<std::uint8_t> flat(static_cast<size_t>(n), 0);
  for (int k = 0; k < n; ++k) {
    const size_t i = static_cast<size_t>(k);
    const double cap = pb.f0[i] + params.epsilon;
    if ((pb.P.col(k) - sv.w1).norm() < params.delta && cap > pb.Phi[i]) {
      out.phi.values[i] = cap;
      flat[i] = 1;
      out.flat_nodes.push_back(k);
    }
  }
  for (int k : out.flat_nodes) {
    if (!xlat.inside(k)) continue;
    bool all = true;
    for (int nb : xlat.neighbors(k)) all = all && flat[static_cast<size_t>(nb)];
    if (all) out.interior_flat_nodes.push_back(k);
  }
  const bool any_inside = std::any_of(out.flat_nodes.begin(), out.flat_nodes.end(), [&](int k) { return xlat.inside(k); });
  // epsilon = 0 is the plain pullback of Phi; only a lifted cap must show up.
  if (!any_inside && params.epsilon > 0.0) {
    throw Error(ErrorKind::CapEmpty, "no interior lattice node on the flat cap (" + std::to_string(out.flat_nodes.size()) +
                                         " cap nodes); refine the X lattice or enlarge delta");
  }
  return out;
}

double phi_epsilon_at(const CostModel& model, const StructuredViolation& sv, const CounterexampleParams& params,
                      const Vec& x) {
  double phi = -model.c(x, sv.y1) + sv.h1;
  for (const CAffine& f : tilt_family(model, sv, params)) phi = std::max(phi, c_affine_eval(model, f, x));
  const double cap = -model.c(x, sv.y0) + params.epsilon;
  if ((Vec(-model.grad_y(x, sv.y0)) - sv.w1).norm() < params.delta) phi = std::max(phi, cap);
  return phi;
}

void update_bounds(const CostModel& model, const StructuredViolation& sv, CounterexampleParams& params,
                   const Lattice& xlat) {
  params.theta_tilde = 0.5 * M_PI - 0.25 * sv.theta;
  params.tilt_bound = 0.5 * params.delta * params.r * std::cos(params.theta_tilde);
  const double e = cone_min(model, sv, sv.theta, sv.rho, params.delta, RefineOptions{});
  params.epsilon_delta = std::isfinite(e) ? e : 0.0;
  try {
    params.mu = mu_theta(estimate_constants(model, 2000, 0), params.theta_tilde);
  } catch (const Error&) {
    params.mu.reset();
  }
  const Pullback pb = pullback(model, sv, params, xlat);
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < xlat.size(); ++k) {
    const Vec p = pb.P.col(k);
    if ((p - sv.w0).norm() < params.delta || (p - sv.w1).norm() < params.delta) continue;
    gap = std::min(gap, pb.Phi[static_cast<size_t>(k)] - pb.f0[static_cast<size_t>(k)]);
  }
  params.sampled_bound = std::isfinite(gap) ? gap : 0.0;
}

CounterexampleParams initial_params(const CostModel& model, const StructuredViolation& sv, const Lattice& xlat) {
  CounterexampleParams params;
  params.delta = 0.5 * sv.rho;
  // To first order the tilt moves y0 by v, so half the room around y0 keeps
  // every tilted point inside Y.
  params.r = 0.5 * model.domain().Y.depth(sv.y0);
  update_bounds(model, sv, params, xlat);
  params.epsilon = 0.5 * params.sampled_bound;
  return params;
}

VerifyReport verify_counterexample(const CostModel& model, const GridFunction& phi_eps,
                                   const StructuredViolation& sv, const CounterexampleParams& params, int budget,
                                   std::uint64_t seed, const std::vector<int>& cap_nodes, const VerifyOptions& opt) {
  VerifyReport rep;
  const Lattice& xlat = phi_eps.lattice;
  const auto& ids = xlat.inside_nodes();
  auto nearest = [&](const Vec& x) {
    int best = ids.front();
    for (int k : ids) {
      if ((xlat.node(k) - x).norm() < (xlat.node(best) - x).norm()) best = k;
    }
    return best;
  };

  AltConvexityOptions ao;
  ao.seed = seed;
  ao.y_count = opt.y_count;
  if (!ids.empty()) {
    const int n0 = nearest(sv.z0), n1 = nearest(sv.z1);
    if (n0 != n1) ao.extra_pairs.emplace_back(n0, n1);
    if (!cap_nodes.empty() && cap_nodes.front() != n0) ao.extra_pairs.emplace_back(n0, cap_nodes.front());
    const long per = static_cast<long>(ids.size());
    const long need = std::max(0L, (budget + per - 1) / per - static_cast<long>(ao.extra_pairs.size()));
    ao.pair_budget = static_cast<int>(need);
  }
  AltConvexityReport alt = is_alternative_c_convex(model, phi_eps, ao);
  rep.alt_holds = alt.holds;
  rep.alt_worst_gap = alt.worst_gap;
  rep.alt_tolerance = alt.tolerance;
  rep.alt_triples = alt.triples;

  // The c-affines phi_eps was built from are known supports; offering their
  // y-points keeps the outer sup from missing them between Y lattice nodes.
  EnvelopeOptions eo;
  eo.y_count = opt.y_count;
  for (const CAffine& f : tilt_family(model, sv, params)) eo.extra_starts.push_back(f.y);
  eo.extra_starts.push_back(sv.y1);
  eo.extra_starts.push_back(sv.y0);
  EnvelopeResult env = c_envelope(model, phi_eps, eo);
  rep.c_convex_gap = env.max_gap;
  rep.envelope_tolerance = env.tolerance;

  // Deepest cap nodes first: closest to z1.
  std::vector<int> cand;
  for (int k : cap_nodes) {
    if (xlat.inside(k)) cand.push_back(k);
  }
  std::sort(cand.begin(), cand.end(), [&](int a, int b) {
    return (xlat.node(a) - sv.z1).norm() < (xlat.node(b) - sv.z1).norm();
  });
  if (static_cast<int>(cand.size()) > opt.subdiff_candidates) cand.resize(static_cast<size_t>(opt.subdiff_candidates));
  for (int k : cand) {
    EnvelopeOptions so = eo;
    so.extra_starts.push_back(env.maximizers[static_cast<size_t>(k)]);
    for (int nb : xlat.neighbors(k)) {
      if (env.maximizers[static_cast<size_t>(nb)].size() > 0) so.extra_starts.push_back(env.maximizers[static_cast<size_t>(nb)]);
    }
    if (c_subdifferential(model, phi_eps, xlat.node(k), so).empty()) {
      rep.subdiff_empty_at = xlat.node(k);
      break;
    }
  }
  rep.verdict = rep.alt_holds && rep.c_convex_gap >= 0.5 * params.epsilon;
  return rep;
}

CounterexampleResult search_counterexample(const CostModel& model, std::uint64_t seed, const SearchOptions& opt) {
  CounterexampleResult res;
  res.raw = find_violation(model, opt.loeper_budget, seed, opt.find);
  res.sv = refine_violation(model, res.raw, opt.refine);
  const Lattice xlat = Lattice::uniform(model.domain().X, opt.x_count);

  CounterexampleParams params = initial_params(model, res.sv, xlat);
  const double eps0 = params.epsilon;
  for (int level = 0; level < opt.levels; ++level) {
    if (level > 0) {
      params.delta *= 0.5;
      params.r *= 0.5;
      update_bounds(model, res.sv, params, xlat);
      params.epsilon = std::min(eps0 * std::ldexp(1.0, -level), 0.5 * params.sampled_bound);
    }
    SearchAttempt att{params, "ok", {}};
    try {
      PhiEpsilon pe = build_phi_epsilon(model, res.sv, params, xlat);
      att.report = verify_counterexample(model, pe.phi, res.sv, params, opt.triple_budget, seed, pe.flat_nodes,
                                         opt.verify);
      res.phi = pe.phi;
    } catch (const Error& e) {
      att.status = e.what();
      res.attempts.push_back(att);
      // A smaller cap cannot contain more nodes.
      if (e.kind() == ErrorKind::CapEmpty) break;
      continue;
    }
    res.attempts.push_back(att);
    if (att.report.verdict) {
      res.success = static_cast<int>(res.attempts.size()) - 1;
      break;
    }
  }
  return res;
}

}  // namespace cconv
