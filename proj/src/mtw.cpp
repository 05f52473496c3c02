#include "cconv/mtw.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cconv/chord.hpp"
#include "cconv/errors.hpp"
#include "cconv/geometry.hpp"
#include "cconv/rng.hpp"

namespace cconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// B_ijst = c_ij,p (D2xy c)^-1_pq c_q,st - c_ij,st, with the inverse taken once.
struct MtwTensor {
  int n = 0;
  Tensor4 b;
  Mat c_inv;
  double scale = 0.0;  // magnitude of the two contributions, for noise floors

  MtwTensor(const CostModel& model, const Vec& x, const Vec& y) {
    MtwBundle mb = model.mtw_bundle(x, y);
    n = static_cast<int>(x.size());
    b = Tensor4(n);
    c_inv = mb.c_inv;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int s = 0; s < n; ++s)
          for (int t = 0; t < n; ++t) {
            double acc = 0.0;
            for (int p = 0; p < n; ++p)
              for (int q = 0; q < n; ++q) acc += mb.c_ij_p(i, j, p) * c_inv(p, q) * mb.c_q_st(q, s, t);
            b(i, j, s, t) = acc - mb.c_ij_st(i, j, s, t);
            scale = std::max(scale, std::fabs(acc) + std::fabs(mb.c_ij_st(i, j, s, t)));
          }
    scale *= std::pow(std::max(1.0, c_inv.norm()), 2);
  }

  double value(const Vec& eta, const Vec& xi, Vec* g_eta = nullptr, Vec* g_xi = nullptr) const {
    const Vec zeta = c_inv * xi;
    double v = 0.0;
    Vec ge = Vec::Zero(n), gz = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int s = 0; s < n; ++s)
          for (int t = 0; t < n; ++t) {
            const double w = b(i, j, s, t);
            v += w * eta[i] * eta[j] * zeta[s] * zeta[t];
            ge[i] += w * eta[j] * zeta[s] * zeta[t];
            ge[j] += w * eta[i] * zeta[s] * zeta[t];
            gz[s] += w * eta[i] * eta[j] * zeta[t];
            gz[t] += w * eta[i] * eta[j] * zeta[s];
          }
    if (g_eta) *g_eta = ge;
    if (g_xi) *g_xi = c_inv.transpose() * gz;
    return v;
  }
};

// Orthonormal pair: xi loses its eta component.
bool orthonormalize(Vec& eta, Vec& xi) {
  const double ne = eta.norm();
  if (ne == 0.0) return false;
  eta /= ne;
  xi -= xi.dot(eta) * eta;
  const double nx = xi.norm();
  if (nx < 1e-12) return false;
  xi /= nx;
  return true;
}

bool bundle_failure(ErrorKind k) {
  return k == ErrorKind::DiagonalSingularity || k == ErrorKind::DegenerateHessian ||
         k == ErrorKind::StencilOutOfDomain;
}

struct Sample {
  double value;
  Vec x, y, eta, xi;
};

// Projected descent on pairs of orthonormal unit vectors at fixed (x, y).
Sample descend(const MtwTensor& T, Sample s, int iters) {
  double step = 0.5;
  for (int it = 0; it < iters && step > 1e-14; ++it) {
    Vec ge, gx;
    T.value(s.eta, s.xi, &ge, &gx);
    // Tangent components on the sphere pair.
    ge -= ge.dot(s.eta) * s.eta;
    gx -= gx.dot(s.xi) * s.xi;
    const double gn = std::sqrt(ge.squaredNorm() + gx.squaredNorm());
    if (gn == 0.0) break;
    bool moved = false;
    while (step > 1e-14) {
      Vec e = s.eta - step * ge / gn, x = s.xi - step * gx / gn;
      if (orthonormalize(e, x)) {
        const double v = T.value(e, x);
        if (v < s.value) {
          s.eta = e;
          s.xi = x;
          s.value = v;
          moved = true;
          step = std::min(1.0, step * 2.0);
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return s;
}

// Alternates direction descent with a pattern search over x and y.
Sample refine_sample(const CostModel& model, Sample s, int iters) {
  const DomainPair& d = model.domain();
  const int n = model.dim();
  s = descend(MtwTensor(model, s.x, s.y), s, 50);
  double step = 0.1;
  for (int it = 0; it < iters && step > 1e-9; ++it) {
    bool improved = false;
    for (int k = 0; k < 2 * n && !improved; ++k) {
      for (double dir : {1.0, -1.0}) {
        Sample t = s;
        if (k < n) {
          t.x[k] += dir * step * d.X.diameter();
          t.x = d.X.project(t.x);
        } else {
          t.y[k - n] += dir * step * d.Y.diameter();
          t.y = d.Y.project(t.y);
        }
        try {
          MtwTensor T(model, t.x, t.y);
          t.value = T.value(t.eta, t.xi);
          t = descend(T, t, 20);
        } catch (const Error&) {
          continue;
        }
        if (t.value < s.value) {
          s = t;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return descend(MtwTensor(model, s.x, s.y), s, iters);
}

// -c(x, y1) + c(x, y0)
double m_at(const CostModel& model, const Vec& x, const Vec& y0, const Vec& y1) {
  return -model.c(x, y1) + model.c(x, y0);
}

// x_t on the c-segment w.r.t. y0, or nullopt when the solve fails or leaves X.
std::optional<Vec> segment_point(const CostModel& model, const Vec& y0, const Vec& p0, const Vec& p1, double t,
                                 const Vec& guess) {
  CExpResult r = c_exp_solve(model, y0, Focus::Y, Vec((1.0 - t) * p0 + t * p1), guess);
  if (!r.converged || r.outside > 0.0) return std::nullopt;
  return r.point;
}

}  // namespace

double mtw_value(const CostModel& model, const Vec& x, const Vec& y, const Vec& eta, const Vec& xi) {
  if (eta.norm() == 0.0 || xi.norm() == 0.0) throw Error(ErrorKind::InvalidArgument, "MTW directions must be nonzero");
  return MtwTensor(model, x, y).value(eta, xi);
}

std::string to_string(MtwVerdict v) {
  switch (v) {
    case MtwVerdict::Nonneg:
      return "nonneg";
    case MtwVerdict::Violated:
      return "violated";
    case MtwVerdict::Inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

MtwReport certify_mtw(const CostModel& model, int sample_budget, int refine_iters, std::uint64_t seed,
                      const CertifyOptions& opt) {
  MtwReport rep;
  rep.tolerance = opt.tolerance.value_or(model.analytic_order() >= 4 ? 1e-7 : 1e-3);
  const int n = model.dim();
  if (n < 2) return rep;  // no orthogonal pair of nonzero vectors

  Rng rng(seed);
  std::vector<Sample> best;  // lowest values, ascending
  double scale = 0.0;
  rep.min_value = kInf;
  for (int i = 0; i < sample_budget; ++i) {
    const Vec x = rng.point_in(model.domain().X), y = rng.point_in(model.domain().Y);
    Vec eta = rng.unit_vector(n), xi = rng.unit_vector(n);
    if (!orthonormalize(eta, xi)) continue;
    try {
      MtwTensor T(model, x, y);
      scale = std::max(scale, T.scale);
      Sample s{T.value(eta, xi), x, y, eta, xi};
      ++rep.samples;
      best.push_back(s);
      std::sort(best.begin(), best.end(), [](const Sample& a, const Sample& b) { return a.value < b.value; });
      if (static_cast<int>(best.size()) > std::max(1, opt.refine_starts)) best.pop_back();
    } catch (const Error& e) {
      if (!bundle_failure(e.kind())) throw;
      ++rep.skipped;
    }
  }
  if (best.empty()) return rep;

  for (Sample s : best) {
    if (refine_iters > 0) s = refine_sample(model, s, refine_iters);
    if (s.value < rep.min_value) {
      rep.min_value = s.value;
      rep.x = s.x;
      rep.y = s.y;
      rep.eta = s.eta;
      rep.xi = s.xi;
    }
  }
  // Exact zeros (quadratic, bilinear) come out as rounding noise around 0.
  const double noise = 1e-12 * std::max(1.0, scale);
  if (rep.min_value >= -noise) {
    rep.verdict = MtwVerdict::Nonneg;
  } else if (rep.min_value < -rep.tolerance) {
    rep.verdict = MtwVerdict::Violated;
  } else {
    rep.verdict = MtwVerdict::Inconclusive;
  }
  return rep;
}

double loeper_gap_at(const CostModel& model, const Vec& xt, const Vec& x0, const Vec& x1, const Vec& y0,
                     const Vec& y1) {
  return m_at(model, xt, y0, y1) - std::max(m_at(model, x0, y0, y1), m_at(model, x1, y0, y1));
}

double loeper_gap(const CostModel& model, const Vec& x0, const Vec& x1, const Vec& y0, const Vec& y1, double t) {
  const Vec p0 = -model.grad_y(x0, y0), p1 = -model.grad_y(x1, y0);
  const Vec xt = c_exp(model, y0, Focus::Y, Vec((1.0 - t) * p0 + t * p1), Vec((1.0 - t) * x0 + t * x1));
  return loeper_gap_at(model, xt, x0, x1, y0, y1);
}

double revalidate(const CostModel& model, const ViolationCertificate& cert) {
  return loeper_gap(model, cert.x0, cert.x1, cert.y0, cert.y1, cert.t);
}

namespace {

// Gap with every failure (segment leaving X, bundle errors) mapped to -inf.
double safe_gap(const CostModel& model, const ViolationCertificate& c) {
  if (!(c.t > 0.0 && c.t < 1.0)) return -kInf;
  try {
    const Vec p0 = -model.grad_y(c.x0, c.y0), p1 = -model.grad_y(c.x1, c.y0);
    auto xt = segment_point(model, c.y0, p0, p1, c.t, Vec((1.0 - c.t) * c.x0 + c.t * c.x1));
    if (!xt) return -kInf;
    return loeper_gap_at(model, *xt, c.x0, c.x1, c.y0, c.y1);
  } catch (const Error&) {
    return -kInf;
  }
}

// Derivative-free coordinate ascent on (x0, x1, y1, t); y0 stays fixed.
ViolationCertificate coordinate_ascent(const CostModel& model, ViolationCertificate c, int sweeps) {
  const DomainPair& d = model.domain();
  const int n = model.dim();
  double best = safe_gap(model, c);
  double step = 0.05;
  for (int sweep = 0; sweep < sweeps && step > 1e-10; ++sweep) {
    bool improved = false;
    for (int block = 0; block < 4; ++block) {
      const int len = block == 3 ? 1 : n;
      for (int i = 0; i < len; ++i) {
        for (double dir : {1.0, -1.0}) {
          ViolationCertificate trial = c;
          if (block == 0) {
            trial.x0[i] += dir * step * d.X.diameter();
            trial.x0 = d.X.project(trial.x0);
          } else if (block == 1) {
            trial.x1[i] += dir * step * d.X.diameter();
            trial.x1 = d.X.project(trial.x1);
          } else if (block == 2) {
            trial.y1[i] += dir * step * d.Y.diameter();
            trial.y1 = d.Y.project(trial.y1);
          } else {
            trial.t = std::clamp(trial.t + dir * step, 1e-6, 1.0 - 1e-6);
          }
          const double g = safe_gap(model, trial);
          if (g > best) {
            best = g;
            c = trial;
            improved = true;
            break;
          }
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  c.margin = best;
  return c;
}

}  // namespace

LoeperReport check_loeper(const CostModel& model, int sample_budget, int t_grid_size, std::uint64_t seed,
                          const LoeperOptions& opt) {
  LoeperReport rep;
  Rng rng(seed);
  const int nt = std::max(1, t_grid_size);
  std::vector<ViolationCertificate> top;  // best few raw violations
  double cmax = 0.0;
  for (int s = 0; s < sample_budget; ++s) {
    const Vec x0 = rng.point_in(model.domain().X), x1 = rng.point_in(model.domain().X);
    const Vec y0 = rng.point_in(model.domain().Y), y1 = rng.point_in(model.domain().Y);
    double m0, m1;
    Vec p0, p1;
    try {
      m0 = m_at(model, x0, y0, y1);
      m1 = m_at(model, x1, y0, y1);
      p0 = -model.grad_y(x0, y0);
      p1 = -model.grad_y(x1, y0);
      cmax = std::max({cmax, std::fabs(model.c(x0, y0)), std::fabs(model.c(x1, y1))});
    } catch (const Error& e) {
      if (!bundle_failure(e.kind())) throw;
      ++rep.skipped_segments;
      continue;
    }
    Vec guess = x0;
    for (int k = 1; k <= nt; ++k) {
      const double t = static_cast<double>(k) / (nt + 1);
      std::optional<Vec> xt;
      try {
        xt = segment_point(model, y0, p0, p1, t, guess);
      } catch (const Error& e) {
        if (!bundle_failure(e.kind())) throw;
      }
      if (!xt) {
        ++rep.skipped_segments;
        continue;
      }
      guess = *xt;
      ++rep.evaluated;
      const double gap = m_at(model, *xt, y0, y1) - std::max(m0, m1);
      rep.best_gap = std::max(rep.best_gap, gap);
      if (gap > 0.0) {
        top.push_back({x0, x1, y0, y1, t, gap});
        std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.margin > b.margin; });
        if (top.size() > 3) top.pop_back();
      }
    }
  }
  const double floor = opt.violation_floor * (1.0 + cmax);
  for (const auto& raw : top) {
    ViolationCertificate c = coordinate_ascent(model, raw, opt.refine_sweeps);
    if (c.margin < raw.margin) c = raw;
    c.margin = safe_gap(model, c);
    if (c.margin > floor && (!rep.certificate || c.margin > rep.certificate->margin)) rep.certificate = c;
  }
  if (rep.certificate) rep.best_gap = std::max(rep.best_gap, rep.certificate->margin);
  return rep;
}

std::string certificate_csv_header(int n) {
  std::ostringstream os;
  for (const char* name : {"x0", "x1", "y0", "y1"})
    for (int i = 0; i < n; ++i) os << name << '_' << i << ',';
  os << "t,margin";
  return os.str();
}

std::string certificate_csv_row(const ViolationCertificate& cert) {
  std::ostringstream os;
  char buf[40];
  for (const Vec* v : {&cert.x0, &cert.x1, &cert.y0, &cert.y1})
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", (*v)[i]);
      os << buf;
    }
  std::snprintf(buf, sizeof buf, "%.17g,", cert.t);
  os << buf;
  std::snprintf(buf, sizeof buf, "%.17g", cert.margin);
  os << buf;
  return os.str();
}

QQconvReport estimate_qqconv(const CostModel& model, int sample_budget, std::uint64_t seed) {
  QQconvReport rep;
  rep.C = 1.0;
  Rng rng(seed);
  double worst = 1.0;
  for (int s = 0; s < sample_budget && !rep.unbounded; ++s) {
    const Vec x0 = rng.point_in(model.domain().X), x1 = rng.point_in(model.domain().X);
    const Vec y0 = rng.point_in(model.domain().Y), y = rng.point_in(model.domain().Y);
    const double t = rng.uniform(1e-3, 1.0);
    try {
      const Vec p0 = -model.grad_y(x0, y0), p1 = -model.grad_y(x1, y0);
      auto xt = segment_point(model, y0, p0, p1, t, Vec((1.0 - t) * x0 + t * x1));
      if (!xt) continue;
      ++rep.tuples;
      const double base = m_at(model, x0, y0, y);
      const double lhs = m_at(model, *xt, y0, y) - base;
      const double rhs = m_at(model, x1, y0, y) - base;
      const double noise = 1e-9 * (1.0 + std::fabs(model.c(x0, y)) + std::fabs(model.c(x0, y0)));
      if (lhs <= noise) continue;
      bool take = false;
      double ratio = 0.0;
      if (rhs <= noise) {
        rep.unbounded = true;
        take = true;
      } else {
        ratio = lhs / (t * rhs);
        take = ratio > worst;
      }
      if (take) {
        worst = std::max(worst, ratio);
        rep.x0 = x0;
        rep.x1 = x1;
        rep.y0 = y0;
        rep.y = y;
        rep.t = t;
      }
    } catch (const Error& e) {
      if (!bundle_failure(e.kind())) throw;
    }
  }
  rep.C = rep.unbounded ? kInf : worst;
  return rep;
}

ChordProbeReport chord_equivalence_probe(const CostModel& model, int sample_budget, std::uint64_t seed,
                                         int t_grid_size) {
  ChordProbeReport rep;
  Rng rng(seed);
  auto ylat = std::make_shared<const Lattice>(Lattice::uniform(model.domain().Y, Lattice::default_count(model.dim())));
  for (int s = 0; s < sample_budget; ++s) {
    const Vec x0 = rng.point_in(model.domain().X), x1 = rng.point_in(model.domain().X);
    const Vec y = rng.point_in(model.domain().Y);
    const double h = rng.uniform(-1.0, 1.0);
    try {
      const LiftedPoint a{x0, -model.c(x0, y) + h}, b{x1, -model.c(x1, y) + h};
      Chord chord(model, a, b, ylat);
      const Vec p0 = -model.grad_y(x0, y), p1 = -model.grad_y(x1, y);
      for (int k = 0; k < t_grid_size; ++k) {
        const double t = t_grid_size == 1 ? 0.5 : static_cast<double>(k) / (t_grid_size - 1);
        std::optional<Vec> xt;
        if (k == 0) {
          xt = x0;
        } else if (k == t_grid_size - 1) {
          xt = x1;
        } else {
          xt = segment_point(model, y, p0, p1, t, Vec((1.0 - t) * x0 + t * x1));
        }
        if (!xt) continue;
        ++rep.tuples;
        const double dev = std::fabs(chord(*xt) - (-model.c(*xt, y) + h));
        if (dev > rep.max_deviation || rep.x0.size() == 0) {
          rep.max_deviation = std::max(rep.max_deviation, dev);
          rep.x0 = x0;
          rep.x1 = x1;
          rep.y = y;
          rep.h = h;
          rep.t = t;
        }
      }
    } catch (const Error& e) {
      if (!bundle_failure(e.kind())) throw;
    }
  }
  return rep;
}

}  // namespace cconv
