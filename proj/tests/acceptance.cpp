// Acceptance suite: one PASS/FAIL line per criterion, exit status = number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "cconv/chord.hpp"
#include "cconv/cli.hpp"
#include "cconv/constants.hpp"
#include "cconv/convexity.hpp"
#include "cconv/counterexample.hpp"
#include "cconv/errors.hpp"
#include "cconv/mtw.hpp"
#include "cconv/rng.hpp"

using namespace cconv;
namespace fs = std::filesystem;

namespace {

Vec v1(double a) { return (Vec(1) << a).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Region square(double lo, double hi) { return Region::box(v2(lo, lo), v2(hi, hi)); }
Region interval(double lo, double hi) { return Region::box(v1(lo), v1(hi)); }

struct Line {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

int failures = 0;

void report(int id, const std::string& name, const std::function<Line()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Line l;
  try {
    l = body();
  } catch (const std::exception& e) {
    l.pass = false;
    l.detail = std::string("threw ") + e.what();
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!l.pass) ++failures;
  std::printf("[%s] criterion %d: %s | %s (%.1fs)\n", l.pass ? "PASS" : "FAIL", id, name.c_str(), l.detail.c_str(), sec);
  std::fflush(stdout);
}

double lattice_lip(const GridFunction& g) {
  const Lattice& l = g.lattice;
  double lip = 0.0;
  for (int k = 0; k < l.size(); ++k) {
    for (int nb : l.neighbors(k)) lip = std::max(lip, std::fabs(g.at(k) - g.at(nb)) / (l.node(k) - l.node(nb)).norm());
  }
  return lip;
}

// ---------------------------------------------------------------------------

Line degenerate_tensor() {
  Line l;
  const DomainPair dom(square(-1, 1), square(-1, 1));
  QuadraticCost quad(dom);
  BilinearCost bil(dom);
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec x = rng.point_in(dom.X), y = rng.point_in(dom.Y);
    Vec eta = rng.unit_vector(2), xi = rng.unit_vector(2);
    xi -= xi.dot(eta) * eta;
    if (xi.norm() < 1e-6) continue;
    xi.normalize();
    worst = std::max({worst, std::fabs(mtw_value(quad, x, y, eta, xi)), std::fabs(mtw_value(bil, x, y, eta, xi))});
  }
  l.require(worst <= 1e-6, "max |MTW| " + num(worst));
  const auto vq = certify_mtw(quad, 1000, 50, 0).verdict, vb = certify_mtw(bil, 1000, 50, 0).verdict;
  l.require(vq == MtwVerdict::Nonneg, "quadratic verdict " + to_string(vq));
  l.require(vb == MtwVerdict::Nonneg, "bilinear verdict " + to_string(vb));
  if (l.pass) l.detail = "max |MTW| " + num(worst) + " over 1000 configurations, both verdicts nonneg";
  return l;
}

Line loeper_suite() {
  Line l;
  const DomainPair overlap(square(-1, 1), square(-1, 1));
  QuadraticCost quad(overlap);
  BilinearCost bil(overlap);
  SqrtCost sq(overlap);
  int clean = 0;
  for (const CostModel* m : {static_cast<const CostModel*>(&quad), static_cast<const CostModel*>(&bil),
                             static_cast<const CostModel*>(&sq)}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto r = check_loeper(*m, 10000, 9, seed);
      l.require(!r.certificate, m->name() + " seed " + std::to_string(seed) + " produced a certificate");
      clean += !r.certificate;
    }
  }
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  auto r = check_loeper(power, 10000, 9, 1);
  l.require(r.certificate.has_value(), "power cost: no certificate");
  if (r.certificate) {
    const double re = revalidate(power, *r.certificate);
    l.require(r.certificate->margin > 1e-6, "power margin " + num(r.certificate->margin));
    l.require(std::fabs(re - r.certificate->margin) <= 1e-8, "revalidation differs by " + num(re - r.certificate->margin));
    if (l.pass) {
      l.detail = std::to_string(clean) + "/9 Loeper runs clean; power margin " + num(r.certificate->margin) +
                 ", revalidated to " + num(std::fabs(re - r.certificate->margin));
    }
  }
  return l;
}

Line chord_oracle() {
  Line l;
  QuadraticCost quad(DomainPair(square(-1, 2), square(-1, 2)));
  const LiftedPoint a{v2(0, 0), 0.0}, b{v2(1, 0), 0.0};
  const Vec x = v2(0.5, 0.0);
  const double f = chord_eval(quad, a, b, x);
  // (y, h) grid: h on a 1e-6 grid below the largest admissible height.
  const int n = 601;
  const double dh = 1e-6;
  double brute = -1e300;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec y = v2(-1 + 3.0 * i / (n - 1), -1 + 3.0 * j / (n - 1));
      const double hmax = std::min(a.u + quad.c(a.x, y), b.u + quad.c(b.x, y));
      const double h = std::floor(hmax / dh) * dh;
      brute = std::max(brute, -quad.c(x, y) + h);
    }
  }
  l.require(std::fabs(f - 0.125) <= 1e-4, "F(0.5,0) = " + num(f));
  l.require(std::fabs(f - brute) <= 1e-4, "brute-force oracle " + num(brute));
  auto cr = connect(quad, a, b);
  l.require(cr.touching.has_value(), "no touching c-affine");
  double id = 1.0;
  if (cr.touching) {
    id = segment_identity_check(quad, {a.x, cr.u0p}, {b.x, cr.u1p}, *cr.touching, 33);
    l.require(id <= 1e-4, "segment identity " + num(id));
  }
  if (l.pass) l.detail = "F = " + num(f) + ", oracle " + num(brute) + ", segment identity " + num(id);
  return l;
}

Line property_suites() {
  Line l;
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  QuadraticCost quad(DomainPair(square(-1, 1), square(-1, 1)));
  const std::vector<const CostModel*> costs{&power, &quad};
  double mono = 0, shift = 0, idem = 0, touch = 0, lip_ratio = 0;
  int n_touch = 0, n_lip = 0, n_cc = 0, n_alt = 0, cc_fail = 0, alt_fail = 0;

  for (const CostModel* m : costs) {
    auto ylat = std::make_shared<const Lattice>(Lattice::uniform(m->domain().Y, 32));
    const double lip_c = estimate_constants(*m, 2000, 0).lip_c;
    Rng rng(7);
    auto lift = [&](double amp) { return LiftedPoint{rng.point_in(m->domain().X), rng.uniform(-amp, amp)}; };
    for (int i = 0; i < 100; ++i) {
      LiftedPoint a = lift(1.0), b = lift(1.0);
      LiftedPoint a2{a.x, a.u - rng.uniform(0, 0.5)}, b2{b.x, b.u - rng.uniform(0, 0.5)};
      const double lambda = rng.uniform(-3, 3);
      Chord f(*m, a, b, ylat), lower(*m, a2, b2, ylat), shifted(*m, {a.x, a.u + lambda}, {b.x, b.u + lambda}, ylat);
      for (int j = 0; j < 4; ++j) {
        const Vec x = rng.point_in(m->domain().X);
        const double fx = f(x);
        mono = std::max(mono, lower(x) - fx);
        shift = std::max(shift, std::fabs(shifted(x) - fx - lambda));
      }

      // Actual F: replacing u_i by F(x_i) leaves the chord unchanged.
      Chord actual(*m, {a.x, f(a.x)}, {b.x, f(b.x)}, ylat);
      for (int j = 0; j < 3; ++j) {
        const Vec x = rng.point_in(m->domain().X);
        idem = std::max(idem, std::fabs(actual(x) - f(x)));
      }

      ChordOptions co;
      co.y_count = 32;
      try {
        auto cr = connect(*m, a, b, co);
        if (cr.touching) {
          touch = std::max(touch, cr.residual);
          ++n_touch;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TouchingNotFound) throw;
      }
    }

    // Chord Lipschitz on a coarse lattice.
    Lattice xl10 = Lattice::uniform(m->domain().X, 10);
    ChordOptions co;
    co.y_count = 24;
    for (int i = 0; i < 100; ++i) {
      LiftedPoint a = lift(3.0), b = lift(3.0);
      lip_ratio = std::max(lip_ratio, lattice_lip(chord_surface(*m, a, b, xl10, co)) / lip_c);
      ++n_lip;
    }

    // c-transforms: Lipschitz, c-convex, alternative c-convex.
    Lattice xl = Lattice::uniform(m->domain().X, 12), yl = Lattice::uniform(m->domain().Y, 10);
    EnvelopeOptions eo;
    eo.y_count = 16;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng r2(seed);
      std::vector<double> v(size_t(yl.size()));
      for (double& d : v) d = r2.uniform(-2, 2);
      GridFunction phi = c_transform(*m, GridFunction('Y', yl, v), xl);
      lip_ratio = std::max(lip_ratio, lattice_lip(phi) / lip_c);
      ++n_lip;
      auto env = c_envelope(*m, phi, eo);
      cc_fail += !env.is_c_convex;
      ++n_cc;
      AltConvexityOptions ao;
      ao.pair_budget = 4;
      ao.seed = seed;
      ao.y_count = 24;
      alt_fail += !is_alternative_c_convex(*m, phi, ao).holds;
      ++n_alt;
    }
  }
  l.require(mono <= 1e-8, "ordered-F monotonicity violated by " + num(mono));
  l.require(shift <= 1e-8, "shift equivariance error " + num(shift));
  l.require(idem <= 1e-6, "idempotence error " + num(idem));
  l.require(n_touch >= 100 && touch <= 1e-6, "touching residual " + num(touch) + " over " + std::to_string(n_touch));
  l.require(lip_ratio <= 1.05, "Lipschitz ratio " + num(lip_ratio));
  l.require(cc_fail == 0, std::to_string(cc_fail) + " c-transforms fail is_c_convex");
  l.require(alt_fail == 0, std::to_string(alt_fail) + " c-convex samples fail alternative c-convexity");
  if (l.pass) {
    l.detail = "monotone " + num(mono) + ", shift " + num(shift) + ", idempotence " + num(idem) + ", touching " +
               num(touch) + " (" + std::to_string(n_touch) + "), Lipschitz/lip_c " + num(lip_ratio) + ", " +
               std::to_string(n_cc) + " c-convex and " + std::to_string(n_alt) + " alternative checks";
  }
  return l;
}

// Lower convex hull of (xs, ys) evaluated back at xs (monotone chain).
std::vector<double> lower_hull(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<size_t> h;
  for (size_t i = 0; i < xs.size(); ++i) {
    while (h.size() >= 2) {
      const size_t a = h[h.size() - 2], b = h.back();
      const double cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
      if (cross <= 0) h.pop_back();
      else break;
    }
    h.push_back(i);
  }
  std::vector<double> out(xs.size());
  size_t s = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    while (s + 1 < h.size() && xs[h[s + 1]] < xs[i]) ++s;
    if (s + 1 == h.size()) {
      out[i] = ys[h[s]];
      continue;
    }
    const size_t a = h[s], b = h[s + 1];
    const double t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
    out[i] = (1 - t) * ys[a] + t * ys[b];
  }
  return out;
}

Line envelope_check() {
  Line l;
  QuadraticCost quad(DomainPair(interval(-1, 1), interval(-1, 1)));
  Lattice xl = Lattice::uniform(interval(-1, 1), 257);
  double worst = 0.0;
  for (auto bump : {std::function<double(double)>([](double x) { return 1.0 - 2.0 * x * x; }),
                    std::function<double(double)>([](double x) { return 0.8 * std::exp(-4.0 * x * x); })}) {
    std::vector<double> vals, xs, ys;
    for (int k = 0; k < xl.size(); ++k) {
      const double x = xl.node(k)[0];
      vals.push_back(bump(x));
      xs.push_back(x);
      ys.push_back(bump(x) + 0.5 * x * x);
    }
    auto env = c_envelope(quad, GridFunction('X', xl, vals));
    auto hull = lower_hull(xs, ys);
    for (size_t k = 0; k < xs.size(); ++k) {
      worst = std::max(worst, std::fabs(env.envelope.values[k] - (hull[k] - 0.5 * xs[k] * xs[k])));
    }
  }
  l.require(worst <= 1e-3, "nodewise error " + num(worst));
  if (l.pass) l.detail = "max nodewise error " + num(worst) + " against the convex-hull oracle (2 bumps, 257 nodes)";
  return l;
}

Line counterexample_pipeline() {
  Line l;
  PowerCost power(DomainPair(square(0, 1), Region::box(v2(1.1, -0.5), v2(2.1, 1.5))), 4.0);
  SearchOptions so;
  so.triple_budget = 10000;
  so.levels = 6;
  auto res = search_counterexample(power, 3, so);
  std::string levels;
  for (size_t i = 0; i < res.attempts.size(); ++i) {
    const auto& a = res.attempts[i];
    levels += " L" + std::to_string(i) + ":";
    if (a.status != "ok") {
      levels += "capempty";
      continue;
    }
    levels += "alt " + std::string(a.report.alt_holds ? "ok" : "fail") + " gap " + num(a.report.c_convex_gap) +
              " vs eps/2 " + num(0.5 * a.params.epsilon) + (a.report.subdiff_empty_at ? " subdiff empty" : "");
  }
  if (res.success) {
    const auto& r = res.attempts[size_t(*res.success)].report;
    l.require(r.alt_triples >= 10000, "only " + std::to_string(r.alt_triples) + " triples");
    l.require(r.subdiff_empty_at.has_value(), "no empty c-subdifferential on the cap");
  } else {
    l.require(false, "no level reached verdict = true;" + levels);
  }

  const RunConfig q = RunConfig::parse("cost.name = quadratic\n");
  RunOutcome out = run("counterexample", q);
  l.require(out.exit_status == 2 && out.report["counterexample"]["status"] == "NoViolationFound",
            "quadratic cost did not exit with NoViolationFound");
  if (l.pass) l.detail = "verdict true at level " + std::to_string(*res.success) + ";" + levels;
  return l;
}

Line determinism() {
  Line l;
  const std::string small =
      "budgets.constants = 300\nbudgets.mtw = 300\nbudgets.mtw_refine = 10\nbudgets.loeper = 1000\n"
      "budgets.qqconv = 300\nbudgets.chord_probe = 20\nbudgets.triples = 2000\ncounterexample.levels = 2\n"
      "grid.x_count = 32\nbudgets.alt_pairs = 2\nseed = 5\n";
  int runs = 0;
  for (const std::string& cmd : commands()) {
    std::string bodies[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = fs::temp_directory_path() / ("cconv_accept_" + cmd + "_" + std::to_string(rep));
      fs::remove_all(dir);
      RunConfig c = RunConfig::parse(small);
      c.set("output_dir", dir.string());
      std::ostringstream out, err;
      const int rc = run_to_directory(cmd, c, out, err);
      l.require(rc == 0 || rc == 2, cmd + " exited " + std::to_string(rc) + ": " + err.str());
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename() == "timings.json") continue;
        std::ifstream f(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        bodies[rep] += e.path().filename().string() + "\n" + ss.str();
      }
    }
    ++runs;
    l.require(!bodies[0].empty() && bodies[0] == bodies[1], cmd + " output differs between runs");
  }
  if (l.pass) l.detail = std::to_string(runs) + " commands, reports and artifacts byte-identical across two runs";
  return l;
}

Line intro_example() {
  Line l;
  std::string vals1, vals2;
  double prev = -1e300;
  for (double R : {2.0, 4.0, 8.0}) {
    PowerCost p1(DomainPair(interval(-1, 1), interval(-R, R)), 4.0);
    ChordOptions co;
    co.y_count = 2049;
    const double f = chord_eval(p1, {v1(-0.5), 0.0}, {v1(0.0), 0.0}, v1(0.5), co);
    l.require(f > prev, "1D chord did not grow at R = " + num(R));
    prev = f;
    vals1 += " " + num(f);
  }
  prev = -1e300;
  for (double R : {2.0, 4.0, 8.0}) {
    PowerCost p2(DomainPair(square(-1, 1), square(-R, R)), 4.0);
    const double f = chord_eval(p2, {v2(-1, 0), 0.0}, {v2(1, 0), 0.0}, v2(0, 0));
    const double exact = 1.0 + 2.0 * R * R;  // attained at y = (0, R)
    l.require(f > prev, "2D chord did not grow at R = " + num(R));
    l.require(std::fabs(f - exact) <= 1e-6 * exact, "2D chord " + num(f) + " vs " + num(exact));
    prev = f;
    vals2 += " " + num(f);
  }
  if (l.pass) l.detail = "1D F(0.5):" + vals1 + "; 2D F(0) = 1 + 2R^2:" + vals2;
  return l;
}

}  // namespace

int main() {
  report(1, "degenerate MTW tensor", degenerate_tensor);
  report(2, "Loeper suite", loeper_suite);
  report(3, "chord oracle", chord_oracle);
  report(4, "chord and transform property suites", property_suites);
  report(5, "envelope vs convex hull", envelope_check);
  report(6, "counterexample pipeline", counterexample_pipeline);
  report(7, "CLI determinism", determinism);
  report(8, "chord growth under Y truncation", intro_example);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
