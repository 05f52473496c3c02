#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cconv/chord.hpp"
#include "cconv/constants.hpp"
#include "cconv/convexity.hpp"
#include "cconv/errors.hpp"
#include "cconv/geometry.hpp"
#include "cconv/rng.hpp"

using namespace cconv;

namespace {

Vec v1(double a) { return (Vec(1) << a).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Region square(double lo, double hi) { return Region::box(v2(lo, lo), v2(hi, hi)); }
Region interval(double lo, double hi) { return Region::box(v1(lo), v1(hi)); }

// Dense grid over Y: for each y the best height is min_i (u_i + c(x_i, y)).
double brute_chord(const CostModel& m, const LiftedPoint& a, const LiftedPoint& b, const Vec& x, int per_axis) {
  const Region& Y = m.domain().Y;
  double best = -1e300;
  const int n = Y.dim();
  std::vector<int> idx(size_t(n), 0);
  while (true) {
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = Y.lo()[i] + (Y.hi()[i] - Y.lo()[i]) * idx[size_t(i)] / (per_axis - 1);
    const double h = std::min(a.u + m.c(a.x, y), b.u + m.c(b.x, y));
    best = std::max(best, h - m.c(x, y));
    int d = 0;
    while (d < n && ++idx[size_t(d)] == per_axis) idx[size_t(d++)] = 0;
    if (d == n) break;
  }
  return best;
}

LiftedPoint random_lift(Rng& rng, const Region& X, double amp) { return {rng.point_in(X), rng.uniform(-amp, amp)}; }

}  // namespace

TEST_CASE("worked quadratic chord") {
  QuadraticCost quad(DomainPair(square(-1, 2), square(-1, 2)));
  const LiftedPoint a{v2(0, 0), 0.0}, b{v2(1, 0), 0.0};
  const Vec x = v2(0.5, 0.0);
  const double f = chord_eval(quad, a, b, x);
  CHECK(f == doctest::Approx(0.125).epsilon(1e-4));
  CHECK(std::fabs(f - brute_chord(quad, a, b, x, 601)) <= 1e-4);
  // phi + |x|^2/2 is the lifted chord: along the segment F = t(1-t)/2.
  for (double t : {0.1, 0.25, 0.8}) CHECK(chord_eval(quad, a, b, v2(t, 0.0)) == doctest::Approx(0.5 * t * (1 - t)));

  auto cr = connect(quad, a, b);
  CHECK(cr.u0p == doctest::Approx(0.0));
  CHECK(cr.u1p == doctest::Approx(0.0));
  REQUIRE(cr.touching);
  CHECK(cr.touching->y[0] == doctest::Approx(0.5));
  CHECK(cr.residual <= 1e-6);
  CHECK(segment_identity_check(quad, a, b, *cr.touching, 33) <= 1e-4);
}

TEST_CASE("chord against the brute-force oracle") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    LiftedPoint a = random_lift(rng, power.domain().X, 2.0), b = random_lift(rng, power.domain().X, 2.0);
    const Vec x = rng.point_in(power.domain().X);
    const double f = chord_eval(power, a, b, x);
    const double brute = brute_chord(power, a, b, x, 401);
    CHECK(f >= brute - 1e-9);
    CHECK(f <= brute + 1e-3);
  }
}

TEST_CASE("endpoint dominance, connect and idempotence") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  Rng rng(3);
  auto ylat = std::make_shared<const Lattice>(Lattice::uniform(power.domain().Y, 32));
  for (int i = 0; i < 100; ++i) {
    LiftedPoint a = random_lift(rng, power.domain().X, 3.0), b = random_lift(rng, power.domain().X, 3.0);
    Chord chord(power, a, b, ylat);
    const double fa = chord(a.x), fb = chord(b.x);
    CHECK(fa <= a.u + 1e-10);
    CHECK(fb <= b.u + 1e-10);

    Chord connected(power, {a.x, fa}, {b.x, fb}, ylat);
    for (int j = 0; j < 3; ++j) {
      const Vec x = rng.point_in(power.domain().X);
      CHECK(std::fabs(connected(x) - chord(x)) <= 1e-6);
    }
    auto touch = find_touching(power, {a.x, fa}, {b.x, fb}, *ylat);
    REQUIRE(touch);
    CHECK(std::fabs(c_affine_eval(power, *touch, a.x) - fa) <= 1e-6);
    CHECK(std::fabs(c_affine_eval(power, *touch, b.x) - fb) <= 1e-6);
  }
}

TEST_CASE("endpoints on a common c-affine are a fixed point") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  const Vec y = v2(2.4, 2.3);
  const CAffine f{y, 0.5};
  const LiftedPoint a{v2(0.1, 0.2), c_affine_eval(power, f, v2(0.1, 0.2))};
  const LiftedPoint b{v2(0.9, 0.6), c_affine_eval(power, f, v2(0.9, 0.6))};
  auto cr = connect(power, a, b);
  CHECK(cr.u0p == doctest::Approx(a.u).epsilon(1e-10));
  CHECK(cr.u1p == doctest::Approx(b.u).epsilon(1e-10));
  REQUIRE(cr.touching);
  CHECK(cr.residual <= 1e-6);
}

TEST_CASE("ordered chords: monotonicity, shift, strict ordering") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  QuadraticCost quad(DomainPair(square(-1, 1), square(-1, 1)));
  for (const CostModel* m : {static_cast<const CostModel*>(&power), static_cast<const CostModel*>(&quad)}) {
    auto ylat = std::make_shared<const Lattice>(Lattice::uniform(m->domain().Y, 32));
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      LiftedPoint a = random_lift(rng, m->domain().X, 1.0), b = random_lift(rng, m->domain().X, 1.0);
      LiftedPoint a2{a.x, a.u - rng.uniform(0, 0.5)}, b2{b.x, b.u - rng.uniform(0, 0.5)};
      const double lambda = rng.uniform(-3, 3);
      Chord f(*m, a, b, ylat), lower(*m, a2, b2, ylat), shifted(*m, {a.x, a.u + lambda}, {b.x, b.u + lambda}, ylat);
      for (int j = 0; j < 4; ++j) {
        const Vec x = rng.point_in(m->domain().X);
        const double fx = f(x);
        CHECK(lower(x) <= fx + 1e-8);
        CHECK(std::fabs(shifted(x) - fx - lambda) <= 1e-8);
      }
    }
  }

  // Quadratic cost: lowering u1 strictly lowers the chord inside the segment.
  auto ylat = std::make_shared<const Lattice>(Lattice::uniform(quad.domain().Y, 32));
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    LiftedPoint a{rng.point_in(Region::box(v2(-0.8, -0.8), v2(0, 0.8))), rng.uniform(-0.2, 0.2)};
    LiftedPoint b{rng.point_in(Region::box(v2(0.1, -0.8), v2(0.8, 0.8))), rng.uniform(-0.2, 0.2)};
    auto cr = connect(quad, a, b);
    LiftedPoint ac{a.x, cr.u0p}, bc{b.x, cr.u1p}, bl{b.x, cr.u1p - 0.05};
    Chord f(quad, ac, bc, ylat), g(quad, ac, bl, ylat);
    for (double t : {0.25, 0.5, 0.75}) {
      const Vec xt = (1 - t) * a.x + t * b.x;  // quadratic c-segments are straight
      CHECK(g(xt) < f(xt) - 1e-6);
    }
  }
}

TEST_CASE("chord Lipschitz bound") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  const double lip_c = estimate_constants(power, 500, 0).lip_c;
  Lattice xlat = Lattice::uniform(power.domain().X, 10);
  ChordOptions co;
  co.y_count = 24;
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    LiftedPoint a = random_lift(rng, power.domain().X, 3.0), b = random_lift(rng, power.domain().X, 3.0);
    GridFunction s = chord_surface(power, a, b, xlat, co);
    double lip = 0.0;
    for (int k = 0; k < xlat.size(); ++k) {
      for (int nb : xlat.neighbors(k)) lip = std::max(lip, std::fabs(s.at(k) - s.at(nb)) / (xlat.node(k) - xlat.node(nb)).norm());
    }
    CHECK(lip <= lip_c * 1.05);
  }
}

TEST_CASE("touching residuals under power cost") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  Rng rng(21);
  ChordOptions co;
  co.y_count = 32;
  for (int i = 0; i < 100; ++i) {
    LiftedPoint a = random_lift(rng, power.domain().X, 3.0), b = random_lift(rng, power.domain().X, 3.0);
    auto cr = connect(power, a, b, co);
    CHECK(cr.residual <= 1e-6);
    CHECK(cr.u0p <= a.u + 1e-10);
    CHECK(cr.u1p <= b.u + 1e-10);
  }
}

TEST_CASE("segment identity fails at a Loeper-violating configuration") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  // Search for x0, x1, y0, y1 where -c(., y1) + c(., y0) peaks inside the c-segment w.r.t. y0.
  Rng rng(4);
  double best = 0.0;
  Vec bx0, bx1, by0, by1;
  std::vector<double> ts;
  for (int i = 1; i < 16; ++i) ts.push_back(i / 16.0);
  for (int s = 0; s < 3000; ++s) {
    const Vec x0 = rng.point_in(power.domain().X), x1 = rng.point_in(power.domain().X);
    const Vec y0 = rng.point_in(power.domain().Y), y1 = rng.point_in(power.domain().Y);
    std::vector<Vec> seg;
    try {
      seg = c_segment(power, y0, x0, x1, ts);
    } catch (const Error&) {
      continue;
    }
    auto m = [&](const Vec& x) { return -power.c(x, y1) + power.c(x, y0); };
    const double ends = std::max(m(x0), m(x1));
    for (const Vec& xt : seg) {
      if (m(xt) - ends > best) {
        best = m(xt) - ends;
        bx0 = x0, bx1 = x1, by0 = y0, by1 = y1;
      }
    }
  }
  REQUIRE(best > 1e-3);
  const CAffine touching{by0, 0.0};
  const LiftedPoint a{bx0, c_affine_eval(power, touching, bx0)}, b{bx1, c_affine_eval(power, touching, bx1)};
  CHECK(segment_identity_check(power, a, b, touching, 33) > 1e-4);
}

TEST_CASE("alternative c-convexity") {
  PowerCost power(DomainPair(square(0, 1), square(2, 3)), 4.0);
  Lattice xlat = Lattice::uniform(power.domain().X, 16);
  AltConvexityOptions ao;
  ao.pair_budget = 6;
  ao.y_count = 32;
  GridFunction aff = sample_c_affine(power, {v2(2.3, 2.8), 0.2}, xlat);
  auto r = is_alternative_c_convex(power, aff, ao);
  CHECK(r.holds);
  CHECK(r.triples == 6 * xlat.size());

  // c-convex samples are alternative c-convex
  Lattice ylat = Lattice::uniform(power.domain().Y, 10);
  QuadraticCost quad(DomainPair(square(-1, 1), square(-1, 1)));
  for (const CostModel* m : {static_cast<const CostModel*>(&quad), static_cast<const CostModel*>(&power)}) {
    Lattice xl = Lattice::uniform(m->domain().X, 12);
    Lattice yl = Lattice::uniform(m->domain().Y, 10);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      std::vector<double> v(size_t(yl.size()));
      for (double& d : v) d = rng.uniform(-2, 2);
      GridFunction phi = c_transform(*m, GridFunction('Y', yl, v), xl);
      AltConvexityOptions o;
      o.pair_budget = 4;
      o.seed = seed;
      o.y_count = 24;
      auto rep = is_alternative_c_convex(*m, phi, o);
      CHECK(rep.holds);
    }
  }

  // concave bump under quadratic cost in 1D
  QuadraticCost q1(DomainPair(interval(-1, 1), interval(-1, 1)));
  Lattice l1 = Lattice::uniform(interval(-1, 1), 65);
  std::vector<double> bump;
  for (int k = 0; k < l1.size(); ++k) bump.push_back(-l1.node(k).squaredNorm());
  AltConvexityOptions o1;
  o1.pair_budget = 20;
  auto rb = is_alternative_c_convex(q1, GridFunction('X', l1, bump), o1);
  CHECK_FALSE(rb.holds);
  CHECK(rb.worst_gap > 0.05);
}

TEST_CASE("chord grows as Y is truncated less") {
  // 1D power cost; Y overlaps X here, only values of c are needed.
  double prev = -1e300;
  for (double R : {2.0, 4.0, 8.0}) {
    PowerCost power(DomainPair(interval(-1, 1), interval(-R, R)), 4.0);
    ChordOptions co;
    co.y_count = 2049;
    const double f = chord_eval(power, {v1(-0.5), 0.0}, {v1(0.0), 0.0}, v1(0.5), co);
    CHECK(f > prev);
    prev = f;
  }
  CHECK(prev > 1.0);
}
