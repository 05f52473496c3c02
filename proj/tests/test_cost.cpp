#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cconv/constants.hpp"
#include "cconv/cost.hpp"
#include "cconv/errors.hpp"
#include "cconv/rng.hpp"

using namespace cconv;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

DomainPair square_pair(double xlo, double xhi, double ylo, double yhi) {
  return DomainPair(Region::box(v2(xlo, xlo), v2(xhi, xhi)), Region::box(v2(ylo, ylo), v2(yhi, yhi)));
}

// Oracle: plain central differences, written independently of the library's stencils.
Vec fd_grad(const CostModel& m, const Vec& x, const Vec& y, bool wrt_x, double h) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec e = Vec::Zero(x.size());
    e[i] = h;
    g[i] = wrt_x ? (m.c(x + e, y) - m.c(x - e, y)) / (2 * h) : (m.c(x, y + e) - m.c(x, y - e)) / (2 * h);
  }
  return g;
}

Mat fd_mixed(const CostModel& m, const Vec& x, const Vec& y, double h) {
  const int n = static_cast<int>(x.size());
  Mat out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec ei = Vec::Zero(n), ej = Vec::Zero(n);
      ei[i] = h;
      ej[j] = h;
      out(i, j) = (m.c(x + ei, y + ej) - m.c(x + ei, y - ej) - m.c(x - ei, y + ej) + m.c(x - ei, y - ej)) / (4 * h * h);
    }
  }
  return out;
}

// D^2_yx c: differentiate first in y then in x, transposed layout (j, i).
Mat fd_mixed_yx(const CostModel& m, const Vec& x, const Vec& y, double h) {
  const int n = static_cast<int>(x.size());
  Mat out(n, n);
  for (int j = 0; j < n; ++j) {
    Vec ej = Vec::Zero(n);
    ej[j] = h;
    Vec gp = fd_grad(m, x, y + ej, true, h);
    Vec gm = fd_grad(m, x, y - ej, true, h);
    out.row(j) = ((gp - gm) / (2 * h)).transpose();
  }
  return out;
}

}  // namespace

TEST_CASE("quadratic bundle closed form") {
  QuadraticCost q(square_pair(-3, 3, -3, 3));
  auto b = q.eval_bundle(v2(0, 0), v2(1, 2));
  CHECK(b.c == doctest::Approx(2.5));
  CHECK((b.grad_x - v2(-1, -2)).norm() < 1e-15);
  CHECK((b.grad_y - v2(1, 2)).norm() < 1e-15);
  CHECK((b.mixed_hessian + Mat::Identity(2, 2)).norm() < 1e-15);
  CHECK((b.mixed_hessian_inverse * b.mixed_hessian - Mat::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("bilinear bundle") {
  BilinearCost c(square_pair(-1, 1, -1, 1));
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    Vec x = rng.point_in(c.domain().X), y = rng.point_in(c.domain().Y);
    auto b = c.eval_bundle(x, y);
    CHECK((b.mixed_hessian + Mat::Identity(2, 2)).norm() == 0.0);
    CHECK((b.mixed_hessian_inverse + Mat::Identity(2, 2)).norm() == 0.0);
    auto t = c.mtw_bundle(x, y);
    CHECK(t.c_ij_p.max_abs() == 0.0);
    CHECK(t.c_q_st.max_abs() == 0.0);
    CHECK(t.c_ij_st.max_abs() == 0.0);
  }
}

TEST_CASE("power cost against finite differences") {
  PowerCost p(square_pair(-2, 2, -2, 2), 4.0);
  const Vec x = v2(0, 0), y = v2(1, 0);
  auto b = p.eval_bundle(x, y);
  CHECK(b.c == doctest::Approx(1.0));
  CHECK((b.grad_x - fd_grad(p, x, y, true, 1e-4)).norm() <= 1e-6);
  CHECK((b.grad_y - fd_grad(p, x, y, false, 1e-4)).norm() <= 1e-6);
  CHECK((b.mixed_hessian - fd_mixed(p, x, y, 1e-4)).norm() <= 1e-6);
}

TEST_CASE("power cost mtw bundle against nested differences") {
  PowerCost p(square_pair(-2, 2, -2, 2), 4.0);
  const Vec x = v2(0, 0), y = v2(1, 0);
  MtwBundle a = p.mtw_bundle(x, y);
  PowerCost f(square_pair(-2, 2, -2, 2), 4.0);
  f.set_analytic_order(2);
  // Steps of 1e-3 absolute: the library scales by the diameter.
  f.fd_steps.order3 = f.fd_steps.order4 = 1e-3 / f.step_scale();
  MtwBundle d = f.mtw_bundle(x, y);
  const double scale3 = std::max(a.c_ij_p.max_abs(), 1.0);
  const double scale4 = std::max(a.c_ij_st.max_abs(), 1.0);
  for (size_t i = 0; i < a.c_ij_p.data.size(); ++i) {
    CHECK(std::fabs(a.c_ij_p.data[i] - d.c_ij_p.data[i]) <= 1e-3 * scale3);
    CHECK(std::fabs(a.c_q_st.data[i] - d.c_q_st.data[i]) <= 1e-3 * scale3);
  }
  for (size_t i = 0; i < a.c_ij_st.data.size(); ++i) {
    CHECK(std::fabs(a.c_ij_st.data[i] - d.c_ij_st.data[i]) <= 1e-3 * scale4);
  }
  CHECK((a.c_inv - d.c_inv).norm() < 1e-12);
}

TEST_CASE("quadratic higher derivatives vanish") {
  QuadraticCost q(square_pair(-1, 1, -1, 1));
  auto t = q.mtw_bundle(v2(0.2, 0.1), v2(-0.3, 0.5));
  CHECK(t.c_ij_p.max_abs() == 0.0);
  CHECK(t.c_q_st.max_abs() == 0.0);
  CHECK(t.c_ij_st.max_abs() == 0.0);
}

TEST_CASE("all built-in costs: symmetry and gradient checks") {
  const char* names[] = {"quadratic", "bilinear", "power", "log", "sqrt"};
  for (const char* name : names) {
    CAPTURE(name);
    auto m = make_cost(name, square_pair(0, 1, 2, 3));
    Rng rng(11);
    for (int k = 0; k < 1000; ++k) {
      Vec x = rng.point_in(m->domain().X), y = rng.point_in(m->domain().Y);
      Mat xy = m->mixed_hessian(x, y);
      Mat yx = fd_mixed_yx(*m, x, y, 1e-4);
      // analytic D2xy against an FD D2yx: tolerance is the FD error
      CHECK((xy - yx.transpose()).norm() <= 1e-5 * (1.0 + xy.norm()));
      if (k < 100) {
        CHECK((m->grad_x(x, y) - fd_grad(*m, x, y, true, 1e-4)).norm() <= 1e-6 * (1.0 + xy.norm()));
        CHECK((m->grad_y(x, y) - fd_grad(*m, x, y, false, 1e-4)).norm() <= 1e-6 * (1.0 + xy.norm()));
      }
    }
  }
}

TEST_CASE("finite-difference fallback agrees with analytic derivatives") {
  auto a = make_cost("power", square_pair(0, 1, 2, 3));
  auto f = make_cost("power", square_pair(0, 1, 2, 3));
  f->set_analytic_order(0);
  CHECK(f->analytic_order() == 0);
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    Vec x = rng.point_in(a->domain().X), y = rng.point_in(a->domain().Y);
    Mat ha = a->mixed_hessian(x, y);
    Mat hf = f->mixed_hessian(x, y);
    const double h = f->fd_steps.order2 * f->step_scale();
    CHECK((ha - hf).norm() <= 10.0 * h * h * (1.0 + ha.norm()));
    CHECK((a->grad_x(x, y) - f->grad_x(x, y)).norm() <= 1e-6);
  }
}

TEST_CASE("errors") {
  PowerCost p(square_pair(-1, 1, -1, 1), 4.0);
  CHECK_THROWS_AS(p.eval_bundle(v2(0.3, 0.3), v2(0.3, 0.3)), Error);
  try {
    p.eval_bundle(v2(0.3, 0.3), v2(0.3, 0.3));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DiagonalSingularity);
  }
  LogCost l(square_pair(-1, 1, -1, 1));
  CHECK_THROWS_AS(l.c(v2(0, 0), v2(0, 0)), Error);

  // p = 4 at small |z|: the Hessian ~ |z|^2 stays invertible but a tiny cap rejects it.
  PowerCost q(square_pair(-1, 1, -1, 1), 4.0);
  q.condition_cap = 2.0;
  try {
    q.eval_bundle(v2(0, 0), v2(0.5, 0));
    FAIL("expected DegenerateHessian");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateHessian);
  }

  PowerCost s(square_pair(0, 1, 2, 3), 4.0);
  s.set_analytic_order(2);
  try {
    s.mtw_bundle(v2(1, 1), v2(2.5, 2.5));
    FAIL("expected StencilOutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StencilOutOfDomain);
  }
}

TEST_CASE("constant estimates") {
  QuadraticCost q(square_pair(-1, 1, -1, 1));
  auto k = estimate_constants(q, 500, 1);
  CHECK(k.alpha == doctest::Approx(std::sqrt(2.0) * 1.1));
  CHECK(k.beta == doctest::Approx(std::sqrt(2.0) * 1.1));
  for (auto& [rho, w] : k.omega_table) CHECK(w == 0.0);

  BilinearCost b(square_pair(-1, 1, -1, 1));
  auto kb = estimate_constants(b, 500, 1);
  CHECK(std::fabs(kb.L - 1.0) <= 0.1 + 1e-12);

  PowerCost p(square_pair(0, 1, 2, 3), 4.0);
  auto k1 = estimate_constants(p, 1000, 42);
  auto k2 = estimate_constants(p, 1000, 42);
  CHECK(k1.alpha == k2.alpha);
  CHECK(k1.beta == k2.beta);
  CHECK(k1.L == k2.L);
  CHECK(k1.lip_c == k2.lip_c);
  CHECK(k1.omega_table == k2.omega_table);
  for (size_t i = 1; i < k1.omega_table.size(); ++i) CHECK(k1.omega_table[i].second >= k1.omega_table[i - 1].second);

  // Oracle: 10x budget moves each constant by less than the safety margin.
  auto big = estimate_constants(p, 10000, 7);
  CHECK(big.alpha <= k1.alpha * 1.1);
  CHECK(big.beta <= k1.beta * 1.1);
  CHECK(big.L <= k1.L * 1.1);
  CHECK(big.lip_c <= k1.lip_c * 1.1);

  // Frobenius sandwich at fresh samples.
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    Vec x = rng.point_in(p.domain().X), y = rng.point_in(p.domain().Y);
    const double f = p.mixed_hessian(x, y).norm();
    CHECK(f <= k1.alpha);
    CHECK(f >= 1.0 / k1.beta);
  }
}

TEST_CASE("inverse-Hessian modulus") {
  PowerCost p(square_pair(0, 1, 2, 3), 4.0);
  auto k = estimate_constants(p, 2000, 3);
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    Vec x0 = rng.point_in(p.domain().X), y0 = rng.point_in(p.domain().Y);
    Vec x1 = p.domain().X.project(x0 + 0.05 * rng.unit_vector(2));
    Vec y1 = p.domain().Y.project(y0 + 0.05 * rng.unit_vector(2));
    const double dist = std::sqrt((x1 - x0).squaredNorm() + (y1 - y0).squaredNorm());
    Mat i0 = p.mixed_hessian(x0, y0).inverse();
    Mat i1 = p.mixed_hessian(x1, y1).inverse();
    CHECK((i0 - i1).norm() <= k.beta * k.beta * k.omega_upper(dist) * 1.1);
  }
}
