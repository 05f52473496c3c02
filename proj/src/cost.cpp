#include "cconv/cost.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cconv/errors.hpp"

namespace cconv {

CostModel::CostModel(std::string name, DomainPair domain, int native_order)
    : name_(std::move(name)),
      domain_(std::move(domain)),
      native_order_(std::clamp(native_order, 0, 4)),
      analytic_order_(native_order_) {
  if (domain_.X.dim() != domain_.Y.dim()) {
    throw Error(ErrorKind::InvalidArgument, "X and Y must have the same dimension");
  }
}

void CostModel::set_analytic_order(int order) { analytic_order_ = std::clamp(order, 0, native_order_); }

void CostModel::check_diagonal(const Vec& x, const Vec& y) const {
  if (!singular_on_diagonal()) return;
  if ((x - y).norm() <= 1e-12 * (1.0 + domain_.diameter())) {
    throw Error(ErrorKind::DiagonalSingularity, name_ + " cost derivatives are singular at x = y");
  }
}

void CostModel::check_stencil(const Vec& x, const Vec& y, double width) const {
  const double slack = 1e-12 * (1.0 + domain_.diameter());
  if (domain_.X.depth(x) < width - slack || domain_.Y.depth(y) < width - slack) {
    throw Error(ErrorKind::StencilOutOfDomain,
                "finite-difference stencil of width " + std::to_string(width) + " leaves X x Y");
  }
}

double CostModel::fd_derivative(const Vec& x, const Vec& y, const Slot* slots, int count, double step) const {
  if (count == 0) return c(x, y);
  const Slot s = slots[0];
  Vec xp = x, xm = x, yp = y, ym = y;
  if (s.variable == 0) {
    xp[s.coord] += step;
    xm[s.coord] -= step;
  } else {
    yp[s.coord] += step;
    ym[s.coord] -= step;
  }
  return (fd_derivative(xp, yp, slots + 1, count - 1, step) - fd_derivative(xm, ym, slots + 1, count - 1, step)) /
         (2.0 * step);
}

Vec CostModel::grad_x(const Vec& x, const Vec& y) const {
  check_diagonal(x, y);
  if (analytic_order_ >= 1) return analytic_grad_x(x, y);
  const double h = fd_steps.order1 * step_scale();
  Vec g(dim());
  for (int i = 0; i < dim(); ++i) {
    Slot s{0, i};
    g[i] = fd_derivative(x, y, &s, 1, h);
  }
  return g;
}

Vec CostModel::grad_y(const Vec& x, const Vec& y) const {
  check_diagonal(x, y);
  if (analytic_order_ >= 1) return analytic_grad_y(x, y);
  const double h = fd_steps.order1 * step_scale();
  Vec g(dim());
  for (int i = 0; i < dim(); ++i) {
    Slot s{1, i};
    g[i] = fd_derivative(x, y, &s, 1, h);
  }
  return g;
}

Mat CostModel::mixed_hessian(const Vec& x, const Vec& y) const {
  check_diagonal(x, y);
  if (analytic_order_ >= 2) return analytic_mixed_hessian(x, y);
  const double h = fd_steps.order2 * step_scale();
  const int n = dim();
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Slot s[2] = {{0, i}, {1, j}};
      m(i, j) = fd_derivative(x, y, s, 2, h);
    }
  }
  return m;
}

Mat CostModel::checked_inverse(const Mat& h) const {
  Eigen::JacobiSVD<Mat> svd(h);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];
  if (!(smin > 0.0) || smax / smin > condition_cap) {
    std::ostringstream os;
    os << "mixed Hessian condition number " << (smin > 0.0 ? smax / smin : INFINITY) << " exceeds cap "
       << condition_cap;
    throw Error(ErrorKind::DegenerateHessian, os.str());
  }
  return h.partialPivLu().inverse();
}

DerivativeBundle CostModel::eval_bundle(const Vec& x, const Vec& y) const {
  check_diagonal(x, y);
  DerivativeBundle b;
  b.c = c(x, y);
  b.grad_x = grad_x(x, y);
  b.grad_y = grad_y(x, y);
  b.mixed_hessian = mixed_hessian(x, y);
  b.mixed_hessian_inverse = checked_inverse(b.mixed_hessian);
  return b;
}

MtwBundle CostModel::mtw_bundle(const Vec& x, const Vec& y) const {
  check_diagonal(x, y);
  const int n = dim();
  MtwBundle out;
  out.c_inv = checked_inverse(mixed_hessian(x, y));
  if (analytic_order_ >= 4) {
    analytic_higher(x, y, out);
    return out;
  }
  const double h3 = fd_steps.order3 * step_scale();
  const double h4 = fd_steps.order4 * step_scale();
  check_stencil(x, y, 2.0 * std::max(h3, h4));
  out.c_ij_p = Tensor3(n);
  out.c_q_st = Tensor3(n);
  out.c_ij_st = Tensor4(n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int d = 0; d < n; ++d) {
        Slot s1[3] = {{0, a}, {0, b}, {1, d}};
        out.c_ij_p(a, b, d) = fd_derivative(x, y, s1, 3, h3);
        Slot s2[3] = {{0, a}, {1, b}, {1, d}};
        out.c_q_st(a, b, d) = fd_derivative(x, y, s2, 3, h3);
        for (int e = 0; e < n; ++e) {
          Slot s3[4] = {{0, a}, {0, b}, {1, d}, {1, e}};
          out.c_ij_st(a, b, d, e) = fd_derivative(x, y, s3, 4, h4);
        }
      }
    }
  }
  return out;
}

void CostModel::c_cols_x(const Mat& xs, const Vec& y, double* out) const {
  for (Eigen::Index k = 0; k < xs.cols(); ++k) out[k] = c(xs.col(k), y);
}

void CostModel::c_cols_y(const Vec& x, const Mat& ys, double* out) const {
  for (Eigen::Index k = 0; k < ys.cols(); ++k) out[k] = c(x, ys.col(k));
}

void CostModel::grad_y_cols_x(const Mat& xs, const Vec& y, Mat& out) const {
  out.resize(xs.rows(), xs.cols());
  for (Eigen::Index k = 0; k < xs.cols(); ++k) out.col(k) = grad_y(xs.col(k), y);
}

Vec CostModel::analytic_grad_x(const Vec&, const Vec&) const {
  throw Error(ErrorKind::InvalidArgument, name_ + ": no analytic gradient");
}
Vec CostModel::analytic_grad_y(const Vec&, const Vec&) const {
  throw Error(ErrorKind::InvalidArgument, name_ + ": no analytic gradient");
}
Mat CostModel::analytic_mixed_hessian(const Vec&, const Vec&) const {
  throw Error(ErrorKind::InvalidArgument, name_ + ": no analytic mixed Hessian");
}
void CostModel::analytic_higher(const Vec&, const Vec&, MtwBundle&) const {
  throw Error(ErrorKind::InvalidArgument, name_ + ": no analytic fourth-order bundle");
}

// ---------------------------------------------------------------------------
// Radial costs. With z = x - y and g(z) = f(|z|^2), x-derivatives are
// z-derivatives and each y-derivative flips the sign.

double RadialCost::c(const Vec& x, const Vec& y) const { return value_of_s((x - y).squaredNorm()); }

void RadialCost::c_cols_x(const Mat& xs, const Vec& y, double* out) const {
  const Eigen::Index n = xs.rows();
  for (Eigen::Index k = 0; k < xs.cols(); ++k) {
    const double* col = xs.data() + k * n;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += (col[i] - y[i]) * (col[i] - y[i]);
    out[k] = value_of_s(s);
  }
}

void RadialCost::grad_y_cols_x(const Mat& xs, const Vec& y, Mat& out) const {
  if (analytic_order() < 1) {
    CostModel::grad_y_cols_x(xs, y, out);
    return;
  }
  out = xs.colwise() - y;
  for (Eigen::Index k = 0; k < xs.cols(); ++k) {
    const double s = out.col(k).squaredNorm();
    out.col(k) *= -2.0 * slope_of_s(s);
  }
}

void RadialCost::c_cols_y(const Vec& x, const Mat& ys, double* out) const { c_cols_x(ys, x, out); }

Vec RadialCost::analytic_grad_x(const Vec& x, const Vec& y) const {
  const Vec z = x - y;
  double f[5];
  profile(z.squaredNorm(), f);
  return 2.0 * f[1] * z;
}

Vec RadialCost::analytic_grad_y(const Vec& x, const Vec& y) const { return -analytic_grad_x(x, y); }

Mat RadialCost::analytic_mixed_hessian(const Vec& x, const Vec& y) const {
  const Vec z = x - y;
  double f[5];
  profile(z.squaredNorm(), f);
  const int n = dim();
  Mat g = 4.0 * f[2] * z * z.transpose() + 2.0 * f[1] * Mat::Identity(n, n);
  return -g;
}

void RadialCost::analytic_higher(const Vec& x, const Vec& y, MtwBundle& out) const {
  const Vec z = x - y;
  double f[5];
  profile(z.squaredNorm(), f);
  const int n = dim();
  auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  out.c_ij_p = Tensor3(n);
  out.c_q_st = Tensor3(n);
  out.c_ij_st = Tensor4(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double g3 = 8.0 * f[3] * z[i] * z[j] * z[k] +
                          4.0 * f[2] * (d(i, j) * z[k] + d(i, k) * z[j] + d(j, k) * z[i]);
        out.c_ij_p(i, j, k) = -g3;
        out.c_q_st(i, j, k) = g3;
        for (int l = 0; l < n; ++l) {
          const double g4 =
              16.0 * f[4] * z[i] * z[j] * z[k] * z[l] +
              8.0 * f[3] *
                  (d(i, j) * z[k] * z[l] + d(i, k) * z[j] * z[l] + d(i, l) * z[j] * z[k] +
                   d(j, k) * z[i] * z[l] + d(j, l) * z[i] * z[k] + d(k, l) * z[i] * z[j]) +
              4.0 * f[2] * (d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k));
          out.c_ij_st(i, j, k, l) = g4;
        }
      }
    }
  }
}

QuadraticCost::QuadraticCost(DomainPair domain) : RadialCost("quadratic", std::move(domain), 4) {}

double QuadraticCost::value_of_s(double s) const { return 0.5 * s; }

void QuadraticCost::profile(double s, double out[5]) const {
  out[0] = 0.5 * s;
  out[1] = 0.5;
  out[2] = out[3] = out[4] = 0.0;
}

PowerCost::PowerCost(DomainPair domain, double exponent)
    : RadialCost("power", std::move(domain), 4), exponent_(exponent) {
  if (!(exponent > 0.0)) throw Error(ErrorKind::InvalidArgument, "power cost exponent must be positive");
  const double half = 0.5 * exponent;
  if (half == std::floor(half) && half <= 8) even_power_ = static_cast<int>(half);
}

double PowerCost::value_of_s(double s) const {
  if (even_power_ > 0) {
    double r = s;
    for (int k = 1; k < even_power_; ++k) r *= s;
    return r;
  }
  return std::pow(s, 0.5 * exponent_);
}

void PowerCost::profile(double s, double out[5]) const {
  const double a = 0.5 * exponent_;
  double coef = 1.0;
  for (int k = 0; k < 5; ++k) {
    out[k] = coef == 0.0 ? 0.0 : coef * std::pow(s, a - k);
    coef *= a - k;
  }
}

double PowerCost::slope_of_s(double s) const {
  const double a = 0.5 * exponent_;
  if (even_power_ > 0) {
    double r = a;
    for (int k = 1; k < even_power_; ++k) r *= s;
    return r;
  }
  return a * std::pow(s, a - 1.0);
}

double PowerCost::c(const Vec& x, const Vec& y) const { return value_of_s((x - y).squaredNorm()); }

std::string PowerCost::parameters() const {
  std::ostringstream os;
  os << "p=" << exponent_;
  return os.str();
}

LogCost::LogCost(DomainPair domain) : RadialCost("log", std::move(domain), 4) {}

double LogCost::value_of_s(double s) const {
  if (s == 0.0) throw Error(ErrorKind::DiagonalSingularity, "log cost is undefined at x = y");
  return -0.5 * std::log(s);
}

void LogCost::profile(double s, double out[5]) const {
  out[0] = -0.5 * std::log(s);
  out[1] = -0.5 / s;
  out[2] = 0.5 / (s * s);
  out[3] = -1.0 / (s * s * s);
  out[4] = 3.0 / (s * s * s * s);
}


SqrtCost::SqrtCost(DomainPair domain) : RadialCost("sqrt", std::move(domain), 4) {}

double SqrtCost::value_of_s(double s) const { return std::sqrt(1.0 + s); }

void SqrtCost::profile(double s, double out[5]) const {
  const double u = 1.0 + s;
  const double r = std::sqrt(u);
  out[0] = r;
  out[1] = 0.5 / r;
  out[2] = -0.25 / (r * u);
  out[3] = 0.375 / (r * u * u);
  out[4] = -0.9375 / (r * u * u * u);
}

// ---------------------------------------------------------------------------

BilinearCost::BilinearCost(DomainPair domain) : CostModel("bilinear", std::move(domain), 4) {}

double BilinearCost::c(const Vec& x, const Vec& y) const { return -x.dot(y); }
Vec BilinearCost::analytic_grad_x(const Vec&, const Vec& y) const { return -y; }
Vec BilinearCost::analytic_grad_y(const Vec& x, const Vec&) const { return -x; }
Mat BilinearCost::analytic_mixed_hessian(const Vec&, const Vec&) const { return -Mat::Identity(dim(), dim()); }

void BilinearCost::analytic_higher(const Vec&, const Vec&, MtwBundle& out) const {
  out.c_ij_p = Tensor3(dim());
  out.c_q_st = Tensor3(dim());
  out.c_ij_st = Tensor4(dim());
}

SwappedCost::SwappedCost(std::shared_ptr<const CostModel> base)
    : CostModel(base->name() + "_swapped", DomainPair(base->domain().Y, base->domain().X),
                std::min(2, base->analytic_order())),
      base_(std::move(base)) {
  fd_steps = base_->fd_steps;
  condition_cap = base_->condition_cap;
}

std::shared_ptr<CostModel> make_cost(const std::string& name, DomainPair domain, double exponent) {
  if (name == "quadratic") return std::make_shared<QuadraticCost>(std::move(domain));
  if (name == "bilinear") return std::make_shared<BilinearCost>(std::move(domain));
  if (name == "power") return std::make_shared<PowerCost>(std::move(domain), exponent);
  if (name == "log") return std::make_shared<LogCost>(std::move(domain));
  if (name == "sqrt") return std::make_shared<SqrtCost>(std::move(domain));
  throw Error(ErrorKind::InvalidArgument, "unknown cost '" + name + "'");
}

}  // namespace cconv
