#pragma once

#include <memory>
#include <string>

#include "cconv/domain.hpp"
#include "cconv/linalg.hpp"

namespace cconv {

/// Finite-difference steps per derivative order, relative to the diameter
/// of X x Y. Index 1 is used for gradients, 2 for the mixed Hessian and 3/4
/// for the nested stencils of the MTW bundle.
struct FdSteps {
  double order1 = 1e-6;
  double order2 = 1e-4;
  double order3 = 1e-3;
  double order4 = 1e-3;
};

struct DerivativeBundle {
  double c = 0.0;
  Vec grad_x;
  Vec grad_y;
  Mat mixed_hessian;          // (i, j) = d^2 c / dx_i dy_j
  Mat mixed_hessian_inverse;  // inverse of the above
};

/// Indices before the comma are x-derivatives, after the comma y-derivatives:
/// c_ij_p(i, j, p) = d^3 c / dx_i dx_j dy_p, c_q_st(q, s, t) = d^3 c / dx_q dy_s dy_t,
/// c_ij_st(i, j, s, t) = d^4 c / dx_i dx_j dy_s dy_t.
struct MtwBundle {
  Tensor3 c_ij_p;
  Tensor3 c_q_st;
  Tensor4 c_ij_st;
  Mat c_inv;
};

class CostModel {
 public:
  CostModel(std::string name, DomainPair domain, int native_order);
  virtual ~CostModel() = default;

  const std::string& name() const { return name_; }
  int dim() const { return domain_.dim(); }
  const DomainPair& domain() const { return domain_; }

  /// Highest derivative order served analytically; lower it to force the
  /// finite-difference path (used by tests and by `cost.analytic_order`).
  int analytic_order() const { return analytic_order_; }
  void set_analytic_order(int order);

  FdSteps fd_steps;
  double condition_cap = 1e12;

  /// Cost value; throws DiagonalSingularity where the cost is undefined.
  virtual double c(const Vec& x, const Vec& y) const = 0;
  /// True for costs whose smoothness/non-degeneracy breaks on x = y.
  virtual bool singular_on_diagonal() const { return false; }
  /// c(xs.col(k), y) for every column; costs override for speed.
  virtual void c_cols_x(const Mat& xs, const Vec& y, double* out) const;
  /// c(x, ys.col(k)) for every column.
  virtual void c_cols_y(const Vec& x, const Mat& ys, double* out) const;

  /// grad_y c(xs.col(k), y) into out.col(k).
  virtual void grad_y_cols_x(const Mat& xs, const Vec& y, Mat& out) const;

  /// Parameter echo for reports.
  virtual std::string parameters() const { return {}; }

  Vec grad_x(const Vec& x, const Vec& y) const;
  Vec grad_y(const Vec& x, const Vec& y) const;
  Mat mixed_hessian(const Vec& x, const Vec& y) const;

  /// Full first/second-order bundle at (x, y), with the non-degeneracy check.
  DerivativeBundle eval_bundle(const Vec& x, const Vec& y) const;
  /// Third/fourth mixed derivatives plus the inverse mixed Hessian.
  MtwBundle mtw_bundle(const Vec& x, const Vec& y) const;
  /// Mixed Hessian inverse with the condition-number cap enforced.
  Mat checked_inverse(const Mat& mixed_hessian) const;

  /// Nested central difference of c over the derivative slots in `slots`
  /// (each slot: variable 0 = x, 1 = y, and a coordinate). Exposed for oracles.
  struct Slot {
    int variable;
    int coord;
  };
  double fd_derivative(const Vec& x, const Vec& y, const Slot* slots, int count, double step) const;

  double step_scale() const { return domain_.diameter(); }

 protected:
  virtual Vec analytic_grad_x(const Vec& x, const Vec& y) const;
  virtual Vec analytic_grad_y(const Vec& x, const Vec& y) const;
  virtual Mat analytic_mixed_hessian(const Vec& x, const Vec& y) const;
  virtual void analytic_higher(const Vec& x, const Vec& y, MtwBundle& out) const;

  void check_diagonal(const Vec& x, const Vec& y) const;

 private:
  void check_stencil(const Vec& x, const Vec& y, double width) const;

  std::string name_;
  DomainPair domain_;
  int native_order_;
  int analytic_order_;
};

/// c(x, y) = f(|x - y|^2): derivatives follow from the scalar profile f.
class RadialCost : public CostModel {
 public:
  using CostModel::CostModel;
  double c(const Vec& x, const Vec& y) const override;
  void c_cols_x(const Mat& xs, const Vec& y, double* out) const override;
  void c_cols_y(const Vec& x, const Mat& ys, double* out) const override;
  void grad_y_cols_x(const Mat& xs, const Vec& y, Mat& out) const override;
  /// f(s) alone; the batch paths call this.
  virtual double value_of_s(double s) const = 0;
  virtual double slope_of_s(double s) const {
    double f[5];
    profile(s, f);
    return f[1];
  }

  /// Profile derivatives f^(k)(s), k = 0..4.
  virtual void profile(double s, double out[5]) const = 0;

 protected:
  Vec analytic_grad_x(const Vec& x, const Vec& y) const override;
  Vec analytic_grad_y(const Vec& x, const Vec& y) const override;
  Mat analytic_mixed_hessian(const Vec& x, const Vec& y) const override;
  void analytic_higher(const Vec& x, const Vec& y, MtwBundle& out) const override;
};

class QuadraticCost final : public RadialCost {
 public:
  explicit QuadraticCost(DomainPair domain);
  void profile(double s, double out[5]) const override;
  double value_of_s(double s) const override;
};

class PowerCost final : public RadialCost {
 public:
  PowerCost(DomainPair domain, double exponent);
  void profile(double s, double out[5]) const override;
  double value_of_s(double s) const override;
  bool singular_on_diagonal() const override { return true; }
  std::string parameters() const override;
  double c(const Vec& x, const Vec& y) const override;
  double slope_of_s(double s) const override;
  double exponent() const { return exponent_; }

 private:
  double exponent_;
  int even_power_ = 0;  // p / 2 when p is an even integer, else 0
};

class LogCost final : public RadialCost {
 public:
  explicit LogCost(DomainPair domain);
  void profile(double s, double out[5]) const override;
  double value_of_s(double s) const override;
  bool singular_on_diagonal() const override { return true; }
};

/// sqrt(1 + |x - y|^2)
class SqrtCost final : public RadialCost {
 public:
  explicit SqrtCost(DomainPair domain);
  void profile(double s, double out[5]) const override;
  double value_of_s(double s) const override;
};

/// c(x, y) = -<x, y>
class BilinearCost final : public CostModel {
 public:
  explicit BilinearCost(DomainPair domain);
  double c(const Vec& x, const Vec& y) const override;

 protected:
  Vec analytic_grad_x(const Vec& x, const Vec& y) const override;
  Vec analytic_grad_y(const Vec& x, const Vec& y) const override;
  Mat analytic_mixed_hessian(const Vec& x, const Vec& y) const override;
  void analytic_higher(const Vec& x, const Vec& y, MtwBundle& out) const override;
};

/// Swaps the roles of the two variables: c~(y, x) = c(x, y) on Y x X.
class SwappedCost final : public CostModel {
 public:
  explicit SwappedCost(std::shared_ptr<const CostModel> base);
  double c(const Vec& x, const Vec& y) const override { return base_->c(y, x); }
  void c_cols_x(const Mat& xs, const Vec& y, double* out) const override { base_->c_cols_y(y, xs, out); }
  void c_cols_y(const Vec& x, const Mat& ys, double* out) const override { base_->c_cols_x(ys, x, out); }
  bool singular_on_diagonal() const override { return base_->singular_on_diagonal(); }

 protected:
  Vec analytic_grad_x(const Vec& x, const Vec& y) const override { return base_->grad_y(y, x); }
  Vec analytic_grad_y(const Vec& x, const Vec& y) const override { return base_->grad_x(y, x); }
  Mat analytic_mixed_hessian(const Vec& x, const Vec& y) const override {
    return base_->mixed_hessian(y, x).transpose();
  }

 private:
  std::shared_ptr<const CostModel> base_;
};

/// Factory for the built-in costs by name: quadratic, bilinear, power, log, sqrt.
std::shared_ptr<CostModel> make_cost(const std::string& name, DomainPair domain, double exponent = 4.0);

}  // namespace cconv
