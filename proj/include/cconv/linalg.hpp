#pragma once

#include <Eigen/Dense>

#include <vector>

namespace cconv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Third-order tensor stored flat, index (a, b, c) -> (a * n + b) * n + c.
struct Tensor3 {
  int n = 0;
  std::vector<double> data;

  Tensor3() = default;
  explicit Tensor3(int dim) : n(dim), data(static_cast<size_t>(dim * dim * dim), 0.0) {}
  double& operator()(int a, int b, int c) { return data[static_cast<size_t>((a * n + b) * n + c)]; }
  double operator()(int a, int b, int c) const { return data[static_cast<size_t>((a * n + b) * n + c)]; }
  double max_abs() const;
};

/// Fourth-order tensor stored flat, index (a, b, c, d) -> ((a * n + b) * n + c) * n + d.
struct Tensor4 {
  int n = 0;
  std::vector<double> data;

  Tensor4() = default;
  explicit Tensor4(int dim) : n(dim), data(static_cast<size_t>(dim * dim * dim * dim), 0.0) {}
  double& operator()(int a, int b, int c, int d) {
    return data[static_cast<size_t>(((a * n + b) * n + c) * n + d)];
  }
  double operator()(int a, int b, int c, int d) const {
    return data[static_cast<size_t>(((a * n + b) * n + c) * n + d)];
  }
  double max_abs() const;
};

inline double frobenius(const Mat& m) { return m.norm(); }

}  // namespace cconv
