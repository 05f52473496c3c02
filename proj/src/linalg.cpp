#include "cconv/linalg.hpp"

#include <cmath>

namespace cconv {

namespace {
double max_abs_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double d : v) m = std::max(m, std::fabs(d));
  return m;
}
}  // namespace

double Tensor3::max_abs() const { return max_abs_of(data); }
double Tensor4::max_abs() const { return max_abs_of(data); }

}  // namespace cconv
