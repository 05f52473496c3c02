#include "cconv/rng.hpp"

#include <cmath>
#include <numbers>

namespace cconv {

double Rng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec Rng::unit_vector(int n) {
  Vec v(n);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (int i = 0; i < n; ++i) v[i] = normal();
    norm = v.norm();
  }
  return v / norm;
}

Vec Rng::point_in(const Region& region) {
  const int n = region.dim();
  if (region.shape() == Region::Shape::Box) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = uniform(region.lo()[i], region.hi()[i]);
    return x;
  }
  Vec dir = unit_vector(n);
  double r = region.radius() * std::pow(uniform(), 1.0 / n);
  return region.center() + r * dir;
}

Rng Rng::split(std::uint64_t salt) const {
  // splitmix64 finalizer over (seed, salt)
  std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace cconv
