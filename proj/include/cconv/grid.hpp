#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cconv/domain.hpp"
#include "cconv/linalg.hpp"

namespace cconv {

/// Rectangular lattice over the bounding box of a region. For ball regions
/// nodes outside the ball are kept but flagged, and reductions skip them.
class Lattice {
 public:
  Lattice(Region region, std::vector<int> counts);
  static Lattice uniform(const Region& region, int per_axis);
  /// 257 nodes in 1D, 64 per axis in 2D, fewer beyond.
  static int default_count(int dim);

  const Region& region() const { return region_; }
  int dim() const { return static_cast<int>(counts_.size()); }
  int size() const { return size_; }
  int count(int axis) const { return counts_[static_cast<size_t>(axis)]; }
  const std::vector<int>& counts() const { return counts_; }
  const Vec& lo() const { return region_.lo(); }
  const Vec& hi() const { return region_.hi(); }
  double spacing(int axis) const;
  double max_spacing() const;

  const Mat& nodes() const { return nodes_; }  // dim x size
  Vec node(int k) const { return nodes_.col(k); }
  bool inside(int k) const { return inside_[static_cast<size_t>(k)] != 0; }
  const std::vector<int>& inside_nodes() const { return inside_list_; }

  std::vector<int> multi_index(int k) const;
  int flat_index(const std::vector<int>& m) const;
  /// Axis neighbors (+-1 along each axis) that exist in the lattice.
  std::vector<int> neighbors(int k) const;

  bool operator==(const Lattice& o) const;

 private:
  Region region_;
  std::vector<int> counts_;
  int size_ = 0;
  Mat nodes_;
  std::vector<std::uint8_t> inside_;
  std::vector<int> inside_list_;
};

/// Function sampled on a lattice. minus_inf flags nodes where the value is
/// -infinity (allowed for potentials on Y); the stored value there is 0.
struct GridFunction {
  char domain = 'X';
  Lattice lattice;
  std::vector<double> values;
  std::vector<std::uint8_t> minus_inf;

  GridFunction(char domain_tag, Lattice lat);
  GridFunction(char domain_tag, Lattice lat, std::vector<double> vals);

  bool is_minus_inf(int k) const { return minus_inf[static_cast<size_t>(k)] != 0; }
  void set_minus_inf(int k);
  double at(int k) const;  // -inf when flagged
  /// Multilinear interpolation; points are clamped to the lattice box.
  double eval(const Vec& x) const;
  bool all_minus_inf() const;
};

void write_grid_csv(std::ostream& os, const GridFunction& g);
GridFunction read_grid_csv(std::istream& is);
std::string grid_to_json(const GridFunction& g);
GridFunction grid_from_json(const std::string& text);

}  // namespace cconv
