#include "cconv/grid.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cconv/errors.hpp"
#include "json.hpp"

namespace cconv {

Lattice::Lattice(Region region, std::vector<int> counts) : region_(std::move(region)), counts_(std::move(counts)) {
  if (static_cast<int>(counts_.size()) != region_.dim()) {
    throw Error(ErrorKind::InvalidArgument, "lattice counts must match the region dimension");
  }
  size_ = 1;
  for (int c : counts_) {
    if (c < 2) throw Error(ErrorKind::InvalidArgument, "lattice needs at least 2 nodes per axis");
    size_ *= c;
  }
  const int n = dim();
  nodes_.resize(n, size_);
  inside_.assign(static_cast<size_t>(size_), 1);
  const double tol = 1e-12 * (1.0 + region_.diameter());
  for (int k = 0; k < size_; ++k) {
    int rem = k;
    for (int a = 0; a < n; ++a) {
      const int i = rem % counts_[static_cast<size_t>(a)];
      rem /= counts_[static_cast<size_t>(a)];
      const int last = counts_[static_cast<size_t>(a)] - 1;
      nodes_(a, k) = i == last ? hi()[a] : lo()[a] + (hi()[a] - lo()[a]) * i / last;
    }
    if (region_.shape() == Region::Shape::Ball && !region_.contains(nodes_.col(k), tol)) inside_[static_cast<size_t>(k)] = 0;
    if (inside_[static_cast<size_t>(k)]) inside_list_.push_back(k);
  }
}

Lattice Lattice::uniform(const Region& region, int per_axis) {
  return Lattice(region, std::vector<int>(static_cast<size_t>(region.dim()), per_axis));
}

int Lattice::default_count(int dim) {
  switch (dim) {
    case 1: return 257;
    case 2: return 64;
    case 3: return 16;
    default: return 6;
  }
}

double Lattice::spacing(int axis) const { return (hi()[axis] - lo()[axis]) / (count(axis) - 1); }

double Lattice::max_spacing() const {
  double m = 0.0;
  for (int a = 0; a < dim(); ++a) m = std::max(m, spacing(a));
  return m;
}

std::vector<int> Lattice::multi_index(int k) const {
  std::vector<int> m(static_cast<size_t>(dim()));
  for (int a = 0; a < dim(); ++a) {
    m[static_cast<size_t>(a)] = k % count(a);
    k /= count(a);
  }
  return m;
}

int Lattice::flat_index(const std::vector<int>& m) const {
  int k = 0;
  for (int a = dim() - 1; a >= 0; --a) k = k * count(a) + m[static_cast<size_t>(a)];
  return k;
}

std::vector<int> Lattice::neighbors(int k) const {
  std::vector<int> out;
  int stride = 1;
  const auto m = multi_index(k);
  for (int a = 0; a < dim(); ++a) {
    if (m[static_cast<size_t>(a)] > 0) out.push_back(k - stride);
    if (m[static_cast<size_t>(a)] < count(a) - 1) out.push_back(k + stride);
    stride *= count(a);
  }
  return out;
}

bool Lattice::operator==(const Lattice& o) const {
  return counts_ == o.counts_ && region_.shape() == o.region_.shape() && lo() == o.lo() && hi() == o.hi();
}

GridFunction::GridFunction(char domain_tag, Lattice lat)
    : domain(domain_tag),
      lattice(std::move(lat)),
      values(static_cast<size_t>(lattice.size()), 0.0),
      minus_inf(static_cast<size_t>(lattice.size()), 0) {}

GridFunction::GridFunction(char domain_tag, Lattice lat, std::vector<double> vals)
    : domain(domain_tag), lattice(std::move(lat)), values(std::move(vals)),
      minus_inf(static_cast<size_t>(lattice.size()), 0) {
  if (static_cast<int>(values.size()) != lattice.size()) {
    throw Error(ErrorKind::InvalidArgument, "grid values do not match the lattice size");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "grid values must be finite; use the -inf mask");
  }
}

void GridFunction::set_minus_inf(int k) {
  minus_inf[static_cast<size_t>(k)] = 1;
  values[static_cast<size_t>(k)] = 0.0;
}

double GridFunction::at(int k) const {
  return is_minus_inf(k) ? -std::numeric_limits<double>::infinity() : values[static_cast<size_t>(k)];
}

double GridFunction::eval(const Vec& x) const {
  const int n = lattice.dim();
  std::vector<int> base(static_cast<size_t>(n));
  std::vector<double> frac(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) {
    const double h = lattice.spacing(a);
    double s = (x[a] - lattice.lo()[a]) / h;
    s = std::clamp(s, 0.0, static_cast<double>(lattice.count(a) - 1));
    int i = static_cast<int>(std::floor(s));
    if (i >= lattice.count(a) - 1) i = lattice.count(a) - 2;
    base[static_cast<size_t>(a)] = i;
    frac[static_cast<size_t>(a)] = s - i;
  }
  double acc = 0.0;
  std::vector<int> m(static_cast<size_t>(n));
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    for (int a = 0; a < n; ++a) {
      const bool up = (corner >> a) & 1;
      m[static_cast<size_t>(a)] = base[static_cast<size_t>(a)] + (up ? 1 : 0);
      w *= up ? frac[static_cast<size_t>(a)] : 1.0 - frac[static_cast<size_t>(a)];
    }
    if (w == 0.0) continue;
    const int k = lattice.flat_index(m);
    if (is_minus_inf(k)) return -std::numeric_limits<double>::infinity();
    acc += w * values[static_cast<size_t>(k)];
  }
  return acc;
}

bool GridFunction::all_minus_inf() const {
  for (int k : lattice.inside_nodes()) {
    if (!is_minus_inf(k)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw Error(ErrorKind::IoError, "grid CSV: bad number '" + s + "'");
  return v;
}

Region region_from(const std::string& shape, const std::vector<double>& a, int n) {
  if (shape == "box") {
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = a[static_cast<size_t>(i)];
      hi[i] = a[static_cast<size_t>(n + i)];
    }
    return Region::box(lo, hi);
  }
  Vec c(n);
  for (int i = 0; i < n; ++i) c[i] = a[static_cast<size_t>(i)];
  return Region::ball(c, a[static_cast<size_t>(n)]);
}

}  // namespace

void write_grid_csv(std::ostream& os, const GridFunction& g) {
  const Lattice& lat = g.lattice;
  const Region& r = lat.region();
  os << "# grid_function,domain," << g.domain << "\n";
  if (r.shape() == Region::Shape::Box) {
    os << "# region,box";
    for (int i = 0; i < r.dim(); ++i) os << "," << num(r.lo()[i]);
    for (int i = 0; i < r.dim(); ++i) os << "," << num(r.hi()[i]);
  } else {
    os << "# region,ball";
    for (int i = 0; i < r.dim(); ++i) os << "," << num(r.center()[i]);
    os << "," << num(r.radius());
  }
  os << "\n";
  for (int a = 0; a < lat.dim(); ++a) {
    os << "# axis," << a << "," << num(lat.lo()[a]) << "," << num(lat.hi()[a]) << "," << lat.count(a) << "\n";
  }
  os << "index,value,minus_inf\n";
  for (int k = 0; k < lat.size(); ++k) {
    os << k << "," << num(g.values[static_cast<size_t>(k)]) << "," << (g.is_minus_inf(k) ? 1 : 0) << "\n";
  }
}

GridFunction read_grid_csv(std::istream& is) {
  std::string line;
  char domain = 'X';
  std::string shape;
  std::vector<double> region_args;
  std::vector<int> counts;
  while (std::getline(is, line)) {
    if (line.rfind("index,", 0) == 0) break;
    auto f = split(line);
    if (f.size() >= 3 && f[0] == "# grid_function") domain = f[2].empty() ? 'X' : f[2][0];
    if (f.size() >= 2 && f[0] == "# region") {
      shape = f[1];
      for (size_t i = 2; i < f.size(); ++i) region_args.push_back(parse_double(f[i]));
    }
    if (f.size() == 5 && f[0] == "# axis") counts.push_back(std::stoi(f[4]));
  }
  if (shape.empty() || counts.empty()) throw Error(ErrorKind::IoError, "grid CSV: missing header");
  GridFunction g(domain, Lattice(region_from(shape, region_args, static_cast<int>(counts.size())), counts));
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 3) throw Error(ErrorKind::IoError, "grid CSV: bad row '" + line + "'");
    const int k = std::stoi(f[0]);
    if (k < 0 || k >= g.lattice.size()) throw Error(ErrorKind::IoError, "grid CSV: index out of range");
    g.values[static_cast<size_t>(k)] = parse_double(f[1]);
    g.minus_inf[static_cast<size_t>(k)] = f[2] == "1" ? 1 : 0;
    ++rows;
  }
  if (rows != g.lattice.size()) throw Error(ErrorKind::IoError, "grid CSV: row count mismatch");
  return g;
}

std::string grid_to_json(const GridFunction& g) {
  using nlohmann::json;
  const Region& r = g.lattice.region();
  json j;
  j["domain"] = std::string(1, g.domain);
  json reg;
  if (r.shape() == Region::Shape::Box) {
    reg["shape"] = "box";
    reg["lo"] = std::vector<double>(r.lo().data(), r.lo().data() + r.dim());
    reg["hi"] = std::vector<double>(r.hi().data(), r.hi().data() + r.dim());
  } else {
    reg["shape"] = "ball";
    reg["center"] = std::vector<double>(r.center().data(), r.center().data() + r.dim());
    reg["radius"] = r.radius();
  }
  j["region"] = reg;
  j["counts"] = g.lattice.counts();
  j["values"] = g.values;
  std::vector<int> mask(g.minus_inf.begin(), g.minus_inf.end());
  j["minus_inf"] = mask;
  return j.dump();
}

GridFunction grid_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::IoError, std::string("grid JSON: ") + e.what());
  }
  const auto counts = j.at("counts").get<std::vector<int>>();
  const int n = static_cast<int>(counts.size());
  const json& reg = j.at("region");
  std::vector<double> args;
  std::string shape = reg.at("shape").get<std::string>();
  if (shape == "box") {
    for (double v : reg.at("lo").get<std::vector<double>>()) args.push_back(v);
    for (double v : reg.at("hi").get<std::vector<double>>()) args.push_back(v);
  } else {
    for (double v : reg.at("center").get<std::vector<double>>()) args.push_back(v);
    args.push_back(reg.at("radius").get<double>());
  }
  GridFunction g(j.at("domain").get<std::string>().at(0), Lattice(region_from(shape, args, n), counts));
  g.values = j.at("values").get<std::vector<double>>();
  const auto mask = j.at("minus_inf").get<std::vector<int>>();
  if (static_cast<int>(g.values.size()) != g.lattice.size() || mask.size() != g.values.size()) {
    throw Error(ErrorKind::IoError, "grid JSON: size mismatch");
  }
  for (size_t k = 0; k < mask.size(); ++k) g.minus_inf[k] = mask[k] ? 1 : 0;
  return g;
}

}  // namespace cconv
