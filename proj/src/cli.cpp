#include "cconv/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "cconv/chord.hpp"
#include "cconv/cones.hpp"
#include "cconv/constants.hpp"
#include "cconv/convexity.hpp"
#include "cconv/counterexample.hpp"
#include "cconv/errors.hpp"
#include "cconv/grid.hpp"
#include "cconv/mtw.hpp"

namespace cconv {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && p == end;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt17(v[i]);
  return s;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::string grid_csv(const GridFunction& g) {
  std::ostringstream os;
  write_grid_csv(os, g);
  return os.str();
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  // Empty defaults are resolved from other keys (domain) or left to the library.
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"budgets.alt_pairs", "8"},
      {"budgets.chord_probe", "200"},
      {"budgets.constants", "2000"},
      {"budgets.loeper", "10000"},
      {"budgets.loeper_t_grid", "9"},
      {"budgets.mtw", "2000"},
      {"budgets.mtw_refine", "50"},
      {"budgets.qqconv", "2000"},
      {"budgets.triples", "10000"},
      {"chord.probe", ""},
      {"chord.u0", "0"},
      {"chord.u1", "0"},
      {"chord.x0", ""},
      {"chord.x1", ""},
      {"constants.theta", "0.7853981633974483"},
      {"cost.analytic_order", "4"},
      {"cost.name", "power"},
      {"cost.p", "4"},
      {"counterexample.level_fraction", ""},
      {"counterexample.levels", "6"},
      {"domain.dim", "2"},
      {"domain.separation", "0.1"},
      {"domain.x.center", ""},
      {"domain.x.hi", ""},
      {"domain.x.lo", ""},
      {"domain.x.radius", ""},
      {"domain.x.shape", "box"},
      {"domain.y.center", ""},
      {"domain.y.hi", ""},
      {"domain.y.lo", ""},
      {"domain.y.radius", ""},
      {"domain.y.shape", "box"},
      {"grid.x_count", ""},
      {"grid.y_count", ""},
      {"output_dir", "out"},
      {"phi.amplitude", "1"},
      {"phi.csv", ""},
      {"phi.source", "bump"},
      {"phi.width", "0.3"},
      {"seed", "0"},
      {"tolerances.alt", ""},
      {"tolerances.envelope", ""},
      {"tolerances.mtw", ""},
  };
  return keys;
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"analyze", "chord", "envelope", "check-convexity", "counterexample",
                                             "constants"};
  return c;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  for (const auto& [k, v] : config_keys()) cfg.values_[k] = v;
  std::map<std::string, int> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!cfg.values_.count(key)) throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
    if (seen.count(key)) {
      throw Error(ErrorKind::ConfigError, "key '" + key + "' repeated on line " + std::to_string(lineno));
    }
    seen[key] = lineno;
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  cfg.resolve();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
  return it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
  values_[key] = value;
  resolve();
}

double RunConfig::number(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(get(key), v) || !std::isfinite(v)) {
    throw Error(ErrorKind::ConfigError, "key '" + key + "' needs a number, got '" + get(key) + "'");
  }
  return v;
}

long RunConfig::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::fabs(v) > 9e15) {
    throw Error(ErrorKind::ConfigError, "key '" + key + "' needs an integer, got '" + get(key) + "'");
  }
  return static_cast<long>(v);
}

std::vector<double> RunConfig::numbers(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_double(item, v) || !std::isfinite(v)) {
      throw Error(ErrorKind::ConfigError, "key '" + key + "' needs a comma-separated list of numbers");
    }
    out.push_back(v);
  }
  return out;
}

void RunConfig::resolve() {
  const long dim = integer("domain.dim");
  if (dim < 1 || dim > 4) throw Error(ErrorKind::ConfigError, "key 'domain.dim' must be between 1 and 4");
  const double sep = number("domain.separation");
  if (sep < 0.0) throw Error(ErrorKind::ConfigError, "key 'domain.separation' must be non-negative");
  const size_t n = static_cast<size_t>(dim);
  // Default X is the unit cube, Y a unit-wide slab beside it along the first
  // axis, taller than X in the others.
  std::vector<double> xlo(n, 0.0), xhi(n, 1.0), ylo(n, -0.5), yhi(n, 1.5);
  ylo[0] = 1.0 + sep;
  yhi[0] = 2.0 + sep;
  auto fill = [&](const std::string& key, const std::vector<double>& v) {
    if (values_[key].empty()) values_[key] = join(v);
  };
  for (const char* side : {"x", "y"}) {
    const std::string pre = std::string("domain.") + side + ".";
    const std::string shape = values_[pre + "shape"];
    if (shape == "box") {
      fill(pre + "lo", side[0] == 'x' ? xlo : ylo);
      fill(pre + "hi", side[0] == 'x' ? xhi : yhi);
      if (numbers(pre + "lo").size() != n || numbers(pre + "hi").size() != n) {
        throw Error(ErrorKind::ConfigError, "keys '" + pre + "lo' and '" + pre + "hi' need " + std::to_string(n) +
                                                " coordinates");
      }
    } else if (shape == "ball") {
      std::vector<double> c(n);
      for (size_t i = 0; i < n; ++i) c[i] = side[0] == 'x' ? 0.5 * (xlo[i] + xhi[i]) : 0.5 * (ylo[i] + yhi[i]);
      fill(pre + "center", c);
      if (values_[pre + "radius"].empty()) values_[pre + "radius"] = "0.5";
      if (numbers(pre + "center").size() != n) {
        throw Error(ErrorKind::ConfigError, "key '" + pre + "center' needs " + std::to_string(n) + " coordinates");
      }
    } else {
      throw Error(ErrorKind::ConfigError, "key '" + pre + "shape' must be box or ball, got '" + shape + "'");
    }
  }
  const std::string src = values_["phi.source"];
  if (src != "bump" && src != "csv") {
    throw Error(ErrorKind::ConfigError, "key 'phi.source' must be bump or csv, got '" + src + "'");
  }
  if (src == "csv" && values_["phi.csv"].empty()) {
    throw Error(ErrorKind::ConfigError, "key 'phi.csv' is required when phi.source = csv");
  }
  for (const auto& [k, v] : values_) {
    if (k.rfind("budgets.", 0) == 0 && integer(k) < 1) {
      throw Error(ErrorKind::ConfigError, "key '" + k + "' must be a positive integer");
    }
  }
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Context {
  const RunConfig& cfg;
  std::shared_ptr<CostModel> model;
  std::uint64_t seed = 0;
  RunOutcome* out = nullptr;

  int budget(const std::string& name) const { return static_cast<int>(cfg.integer("budgets." + name)); }
  std::optional<double> opt_number(const std::string& key) const {
    if (!cfg.has_value(key)) return std::nullopt;
    return cfg.number(key);
  }
  std::optional<int> y_count() const {
    if (!cfg.has_value("grid.y_count")) return std::nullopt;
    return static_cast<int>(cfg.integer("grid.y_count"));
  }
  Lattice x_lattice() const {
    const Region& X = model->domain().X;
    const int n = cfg.has_value("grid.x_count") ? static_cast<int>(cfg.integer("grid.x_count"))
                                                : Lattice::default_count(X.dim());
    if (n < 2) throw Error(ErrorKind::ConfigError, "key 'grid.x_count' must be at least 2");
    return Lattice::uniform(X, n);
  }

  // Runs one stage, timing it and tagging errors with the stage name.
  template <class F>
  auto stage(const std::string& name, F&& f) -> decltype(f()) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      out->timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record();
      } else {
        auto r = f();
        record();
        return r;
      }
    } catch (const Error& e) {
      record();
      if (e.kind() == ErrorKind::NoViolationFound) throw;
      throw StageError(name, e.what());
    }
  }
};

Region region_from(const RunConfig& cfg, const std::string& side) {
  const std::string pre = "domain." + side + ".";
  if (cfg.get(pre + "shape") == "ball") {
    const double r = cfg.number(pre + "radius");
    if (!(r > 0.0)) throw Error(ErrorKind::ConfigError, "key '" + pre + "radius' must be positive");
    return Region::ball(to_vec(cfg.numbers(pre + "center")), r);
  }
  const Vec lo = to_vec(cfg.numbers(pre + "lo")), hi = to_vec(cfg.numbers(pre + "hi"));
  if (!(lo.array() < hi.array()).all()) {
    throw Error(ErrorKind::ConfigError, "key '" + pre + "lo' must be below '" + pre + "hi' on every axis");
  }
  return Region::box(lo, hi);
}

std::shared_ptr<CostModel> model_from(const RunConfig& cfg) {
  DomainPair dom(region_from(cfg, "x"), region_from(cfg, "y"));
  const std::string name = cfg.get("cost.name");
  std::shared_ptr<CostModel> m;
  try {
    m = make_cost(name, dom, cfg.number("cost.p"));
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, "key 'cost.name': " + std::string(e.what()));
  }
  if (m->singular_on_diagonal() && dom.separation() <= 0.0) {
    throw Error(ErrorKind::ConfigError, "cost '" + name + "' is singular on x = y; X and Y must be separated");
  }
  m->set_analytic_order(static_cast<int>(cfg.integer("cost.analytic_order")));
  return m;
}

json constants_json(const ConstantEstimates& k) {
  json j{{"lip_c", k.lip_c}, {"alpha", k.alpha}, {"beta", k.beta}, {"L", k.L}};
  json tab = json::array();
  for (const auto& [rho, om] : k.omega_table) tab.push_back(json::array({rho, om}));
  j["omega_table"] = tab;
  return j;
}

json mtw_json(const MtwReport& r) {
  json j{{"min_value", r.min_value}, {"samples", r.samples}, {"skipped", r.skipped},
         {"tolerance", r.tolerance}, {"verdict", to_string(r.verdict)}};
  if (r.samples > 0) j["argmin"] = {{"x", vec_json(r.x)}, {"y", vec_json(r.y)}, {"eta", vec_json(r.eta)}, {"xi", vec_json(r.xi)}};
  return j;
}

json certificate_json(const CostModel& m, const ViolationCertificate& c) {
  return {{"x0", vec_json(c.x0)}, {"x1", vec_json(c.x1)}, {"y0", vec_json(c.y0)}, {"y1", vec_json(c.y1)},
          {"t", c.t},           {"margin", c.margin},   {"revalidated_margin", revalidate(m, c)}};
}

void cmd_constants(Context& ctx) {
  auto k = ctx.stage("constants", [&] { return estimate_constants(*ctx.model, ctx.budget("constants"), ctx.seed); });
  json j = constants_json(k);
  const double theta = ctx.cfg.number("constants.theta");
  j["theta"] = theta;
  try {
    j["mu_theta"] = mu_theta(k, theta);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoFeasibleRadius) throw StageError("mu_theta", e.what());
    j["mu_theta"] = nullptr;
    j["mu_theta_note"] = e.what();
  }
  ctx.out->report["constants"] = j;
}

void cmd_analyze(Context& ctx) {
  const CostModel& m = *ctx.model;
  auto k = ctx.stage("constants", [&] { return estimate_constants(m, ctx.budget("constants"), ctx.seed); });
  ctx.out->report["constants"] = constants_json(k);

  CertifyOptions co;
  co.tolerance = ctx.opt_number("tolerances.mtw");
  auto mtw = ctx.stage("mtw", [&] { return certify_mtw(m, ctx.budget("mtw"), ctx.budget("mtw_refine"), ctx.seed, co); });
  ctx.out->report["mtw"] = mtw_json(mtw);

  auto lo = ctx.stage("loeper", [&] { return check_loeper(m, ctx.budget("loeper"), ctx.budget("loeper_t_grid"), ctx.seed); });
  json lj{{"evaluated", lo.evaluated}, {"skipped_segments", lo.skipped_segments}, {"best_gap", lo.best_gap}};
  if (lo.certificate) {
    lj["certificate"] = certificate_json(m, *lo.certificate);
    ctx.out->artifacts.emplace_back("loeper_certificate.csv",
                                    certificate_csv_header(m.dim()) + "\n" + certificate_csv_row(*lo.certificate) + "\n");
  } else {
    lj["certificate"] = nullptr;
  }
  lj["verdict"] = lo.certificate ? "violated" : "none found";
  ctx.out->report["loeper"] = lj;

  auto qq = ctx.stage("qqconv", [&] { return estimate_qqconv(m, ctx.budget("qqconv"), ctx.seed); });
  ctx.out->report["qqconv"] = {{"C", qq.C}, {"unbounded", qq.unbounded}, {"tuples", qq.tuples}};

  auto cp = ctx.stage("chord_probe", [&] { return chord_equivalence_probe(m, ctx.budget("chord_probe"), ctx.seed); });
  ctx.out->report["chord_probe"] = {{"max_deviation", cp.max_deviation}, {"tuples", cp.tuples}};
}

void cmd_chord(Context& ctx) {
  const CostModel& m = *ctx.model;
  const Region& X = m.domain().X;
  Vec x0 = X.lo(), x1 = X.lo();
  x1[0] = X.hi()[0];
  if (X.shape() == Region::Shape::Ball) {
    x0 = X.center();
    x1 = X.center();
    x0[0] -= 0.5 * X.radius();
    x1[0] += 0.5 * X.radius();
  }
  if (ctx.cfg.has_value("chord.x0")) x0 = to_vec(ctx.cfg.numbers("chord.x0"));
  if (ctx.cfg.has_value("chord.x1")) x1 = to_vec(ctx.cfg.numbers("chord.x1"));
  Vec probe = 0.5 * (x0 + x1);
  if (ctx.cfg.has_value("chord.probe")) probe = to_vec(ctx.cfg.numbers("chord.probe"));
  const std::pair<const char*, const Vec*> points[] = {{"chord.x0", &x0}, {"chord.x1", &x1}, {"chord.probe", &probe}};
  for (const auto& [name, v] : points) {
    if (v->size() != m.dim() || !X.contains(*v, 1e-12)) {
      throw Error(ErrorKind::ConfigError, "key '" + std::string(name) + "' must be a point of X");
    }
  }
  const LiftedPoint a{x0, ctx.cfg.number("chord.u0")}, b{x1, ctx.cfg.number("chord.u1")};
  ChordOptions opt;
  opt.y_count = ctx.y_count();

  json j{{"x0", vec_json(x0)}, {"u0", a.u}, {"x1", vec_json(x1)}, {"u1", b.u}, {"probe", vec_json(probe)}};
  j["probe_value"] = ctx.stage("chord", [&] { return chord_eval(m, a, b, probe, opt); });
  const Lattice xl = ctx.x_lattice();
  auto surf = ctx.stage("chord surface", [&] { return chord_surface(m, a, b, xl, opt); });
  ctx.out->artifacts.emplace_back("chord.csv", grid_csv(surf));
  try {
    auto cr = ctx.stage("connect", [&] { return connect(m, a, b, opt); });
    json cj{{"u0p", cr.u0p}, {"u1p", cr.u1p}, {"residual", cr.residual}};
    if (cr.touching) {
      cj["touching"] = {{"y", vec_json(cr.touching->y)}, {"h", cr.touching->h}};
      cj["segment_identity"] = ctx.stage("segment identity", [&] { return segment_identity_check(m, {x0, cr.u0p}, {x1, cr.u1p}, *cr.touching, 33, opt); });
    } else {
      cj["touching"] = nullptr;
    }
    j["connect"] = cj;
  } catch (const StageError& e) {
    // A missing touching c-affine is a finding about the endpoints, not a failure.
    if (std::string(e.what()).find("TouchingNotFound") == std::string::npos) throw;
    j["connect"] = {{"touching", nullptr}, {"note", e.what()}};
  }
  ctx.out->report["chord"] = j;
}

GridFunction input_phi(const Context& ctx, const Lattice& xl) {
  const RunConfig& cfg = ctx.cfg;
  if (cfg.get("phi.source") == "csv") {
    std::ifstream f(cfg.get("phi.csv"));
    if (!f) throw Error(ErrorKind::IoError, "cannot read phi grid '" + cfg.get("phi.csv") + "'");
    GridFunction g = read_grid_csv(f);
    if (g.lattice.dim() != ctx.model->dim()) throw Error(ErrorKind::ConfigError, "phi grid dimension differs from domain.dim");
    return g;
  }
  // Concave bump centred in X.
  const Region& X = ctx.model->domain().X;
  const Vec mid = X.shape() == Region::Shape::Ball ? X.center() : Vec(0.5 * (X.lo() + X.hi()));
  const double amp = cfg.number("phi.amplitude"), w = cfg.number("phi.width");
  if (!(w > 0.0)) throw Error(ErrorKind::ConfigError, "key 'phi.width' must be positive");
  std::vector<double> vals(static_cast<size_t>(xl.size()));
  for (int k = 0; k < xl.size(); ++k) vals[static_cast<size_t>(k)] = amp * std::exp(-(xl.node(k) - mid).squaredNorm() / (w * w));
  return GridFunction('X', xl, vals);
}

void cmd_envelope(Context& ctx) {
  const Lattice xl = ctx.x_lattice();
  GridFunction phi = input_phi(ctx, xl);
  EnvelopeOptions eo;
  eo.y_count = ctx.y_count();
  eo.tolerance = ctx.opt_number("tolerances.envelope");
  auto env = ctx.stage("envelope", [&] { return c_envelope(*ctx.model, phi, eo); });
  ctx.out->artifacts.emplace_back("phi.csv", grid_csv(phi));
  ctx.out->artifacts.emplace_back("envelope.csv", grid_csv(env.envelope));
  json j{{"max_gap", env.max_gap}, {"tolerance", env.tolerance}, {"is_c_convex", env.is_c_convex}};
  j["argmax"] = env.argmax_node >= 0 ? vec_json(phi.lattice.node(env.argmax_node)) : json(nullptr);
  ctx.out->report["envelope"] = j;
}

void cmd_check_convexity(Context& ctx) {
  const Lattice xl = ctx.x_lattice();
  GridFunction phi = input_phi(ctx, xl);
  EnvelopeOptions eo;
  eo.y_count = ctx.y_count();
  eo.tolerance = ctx.opt_number("tolerances.envelope");
  auto env = ctx.stage("envelope", [&] { return c_envelope(*ctx.model, phi, eo); });
  ctx.out->report["c_convexity"] = {{"holds", env.is_c_convex}, {"max_gap", env.max_gap}, {"tolerance", env.tolerance}};

  AltConvexityOptions ao;
  ao.seed = ctx.seed;
  ao.y_count = ctx.y_count();
  ao.tolerance = ctx.opt_number("tolerances.alt");
  ao.pair_budget = ctx.budget("alt_pairs");
  auto alt = ctx.stage("alternative convexity", [&] { return is_alternative_c_convex(*ctx.model, phi, ao); });
  json aj{{"holds", alt.holds}, {"worst_gap", alt.worst_gap}, {"tolerance", alt.tolerance},
          {"triples", alt.triples}, {"pairs", alt.pairs}};
  if (alt.x.size() > 0) aj["witness"] = {{"x0", vec_json(alt.x0)}, {"x1", vec_json(alt.x1)}, {"x", vec_json(alt.x)}};
  ctx.out->report["alternative_c_convexity"] = aj;
}

json structured_json(const StructuredViolation& sv) {
  return {{"z0", vec_json(sv.z0)},
          {"z1", vec_json(sv.z1)},
          {"y0", vec_json(sv.y0)},
          {"y1", vec_json(sv.y1)},
          {"h1", sv.h1},
          {"w0", vec_json(sv.w0)},
          {"w1", vec_json(sv.w1)},
          {"theta", sv.theta},
          {"rho", sv.rho},
          {"tau", sv.tau},
          {"sigma", sv.sigma},
          {"level_residual", {sv.level_residual[0], sv.level_residual[1]}},
          {"direction_margin", {sv.direction_margin[0], sv.direction_margin[1]}},
          {"cone_samples", sv.cone_samples}};
}

json params_json(const CounterexampleParams& p) {
  return {{"r", p.r},
          {"delta", p.delta},
          {"epsilon", p.epsilon},
          {"cone_direction_count", p.cone_direction_count},
          {"theta_tilde", p.theta_tilde},
          {"mu", p.mu ? json(*p.mu) : json(nullptr)},
          {"epsilon_delta", p.epsilon_delta},
          {"tilt_bound", p.tilt_bound},
          {"sampled_bound", p.sampled_bound}};
}

json verify_json(const VerifyReport& r) {
  return {{"alt_holds", r.alt_holds},
          {"alt_worst_gap", r.alt_worst_gap},
          {"alt_tolerance", r.alt_tolerance},
          {"alt_triples", r.alt_triples},
          {"c_convex_gap", r.c_convex_gap},
          {"envelope_tolerance", r.envelope_tolerance},
          {"subdiff_empty_at", r.subdiff_empty_at ? vec_json(*r.subdiff_empty_at) : json(nullptr)},
          {"verdict", r.verdict}};
}

void cmd_counterexample(Context& ctx) {
  SearchOptions so;
  so.loeper_budget = ctx.budget("loeper");
  so.triple_budget = ctx.budget("triples");
  so.levels = static_cast<int>(ctx.cfg.integer("counterexample.levels"));
  so.x_count = ctx.x_lattice().count(0);
  so.verify.y_count = ctx.y_count();
  so.find.t_grid = ctx.budget("loeper_t_grid");
  if (ctx.cfg.has_value("counterexample.level_fraction")) so.refine.level_fraction = ctx.cfg.number("counterexample.level_fraction");
  if (ctx.model->dim() < 2) throw Error(ErrorKind::ConfigError, "the counterexample pipeline needs domain.dim >= 2");

  json j;
  CounterexampleResult res;
  try {
    res = ctx.stage("counterexample search", [&] { return search_counterexample(*ctx.model, ctx.seed, so); });
  } catch (const Error& e) {
    j["status"] = "NoViolationFound";
    j["message"] = std::string("Loeper violation search: ") + e.what() +
                   "; the cost may satisfy Loeper's property, so no counterexample exists";
    j["verdict"] = false;
    ctx.out->report["counterexample"] = j;
    ctx.out->exit_status = 2;
    return;
  }
  j["raw"] = {{"x0", vec_json(res.raw.x0)},     {"x1", vec_json(res.raw.x1)},     {"y0", vec_json(res.raw.y0)},
              {"y1", vec_json(res.raw.y1)},     {"h1p", res.raw.h1p},             {"t0", res.raw.t0},
              {"xt0", vec_json(res.raw.xt0)},   {"margin_end0", res.raw.margin_end0},
              {"margin_end1", res.raw.margin_end1}, {"margin_mid", res.raw.margin_mid}};
  j["structured"] = structured_json(res.sv);
  json atts = json::array();
  for (const auto& a : res.attempts) atts.push_back({{"params", params_json(a.params)}, {"status", a.status}, {"report", verify_json(a.report)}});
  j["attempts"] = atts;
  j["success_level"] = res.success ? json(*res.success) : json(nullptr);
  j["verdict"] = res.success.has_value();
  j["status"] = res.success ? "counterexample verified" : "no level passed verification";
  if (res.phi) ctx.out->artifacts.emplace_back("phi_eps.csv", grid_csv(*res.phi));
  ctx.out->report["counterexample"] = j;
  if (!res.success) ctx.out->exit_status = 2;
}

void dump(const json& j, std::string& s) {
  switch (j.type()) {
    case json::value_t::object: {
      s += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted
        if (!first) s += ',';
        first = false;
        s += json(it.key()).dump();
        s += ':';
        dump(it.value(), s);
      }
      s += '}';
      break;
    }
    case json::value_t::array: {
      s += '[';
      for (size_t i = 0; i < j.size(); ++i) {
        if (i) s += ',';
        dump(j[i], s);
      }
      s += ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      s += std::isfinite(v) ? fmt17(v) : "null";
      break;
    }
    default:
      s += j.dump();
  }
}

std::string verdict_line(const std::string& name, const json& j) {
  auto str = [](const json& v) {
    std::string s;
    dump(v, s);
    return s;
  };
  if (name == "constants") {
    return "constants: lip_c " + str(j["lip_c"]) + ", alpha " + str(j["alpha"]) + ", beta " + str(j["beta"]) +
           ", L " + str(j["L"]) + (j.contains("mu_theta") ? ", mu_theta " + str(j["mu_theta"]) : "");
  }
  if (name == "mtw") return "mtw: " + j["verdict"].get<std::string>() + " (min " + str(j["min_value"]) + ")";
  if (name == "loeper") return "loeper: " + j["verdict"].get<std::string>() + " (best gap " + str(j["best_gap"]) + ")";
  if (name == "qqconv") return "qqconv: C " + str(j["C"]) + (j["unbounded"].get<bool>() ? " (unbounded)" : "");
  if (name == "chord_probe") return "chord probe: max deviation " + str(j["max_deviation"]);
  if (name == "chord") return "chord: F(probe) = " + str(j["probe_value"]);
  if (name == "envelope") {
    return std::string("envelope: ") + (j["is_c_convex"].get<bool>() ? "c-convex" : "not c-convex") + " (gap " +
           str(j["max_gap"]) + ")";
  }
  if (name == "c_convexity") {
    return std::string("c-convexity: ") + (j["holds"].get<bool>() ? "holds" : "fails") + " (gap " + str(j["max_gap"]) + ")";
  }
  if (name == "alternative_c_convexity") {
    return std::string("alternative c-convexity: ") + (j["holds"].get<bool>() ? "holds" : "fails") + " (worst gap " +
           str(j["worst_gap"]) + " over " + str(j["triples"]) + " triples)";
  }
  if (name == "counterexample") {
    std::string s = "counterexample: verdict " + std::string(j["verdict"].get<bool>() ? "true" : "false") + " (" +
                    j["status"].get<std::string>() + ")";
    if (!j.contains("attempts")) return s;
    int level = 0;
    for (const auto& a : j["attempts"]) {
      s += "\n  level " + std::to_string(level++) + ": epsilon " + str(a["params"]["epsilon"]) + ", " +
           a["status"].get<std::string>();
      const auto& r = a["report"];
      if (a["status"] == "ok") {
        s += ", alt " + std::string(r["alt_holds"].get<bool>() ? "holds" : "fails") + ", envelope gap " +
             str(r["c_convex_gap"]) + (r["subdiff_empty_at"].is_null() ? "" : ", empty subdifferential");
      }
    }
    return s;
  }
  return {};
}

}  // namespace

RunOutcome run(const std::string& command, const RunConfig& config) {
  if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
    throw Error(ErrorKind::ConfigError, "unknown command '" + command + "'");
  }
  RunOutcome out;
  Context ctx{config, nullptr, 0, &out};
  ctx.seed = static_cast<std::uint64_t>(config.integer("seed"));
  ctx.model = model_from(config);
  out.report["schema_version"] = kSchemaVersion;
  out.report["command"] = command;
  out.report["seed"] = ctx.seed;
  json echo = json::object();
  for (const auto& [k, v] : config.values()) {
    if (k != "output_dir") echo[k] = v;
  }
  out.report["config"] = echo;
  out.report["cost"] = {{"name", ctx.model->name()}, {"parameters", ctx.model->parameters()},
                        {"separation", ctx.model->domain().separation()}};

  if (command == "analyze") cmd_analyze(ctx);
  if (command == "chord") cmd_chord(ctx);
  if (command == "envelope") cmd_envelope(ctx);
  if (command == "check-convexity") cmd_check_convexity(ctx);
  if (command == "counterexample") cmd_counterexample(ctx);
  if (command == "constants") cmd_constants(ctx);

  json files = json::array({"report.json", "summary.txt", "timings.json"});
  for (const auto& [name, body] : out.artifacts) files.push_back(name);
  out.report["artifacts"] = files;
  return out;
}

std::string serialize_json(const json& j) {
  std::string s;
  dump(j, s);
  s += '\n';
  return s;
}

std::string serialize_summary(const json& report) {
  std::string s = "command: " + report.value("command", std::string("?")) + "\n";
  s += "cost: " + report["cost"].value("name", std::string("?")) + " " + report["cost"].value("parameters", std::string()) + "\n";
  s += "seed: " + std::to_string(report.value("seed", 0UL)) + "\n";
  for (const char* key : {"constants", "mtw", "loeper", "qqconv", "chord_probe", "chord", "envelope", "c_convexity",
                          "alternative_c_convexity", "counterexample"}) {
    if (report.contains(key)) s += verdict_line(key, report[key]) + "\n";
  }
  return s;
}

void write_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::IoError, "cannot write '" + tmp.string() + "'");
    f << contents;
    f.flush();
    if (!f) throw Error(ErrorKind::IoError, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename onto '" + target.string() + "': " + ec.message());
}

int run_to_directory(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    RunOutcome r = run(command, config);
    const std::filesystem::path dir(config.get("output_dir"));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create output directory '" + dir.string() + "'");
    for (const auto& [name, body] : r.artifacts) write_atomic((dir / name).string(), body);
    json t = json::object();
    for (const auto& [stage, sec] : r.timings) t[stage] = t.value(stage, 0.0) + sec;
    write_atomic((dir / "timings.json").string(), serialize_json(t));
    const std::string summary = serialize_summary(r.report);
    write_atomic((dir / "summary.txt").string(), summary);
    write_atomic((dir / "report.json").string(), serialize_json(r.report));
    out << summary;
    if (r.exit_status == 2 && r.report.contains("counterexample")) {
      err << "counterexample: " << r.report["counterexample"].value("message", r.report["counterexample"]["status"].get<std::string>()) << "\n";
    }
    return r.exit_status;
  } catch (const StageError& e) {
    err << "error in stage " << e.what() << "\n";
  } catch (const Error& e) {
    const bool cfg = e.kind() == ErrorKind::ConfigError;
    err << "error in stage " << (cfg ? "config" : e.kind() == ErrorKind::IoError ? "output" : "setup") << ": " << e.what()
        << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace cconv
