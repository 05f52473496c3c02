#include "cconv/support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cconv/errors.hpp"

namespace cconv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Box [lo, hi] intersected with the region; projection alternates for balls.
struct TrustBox {
  Vec lo, hi;
  const Region* region;

  Vec project(const Vec& y) const {
    Vec p = y.cwiseMax(lo).cwiseMin(hi);
    if (region->shape() == Region::Shape::Ball) {
      for (int it = 0; it < 4 && !region->contains(p); ++it) p = region->project(p).cwiseMax(lo).cwiseMin(hi);
      p = region->project(p);
    }
    return p;
  }
};

// Log-sum-exp smoothing of the inner min over the candidate pieces.
struct Smoothed {
  const CostModel& model;
  const Mat& pk;
  const std::vector<double>& vk;
  Mat xcol;  // the target x as a single column
  mutable std::vector<double> a;
  mutable Mat grads;

  double eval(const Vec& y, double tau, Vec* grad) const {
    const Eigen::Index k = pk.cols();
    a.resize(static_cast<size_t>(k));
    model.c_cols_x(pk, y, a.data());
    double m = kInf;
    for (Eigen::Index i = 0; i < k; ++i) {
      a[static_cast<size_t>(i)] += vk[static_cast<size_t>(i)];
      m = std::min(m, a[static_cast<size_t>(i)]);
    }
    double z = 0.0;
    std::vector<double> w(static_cast<size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) {
      w[static_cast<size_t>(i)] = std::exp(-(a[static_cast<size_t>(i)] - m) / tau);
      z += w[static_cast<size_t>(i)];
    }
    double cx;
    model.c_cols_x(xcol, y, &cx);
    const double val = m - tau * std::log(z) - cx;
    if (grad) {
      model.grad_y_cols_x(pk, y, grads);
      Vec g = Vec::Zero(y.size());
      for (Eigen::Index i = 0; i < k; ++i) g += (w[static_cast<size_t>(i)] / z) * grads.col(i);
      Mat gx;
      model.grad_y_cols_x(xcol, y, gx);
      *grad = g - gx.col(0);
    }
    return val;
  }
};

// Smoothing continuation with projected BFGS; returns the final point.
Vec maximize(const Smoothed& f, Vec y, const TrustBox& box, double radius, double scale, int stages = 6,
             int iters = 40) {
  const int n = static_cast<int>(y.size());
  double tau = 1e-2 * scale;
  auto clip = [&](Vec& d, const Vec& g) {
    for (int i = 0; i < n; ++i) {
      if ((y[i] <= box.lo[i] && g[i] < 0.0) || (y[i] >= box.hi[i] && g[i] > 0.0)) d[i] = 0.0;
    }
  };
  for (int stage = 0; stage < stages; ++stage, tau *= 1e-2) {
    Mat h = Mat::Identity(n, n) * (radius / scale);
    Vec g;
    double val = f.eval(y, tau, &g);
    for (int it = 0; it < iters; ++it) {
      Vec d = h * g;
      clip(d, g);
      if (d.dot(g) <= 0.0) {
        h = Mat::Identity(n, n) * (radius / std::max(g.norm(), 1e-300));
        d = h * g;
        clip(d, g);
        if (d.dot(g) <= 0.0) break;
      }
      if (d.norm() > radius) d *= radius / d.norm();
      double step = 1.0;
      bool accepted = false;
      Vec yn, gn;
      double vn = 0.0;
      for (int ls = 0; ls < 50; ++ls, step *= 0.5) {
        yn = box.project(y + step * d);
        vn = f.eval(yn, tau, &gn);
        if (vn >= val + 1e-4 * g.dot(yn - y)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const Vec s = yn - y;
      const Vec q = g - gn;  // gradient change of the negated objective
      const double sq = s.dot(q);
      if (sq > 1e-16 * s.norm() * q.norm()) {
        const Mat id = Mat::Identity(n, n);
        const double rho = 1.0 / sq;
        h = (id - rho * s * q.transpose()) * h * (id - rho * q * s.transpose()) + rho * s * s.transpose();
      }
      const double moved = s.norm();
      y = yn;
      g = gn;
      val = vn;
      if (moved <= 1e-15 * (1.0 + y.norm())) break;
    }
  }
  return y;
}

}  // namespace

SupportSolver::SupportSolver(const CostModel& model, Mat piece_x, std::vector<double> piece_v, const Lattice& ylat,
                             SupportOptions opt)
    : model_(model), px_(std::move(piece_x)), pv_(std::move(piece_v)), ylat_(ylat), opt_(opt) {
  if (px_.cols() == 0 || static_cast<size_t>(px_.cols()) != pv_.size()) {
    throw Error(ErrorKind::InvalidArgument, "support problem needs matching, non-empty pieces");
  }
  lat_min_.assign(static_cast<size_t>(ylat_.size()), kInf);
  std::vector<double> buf(static_cast<size_t>(px_.cols()));
  for (int j : ylat_.inside_nodes()) {
    model_.c_cols_x(px_, ylat_.node(j), buf.data());
    double m = kInf;
    for (size_t i = 0; i < buf.size(); ++i) m = std::min(m, buf[i] + pv_[i]);
    lat_min_[static_cast<size_t>(j)] = m;
  }
}

double SupportSolver::min_at(const Vec& y) const {
  std::vector<double> buf(static_cast<size_t>(px_.cols()));
  model_.c_cols_x(px_, y, buf.data());
  double m = kInf;
  for (size_t i = 0; i < buf.size(); ++i) m = std::min(m, buf[i] + pv_[i]);
  return m;
}

double SupportSolver::value_at(const Vec& x, const Vec& y) const { return min_at(y) - model_.c(x, y); }

SupportSolver::Result SupportSolver::scan(const Vec& x) const {
  std::vector<double> cx(static_cast<size_t>(ylat_.size()));
  model_.c_cols_y(x, ylat_.nodes(), cx.data());
  Result best;
  best.value = -kInf;
  for (int j : ylat_.inside_nodes()) {
    const double v = lat_min_[static_cast<size_t>(j)] - cx[static_cast<size_t>(j)];
    if (v > best.value) {
      best.value = v;
      best.node = j;
    }
  }
  best.y = ylat_.node(best.node);
  best.h = lat_min_[static_cast<size_t>(best.node)];
  return best;
}

std::vector<SupportSolver::Result> SupportSolver::local_maxima(const Vec& x, int max_count) const {
  std::vector<double> cx(static_cast<size_t>(ylat_.size()));
  model_.c_cols_y(x, ylat_.nodes(), cx.data());
  std::vector<double> obj(static_cast<size_t>(ylat_.size()), -kInf);
  for (int j : ylat_.inside_nodes()) obj[static_cast<size_t>(j)] = lat_min_[static_cast<size_t>(j)] - cx[static_cast<size_t>(j)];
  std::vector<Result> out;
  for (int j : ylat_.inside_nodes()) {
    bool is_max = true;
    for (int nb : ylat_.neighbors(j)) {
      if (obj[static_cast<size_t>(nb)] > obj[static_cast<size_t>(j)]) {
        is_max = false;
        break;
      }
    }
    if (!is_max) continue;
    Result r;
    r.value = obj[static_cast<size_t>(j)];
    r.node = j;
    r.y = ylat_.node(j);
    r.h = lat_min_[static_cast<size_t>(j)];
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const Result& a, const Result& b) { return a.value > b.value; });
  if (static_cast<int>(out.size()) > max_count) out.resize(static_cast<size_t>(max_count));
  return out;
}

SupportSolver::Result SupportSolver::solve(const Vec& x) const {
  Result best = scan(x);
  if (!opt_.refine) return best;
  Result r = refine_from(x, best.y);
  r.node = best.node;
  return r.value >= best.value ? r : best;
}

SupportSolver::Result SupportSolver::refine_from(const Vec& x, const Vec& start) const {
  const int n = static_cast<int>(start.size());
  const Region& yr = ylat_.region();
  const double radius = opt_.radius_cells * ylat_.max_spacing();
  // The lattice maximizer can sit many cells away from the continuous one, so
  // the search ranges over all of Y; the radius only caps the step length.
  TrustBox box{yr.lo(), yr.hi(), &yr};
  const Eigen::Index np = px_.cols();
  std::vector<double> all(static_cast<size_t>(np));
  auto eval_all = [&](const Vec& y) {
    model_.c_cols_x(px_, y, all.data());
    for (Eigen::Index i = 0; i < np; ++i) all[static_cast<size_t>(i)] += pv_[static_cast<size_t>(i)];
  };
  auto argmin_all = [&]() {
    return static_cast<Eigen::Index>(std::min_element(all.begin(), all.end()) - all.begin());
  };

  // Cutting planes: maximize the min over a working set, then add pieces that
  // undercut it at the new point. At a point where no piece undercuts, the
  // working-set optimum is optimal for the full problem.
  std::vector<Eigen::Index> work;
  auto add = [&](Eigen::Index i) {
    if (std::find(work.begin(), work.end(), i) == work.end()) work.push_back(i);
  };
  auto add_probes = [&](const Vec& y, double r) {
    eval_all(y);
    add(argmin_all());
    for (int a = 0; a < n; ++a) {
      for (double s : {-1.0, 1.0}) {
        Vec yp = y;
        yp[a] += s * r;
        eval_all(box.project(yp));
        add(argmin_all());
      }
    }
  };
  add_probes(start, 0.5 * radius);

  // Objective scale: largest piece gradient of c(x_k, .) - c(x, .) over the working set.
  Mat g0, gx;
  Mat wx(px_.rows(), static_cast<Eigen::Index>(work.size()));
  for (size_t i = 0; i < work.size(); ++i) wx.col(static_cast<Eigen::Index>(i)) = px_.col(work[i]);
  model_.grad_y_cols_x(wx, start, g0);
  model_.grad_y_cols_x(Mat(x), start, gx);
  double gmax = 0.0;
  for (Eigen::Index i = 0; i < g0.cols(); ++i) gmax = std::max(gmax, (g0.col(i) - gx.col(0)).norm());
  const double scale = std::max(gmax * radius, 1e-300);

  Vec y = box.project(start);
  for (int round = 0; round < 40; ++round) {
    Mat pk(px_.rows(), static_cast<Eigen::Index>(work.size()));
    std::vector<double> vk(work.size());
    for (size_t i = 0; i < work.size(); ++i) {
      pk.col(static_cast<Eigen::Index>(i)) = px_.col(work[i]);
      vk[i] = pv_[static_cast<size_t>(work[i])];
    }
    Smoothed f{model_, pk, vk, Mat(x), {}, {}};
    y = maximize(f, y, box, radius, scale, opt_.stages, opt_.iters_per_stage);

    std::vector<double> wv(work.size());
    model_.c_cols_x(pk, y, wv.data());
    double wmin = kInf;
    for (size_t i = 0; i < work.size(); ++i) wmin = std::min(wmin, wv[i] + vk[i]);
    eval_all(y);
    const size_t before = work.size();
    const double slack = 1e-13 * (1.0 + std::fabs(wmin));
    // The few most violating pieces, then probes around the new point.
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < np; ++i) {
      if (all[static_cast<size_t>(i)] < wmin - slack) order.push_back(i);
    }
    if (order.empty()) break;
    std::partial_sort(order.begin(), order.begin() + std::min<size_t>(order.size(), 3), order.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return all[static_cast<size_t>(a)] < all[static_cast<size_t>(b)]; });
    for (size_t i = 0; i < std::min<size_t>(order.size(), 3); ++i) add(order[i]);
    add_probes(y, 0.25 * radius / (1 + round));
    if (work.size() == before) break;
  }

  Result r;
  r.y = y;
  r.h = min_at(y);
  r.value = r.h - model_.c(x, y);
  const double h0 = min_at(start);
  const double v0 = h0 - model_.c(x, start);
  if (v0 > r.value) {
    r.y = start;
    r.h = h0;
    r.value = v0;
  }
  return r;
}

}  // namespace cconv
