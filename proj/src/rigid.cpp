#include "korn/rigid.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace korn {

namespace {

// Solve the symmetric 3x3 system M q = r by Gaussian elimination with
// partial pivoting; returns false when rank-deficient at the tolerance.
bool solve3(std::array<std::array<long double, 3>, 3> M, std::array<long double, 3> r,
            std::array<double, 3>& q, double rank_tol, double& cond) {
  long double maxdiag = std::max({std::abs(M[0][0]), std::abs(M[1][1]), std::abs(M[2][2])});
  long double minpiv = maxdiag;
  for (int k = 0; k < 3; ++k) {
    int piv = k;
    for (int i = k + 1; i < 3; ++i)
      if (std::abs(M[i][k]) > std::abs(M[piv][k])) piv = i;
    if (piv != k) {
      std::swap(M[piv], M[k]);
      std::swap(r[piv], r[k]);
    }
    long double d = M[k][k];
    minpiv = std::min(minpiv, (long double)std::abs(d));
    if (std::abs(d) <= rank_tol * maxdiag) return false;
    for (int i = k + 1; i < 3; ++i) {
      long double f = M[i][k] / d;
      for (int j = k; j < 3; ++j) M[i][j] -= f * M[k][j];
      r[i] -= f * r[k];
    }
  }
  std::array<long double, 3> ql{};
  for (int k = 2; k >= 0; --k) {
    long double s = r[k];
    for (int j = k + 1; j < 3; ++j) s -= M[k][j] * ql[j];
    ql[k] = s / M[k][k];
  }
  for (int k = 0; k < 3; ++k) q[k] = double(ql[k]);
  cond = (minpiv > 0) ? double(maxdiag / minpiv) : 0.0;
  return true;
}

}  // namespace

FitResult fit_rigid(const DisplacementField& u, const CellSet& region) {
  const GridSpec& g = u.grid;
  if (!(region.grid == g)) throw std::invalid_argument("fit_rigid: region grid mismatch");
  size_t cells = region.count();
  if (cells < 3) throw std::invalid_argument("fit_rigid: region must have at least 3 cells");

  // Model u1 = b1 - w y, u2 = b2 + w x. Normal equations in (w, b1, b2).
  long double Sxx = 0, Sx = 0, Sy = 0, S = 0;
  long double R0 = 0, R1 = 0, R2 = 0;
  for (int iy = region.wy0(); iy <= region.wy1(); ++iy)
    for (int ix = region.wx0(); ix <= region.wx1(); ++ix) {
      if (!region.test(ix, iy)) continue;
      Vec2 p = g.cell_center(ix, iy);
      const Vec2& v = u.at(ix, iy);
      S += 1;
      Sx += p.x;
      Sy += p.y;
      Sxx += p.x * p.x + p.y * p.y;
      R0 += -p.y * v.x + p.x * v.y;
      R1 += v.x;
      R2 += v.y;
    }
  std::array<std::array<long double, 3>, 3> M{{{Sxx, -Sy, Sx}, {-Sy, S, 0}, {Sx, 0, S}}};
  std::array<long double, 3> rhs{R0, R1, R2};
  std::array<double, 3> q{};
  double cond = 0.0;
  double scale = double(std::max((long double)1.0, Sxx / std::max((long double)1.0, S)));
  if (!solve3(M, rhs, q, 1e-10 / scale, cond))
    throw std::invalid_argument("fit_rigid: rank-deficient region");

  FitResult out;
  out.motion = RigidMotion{q[0], {q[1], q[2]}};
  out.cells = cells;
  out.condition = cond;
  double acc = 0.0, h2 = g.h() * g.h();
  for (int iy = region.wy0(); iy <= region.wy1(); ++iy)
    for (int ix = region.wx0(); ix <= region.wx1(); ++ix) {
      if (!region.test(ix, iy)) continue;
      Vec2 r = u.at(ix, iy) - out.motion.eval(g.cell_center(ix, iy));
      acc += r.norm2() * h2;
    }
  out.residual_l2 = std::sqrt(acc);
  return out;
}

bool fit_rigid_window(const DisplacementField& u, const Box& window, FitResult& out) {
  const GridSpec& g = u.grid;
  double hh = g.h();
  int ix0 = std::max(0, int(std::floor((window.x0 + g.mu) / hh)));
  int ix1 = std::min(g.n - 1, int(std::ceil((window.x1 + g.mu) / hh)));
  int iy0 = std::max(0, int(std::floor((window.y0 + g.mu) / hh)));
  int iy1 = std::min(g.n - 1, int(std::ceil((window.y1 + g.mu) / hh)));
  long double Sxx = 0, Sx = 0, Sy = 0, S = 0;
  long double R0 = 0, R1 = 0, R2 = 0;
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix) {
      Vec2 p = g.cell_center(ix, iy);
      if (!window.contains(p)) continue;
      const Vec2& v = u.at(ix, iy);
      S += 1;
      Sx += p.x;
      Sy += p.y;
      Sxx += p.x * p.x + p.y * p.y;
      R0 += -p.y * v.x + p.x * v.y;
      R1 += v.x;
      R2 += v.y;
    }
  if (S < 3) return false;
  std::array<std::array<long double, 3>, 3> M{{{Sxx, -Sy, Sx}, {-Sy, S, 0}, {Sx, 0, S}}};
  std::array<long double, 3> rhs{R0, R1, R2};
  std::array<double, 3> q{};
  double cond = 0.0;
  double scale = double(std::max((long double)1.0, Sxx / std::max((long double)1.0, S)));
  if (!solve3(M, rhs, q, 1e-10 / scale, cond)) return false;
  out.motion = RigidMotion{q[0], {q[1], q[2]}};
  out.cells = size_t(double(S));
  out.condition = cond;
  double acc = 0.0, h2 = hh * hh;
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix) {
      Vec2 p = g.cell_center(ix, iy);
      if (!window.contains(p)) continue;
      Vec2 r = u.at(ix, iy) - out.motion.eval(p);
      acc += r.norm2() * h2;
    }
  out.residual_l2 = std::sqrt(acc);
  return true;
}

TrimmedFit fit_rigid_trimmed(const DisplacementField& u, const CellSet& region, double area_budget, double p) {
  const GridSpec& g = u.grid;
  double h2 = g.h() * g.h();
  double region_area = region.area();
  if (area_budget < 0 || area_budget >= region_area)
    throw std::invalid_argument("fit_rigid_trimmed: budget must satisfy 0 <= budget < area(region)");

  TrimmedFit out;
  out.inliers = region;
  size_t budget_cells = size_t(std::floor(area_budget / h2));
  // keep at least 3 inlier cells
  budget_cells = std::min(budget_cells, region.count() > 3 ? region.count() - 3 : size_t(0));

  auto residual_of = [&](const RigidMotion& m, const CellSet& in) {
    double acc = 0.0;
    for (int iy = in.wy0(); iy <= in.wy1(); ++iy)
      for (int ix = in.wx0(); ix <= in.wx1(); ++ix) {
        if (!in.test(ix, iy)) continue;
        double r = (u.at(ix, iy) - m.eval(g.cell_center(ix, iy))).norm();
        acc += std::pow(r, p) * h2;
      }
    return std::pow(acc, 1.0 / p);
  };

  FitResult fit = fit_rigid(u, out.inliers);
  double res = residual_of(fit.motion, out.inliers);
  size_t remaining = budget_cells;
  int sweeps = 0;
  double uscale = 0.0;
  for (const auto& vv : u.u) uscale = std::max(uscale, vv.norm());
  while (remaining > 0) {
    if (res <= 1e-13 * (1.0 + uscale)) break;  // already a perfect fit
    size_t drop = std::max<size_t>(1, size_t(std::ceil(0.1 * double(remaining))));
    drop = std::min(drop, remaining);
    // worst-residual cells first
    std::vector<std::pair<double, int>> worst;
    for (int iy = out.inliers.wy0(); iy <= out.inliers.wy1(); ++iy)
      for (int ix = out.inliers.wx0(); ix <= out.inliers.wx1(); ++ix) {
        if (!out.inliers.test(ix, iy)) continue;
        double r = (u.at(ix, iy) - fit.motion.eval(g.cell_center(ix, iy))).norm();
        worst.emplace_back(r, g.idx(ix, iy));
      }
    std::sort(worst.begin(), worst.end(), [](auto& a, auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    if (worst.size() <= 3) break;
    drop = std::min(drop, worst.size() - 3);
    for (size_t k = 0; k < drop; ++k) out.inliers.mask[worst[k].second] = 0;
    remaining -= drop;
    ++sweeps;
    fit = fit_rigid(u, out.inliers);
    double res2 = residual_of(fit.motion, out.inliers);
    bool stagnated = res > 0 && (res - res2) < 0.01 * res;
    res = res2;
    if (stagnated || res == 0.0) break;
  }
  out.motion = fit.motion;
  out.residual_lp = res;
  out.sweeps = sweeps;
  out.trimmed_area = region_area - out.inliers.area();
  return out;
}

BoundCheck bound_check_A(const RigidMotion& a, const CellSet& region, double q) {
  if (q < 1.0) throw std::invalid_argument("bound_check_A: q must be >= 1");
  BoundCheck out;
  out.lhs = a.a_frobenius();
  const GridSpec& g = region.grid;
  std::vector<double> vals(size_t(g.n) * g.n, 0.0);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (region.test(ix, iy)) vals[g.idx(ix, iy)] = a.eval(g.cell_center(ix, iy)).norm();
  double area = region.area();
  if (area <= 0) return out;
  double anorm = lp_norm_scalar(vals, g, q, &region).value;
  double expo = std::isinf(q) ? -0.5 : (-0.5 - 1.0 / q);
  out.rhs_core = std::pow(area, expo) * anorm;
  out.ratio = (out.rhs_core > 0) ? out.lhs / out.rhs_core : 0.0;
  if (out.lhs == 0.0) out.ratio = 0.0;
  return out;
}

double extend_bound_check(const RigidMotion& a, const CellSet& small_region, const Square& big_square, double q) {
  const GridSpec& g = small_region.grid;
  if (small_region.count() == 0) throw std::invalid_argument("extend_bound_check: empty region");
  CellSet big = rasterize(g, big_square);
  std::vector<double> vals(size_t(g.n) * g.n, 0.0);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) vals[g.idx(ix, iy)] = a.eval(g.cell_center(ix, iy)).norm();
  double nq_big = lp_norm_scalar(vals, g, q, &big).value;
  double nq_small = lp_norm_scalar(vals, g, q, &small_region).value;
  double R = big_square.halfside;
  double core = std::pow(R * R / small_region.area(), 0.5 + 1.0 / q);
  if (nq_small <= 0 || core <= 0) return 0.0;
  return nq_big / (core * nq_small);
}

}  // namespace korn
