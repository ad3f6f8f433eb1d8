#include "korn/smoothing.hpp"

#include <algorithm>
#include <cmath>

namespace korn {

namespace {

// C1 quintic profile: 1 on [0,1], smooth descent to 0 at 1.5 (Q to Q').
inline double bump1d(double t) {
  double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a >= 1.5) return 0.0;
  double s = (a - 1.0) / 0.5;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

}  // namespace

PartitionOfUnity build_pou(const WhitneyCovering& cov) {
  const GridSpec& g = cov.grid;
  PartitionOfUnity pou;
  pou.grid = g;
  pou.covered = CellSet(g);
  std::vector<double> total(size_t(g.n) * g.n, 0.0);
  double hh = g.h();

  for (int sqid = 0; sqid < int(cov.squares.size()); ++sqid) {
    const Square& q = cov.squares[sqid];
    Box qp = enlarged_q1(q).box();
    int ix0 = std::max(0, int(std::floor((qp.x0 + g.mu) / hh)));
    int ix1 = std::min(g.n - 1, int(std::ceil((qp.x1 + g.mu) / hh)));
    int iy0 = std::max(0, int(std::floor((qp.y0 + g.mu) / hh)));
    int iy1 = std::min(g.n - 1, int(std::ceil((qp.y1 + g.mu) / hh)));
    PartitionOfUnity::SquareWeights sw;
    sw.square = sqid;
    sw.x0 = ix0;
    sw.y0 = iy0;
    sw.w = ix1 - ix0 + 1;
    sw.h = iy1 - iy0 + 1;
    sw.phi.assign(size_t(sw.w) * sw.h, 0.0);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        Vec2 c = g.cell_center(ix, iy);
        double tx = (c.x - q.center.x) / q.halfside;
        double ty = (c.y - q.center.y) / q.halfside;
        double v = bump1d(tx) * bump1d(ty);
        if (v > 0) {
          sw.phi[size_t(iy - iy0) * sw.w + (ix - ix0)] = v;
          total[g.idx(ix, iy)] += v;
        }
      }
    pou.weights.push_back(std::move(sw));
  }

  // renormalize by the local sum; exact partition of unity afterwards
  for (auto& sw : pou.weights)
    for (int dy = 0; dy < sw.h; ++dy)
      for (int dx = 0; dx < sw.w; ++dx) {
        double& v = sw.phi[size_t(dy) * sw.w + dx];
        if (v > 0) {
          double t = total[g.idx(sw.x0 + dx, sw.y0 + dy)];
          v /= t;
        }
      }
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (total[g.idx(ix, iy)] > 0) pou.covered.set(ix, iy);

  // any owned cell must carry weight
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (cov.cell_owner[g.idx(ix, iy)] >= 0 && !pou.covered.test(ix, iy))
        throw geometry_error("build_pou: covered cell with zero total weight");

  // gradient bound and sum error, measured discretely
  std::vector<double> sum(size_t(g.n) * g.n, 0.0);
  for (const auto& sw : pou.weights) {
    double d = cov.squares[sw.square].diam();
    double maxg = 0.0;
    for (int dy = 0; dy < sw.h; ++dy)
      for (int dx = 0; dx < sw.w; ++dx) {
        double v = sw.phi[size_t(dy) * sw.w + dx];
        sum[g.idx(sw.x0 + dx, sw.y0 + dy)] += v;
        double vr = (dx + 1 < sw.w) ? sw.phi[size_t(dy) * sw.w + dx + 1] : 0.0;
        double vu = (dy + 1 < sw.h) ? sw.phi[size_t(dy + 1) * sw.w + dx] : 0.0;
        maxg = std::max({maxg, std::abs(vr - v) / hh, std::abs(vu - v) / hh});
      }
    pou.max_grad_times_d = std::max(pou.max_grad_times_d, maxg * d);
  }
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (pou.covered.test(ix, iy)) pou.sum_error = std::max(pou.sum_error, std::abs(sum[g.idx(ix, iy)] - 1.0));
  return pou;
}

SquareFits fit_per_square(const DisplacementField& u, const WhitneyCovering& cov, const FitOptions& opts) {
  const GridSpec& g = u.grid;
  SquareFits out;
  int nsq = int(cov.squares.size());
  out.motions.assign(nsq, RigidMotion{});
  out.fitted.assign(nsq, 0);
  out.residuals.assign(nsq, 0.0);
  out.exceptional = CellSet(g);
  double theta = cov.layout.theta;

  double u_linf = 0.0;
  if (opts.linf_guard)
    for (const auto& v : u.u) u_linf = std::max(u_linf, v.norm());

  // direct trimmed fits on every square whose Q'' is not inside Z
  std::vector<int> zid(size_t(g.n) * g.n, -1);
  for (const auto& z : cov.zcomps)
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix)
        if (z.cells.test(ix, iy)) zid[g.idx(ix, iy)] = z.id;

  auto q2_inside_z = [&](const Square& q, int zcomp) {
    Box b = enlarged_q2(q).box();
    double hh = g.h();
    int ix0 = std::max(0, int(std::floor((b.x0 + g.mu) / hh)));
    int ix1 = std::min(g.n - 1, int(std::ceil((b.x1 + g.mu) / hh)));
    int iy0 = std::max(0, int(std::floor((b.y0 + g.mu) / hh)));
    int iy1 = std::min(g.n - 1, int(std::ceil((b.y1 + g.mu) / hh)));
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        if (b.contains(g.cell_center(ix, iy))) {
          int zc = zid[g.idx(ix, iy)];
          if (zcomp < 0 ? (zc < 0) : (zc != zcomp)) return false;
        }
    return true;
  };

  std::vector<int> square_z(nsq, -1);  // Z component the square sits in (Q''⊂X)
  for (const auto& z : cov.zcomps)
    for (int sqid = 0; sqid < nsq; ++sqid)
      if (cov.squares[sqid].gen == z.gen && q2_inside_z(cov.squares[sqid], z.id)) square_z[sqid] = z.id;

  double h2 = g.h() * g.h();
  for (int sqid = 0; sqid < nsq; ++sqid) {
    const Square& q = cov.squares[sqid];
    if (square_z[sqid] >= 0) continue;  // handled per Z component
    double jl = u.jumps.empty() ? 0.0 : segment_measure_in(enlarged_q1(q), u.jumps);
    if (jl <= 0.0) {
      // jump-free square: plain windowed fit, no exceptional cells
      FitResult fr;
      if (fit_rigid_window(u, enlarged_q1(q).box(), fr) || fit_rigid_window(u, q.box(), fr)) {
        out.motions[sqid] = fr.motion;
        out.fitted[sqid] = 1;
        out.residuals[sqid] = fr.residual_l2;
      } else {
        out.exceptional |= rasterize(g, q);
      }
      continue;
    }
    CellSet region = rasterize(g, enlarged_q1(q));
    if (region.count() < 3) {
      // too small to fit through Q'; fall back to the base square or mark all
      region = rasterize(g, q);
      if (region.count() < 3) {
        out.exceptional |= region;
        continue;
      }
    }
    double budget = std::min(q.diam() * theta * theta * jl, region.area() - 4.0 * h2);
    budget = std::max(budget, 0.0);
    out.budget_total += budget;
    TrimmedFit tf = fit_rigid_trimmed(u, region, budget, 2.0);
    RigidMotion m = tf.motion;
    if (opts.linf_guard) {
      StrainField dummy;  // local energy estimate via residual scale
      (void)dummy;
      // ||e(u)||_{L2(Q')} proxy: residual growth; the guard clamps on jump-heavy squares
      if (tf.residual_lp > u_linf) m = RigidMotion{};
    }
    out.motions[sqid] = m;
    out.fitted[sqid] = 1;
    out.residuals[sqid] = tf.residual_lp;
    // E_Q = trimmed cells
    for (int iy = region.wy0(); iy <= region.wy1(); ++iy)
      for (int ix = region.wx0(); ix <= region.wx1(); ++ix)
        if (region.test(ix, iy) && !tf.inliers.test(ix, iy)) out.exceptional.set(ix, iy);
  }

  // one motion per Z component: boundary square with the smallest residual
  out.z_motions.assign(cov.zcomps.size(), RigidMotion{});
  for (const auto& z : cov.zcomps) {
    int best = -1;
    for (int sqid : z.boundary_squares)
      if (out.fitted[sqid] && (best < 0 || out.residuals[sqid] < out.residuals[best])) best = sqid;
    RigidMotion zm{};
    if (best >= 0)
      zm = out.motions[best];
    else if (!z.boundary_squares.empty()) {
      // boundary squares unfittable (degenerate); fit the whole component
      CellSet region = z.cells;
      if (region.count() >= 3) zm = fit_rigid(u, region).motion;
    }
    out.z_motions[z.id] = zm;
    for (int sqid = 0; sqid < nsq; ++sqid)
      if (square_z[sqid] == z.id) {
        out.motions[sqid] = zm;
        out.fitted[sqid] = 1;
      }
  }
  return out;
}

SmoothApprox assemble_ubar(const DisplacementField& u, const WhitneyCovering& cov, const PartitionOfUnity& pou,
                           const SquareFits& fits, double p) {
  const GridSpec& g = u.grid;
  SmoothApprox out;
  out.ubar = DisplacementField(g);

  for (const auto& sw : pou.weights) {
    const RigidMotion& a = fits.motions[sw.square];
    for (int dy = 0; dy < sw.h; ++dy)
      for (int dx = 0; dx < sw.w; ++dx) {
        double v = sw.phi[size_t(dy) * sw.w + dx];
        if (v <= 0) continue;
        int ix = sw.x0 + dx, iy = sw.y0 + dy;
        Vec2 av = a.eval(g.cell_center(ix, iy));
        out.ubar.at(ix, iy).x += v * av.x;
        out.ubar.at(ix, iy).y += v * av.y;
      }
  }
  // cells with no coverage keep u's value (they are exceptional anyway)
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (!pou.covered.test(ix, iy)) out.ubar.at(ix, iy) = u.at(ix, iy);

  out.exceptional = fits.exceptional;
  out.exceptional |= cov.zmask;
  out.exceptional |= cov.uncovered;
  out.f_area = out.exceptional.area();

  // ledger ratios
  StrainField su = strain(u);
  StrainField sbar = strain(out.ubar);  // ubar has no jump set attached
  CellSet offF = out.exceptional.complement();
  out.e_u_l2 = lp_norm_grad(su, 2.0, nullptr, true).value;
  out.e_ubar_lp = lp_norm_grad(sbar, p, nullptr, true).value;
  // ||∇ubar − ∇u||_Lp off F, on cells where both gradients exist
  {
    std::vector<double> diff(size_t(g.n) * g.n, 0.0);
    CellSet both = offF;
    for (size_t i = 0; i < diff.size(); ++i) {
      if (!su.valid[i] || !sbar.valid[i]) {
        both.mask[i] = 0;
        continue;
      }
      Mat2 d{sbar.grad[i].a11 - su.grad[i].a11, sbar.grad[i].a12 - su.grad[i].a12,
             sbar.grad[i].a21 - su.grad[i].a21, sbar.grad[i].a22 - su.grad[i].a22};
      diff[i] = d.frobenius();
    }
    out.grad_diff_lp = lp_norm_scalar(diff, g, p, &both).value;
  }
  {
    std::vector<double> diff(size_t(g.n) * g.n, 0.0);
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = (out.ubar.u[i] - u.u[i]).norm();
    out.val_diff_lp = lp_norm_scalar(diff, g, p, &offF).value;
  }
  return out;
}

TraceCompare trace_compare(const DisplacementField& u, const Square& q1, const Square& q2, const RigidMotion& a1,
                           const RigidMotion& a2) {
  const GridSpec& g = u.grid;
  double h = g.h();
  Box b1 = q1.box(), b2 = q2.box();
  // shared edge: equal halfside squares sharing a full edge, or any abutting pair
  bool vertical = std::abs(b1.x1 - b2.x0) < 1e-12 || std::abs(b2.x1 - b1.x0) < 1e-12;
  bool horizontal = std::abs(b1.y1 - b2.y0) < 1e-12 || std::abs(b2.y1 - b1.y0) < 1e-12;
  double lo, hi, coord;
  if (vertical) {
    coord = (std::abs(b1.x1 - b2.x0) < 1e-12) ? b1.x1 : b2.x1;
    lo = std::max(b1.y0, b2.y0);
    hi = std::min(b1.y1, b2.y1);
  } else if (horizontal) {
    coord = (std::abs(b1.y1 - b2.y0) < 1e-12) ? b1.y1 : b2.y1;
    lo = std::max(b1.x0, b2.x0);
    hi = std::min(b1.x1, b2.x1);
  } else {
    throw std::invalid_argument("trace_compare: squares do not share an edge");
  }
  if (hi - lo <= 0) throw std::invalid_argument("trace_compare: squares do not share an edge");

  TraceCompare out;
  out.edge_length = hi - lo;
  SegmentIndex sidx(g, u.jumps);
  int steps = std::max(2, int(std::round((hi - lo) / h)));
  double dt = (hi - lo) / steps;
  for (int k = 0; k < steps; ++k) {
    double t = lo + (k + 0.5) * dt;
    Vec2 p = vertical ? Vec2{coord, t} : Vec2{t, coord};
    // Γ exclusion: midpoints within one cell of a jump segment
    bool excluded = false;
    if (!u.jumps.empty()) {
      Box nb{p.x - h, p.y - h, p.x + h, p.y + h};
      std::vector<int> cand;
      sidx.query(nb, cand);
      for (int si : cand)
        if (point_segment_distance(p, u.jumps.segments[si]) <= h) {
          excluded = true;
          break;
        }
    }
    if (excluded) {
      out.gamma_excluded += dt;
      continue;
    }
    // trace value: the adjacent cell values on both sides, each compared
    // against its motion at the same material point
    double hh = g.h();
    auto sample = [&](Vec2 off, const RigidMotion& a, double& acc) {
      int ix = std::clamp(int(std::floor((p.x + off.x + g.mu) / hh)), 0, g.n - 1);
      int iy = std::clamp(int(std::floor((p.y + off.y + g.mu) / hh)), 0, g.n - 1);
      Vec2 r = u.at(ix, iy) - a.eval(g.cell_center(ix, iy));
      acc += r.norm2();
    };
    Vec2 inward = vertical ? Vec2{0.25 * h, 0} : Vec2{0, 0.25 * h};
    double acc = 0.0;
    sample(Vec2{-inward.x, -inward.y}, a1, acc);
    sample(inward, a2, acc);
    out.edge_integral += acc * dt;
    Vec2 gap = a1.eval(p) - a2.eval(p);
    out.motion_gap_sq += gap.norm2() * dt;
  }
  return out;
}

}  // namespace korn
