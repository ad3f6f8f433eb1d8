#include "korn/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

namespace korn {

namespace {

// ---- sub-field extraction ----------------------------------------------------

struct SubField {
  DisplacementField field;  // centered local domain (-s, s)^2
  int x0 = 0, y0 = 0, m = 0;
  Vec2 offset;  // parent coords of local origin
};

bool cell_aligned(const GridSpec& g, const Square& sq, int& x0, int& y0, int& m) {
  double h = g.h();
  double fx = (sq.center.x - sq.halfside + g.mu) / h;
  double fy = (sq.center.y - sq.halfside + g.mu) / h;
  double fm = 2.0 * sq.halfside / h;
  x0 = int(std::llround(fx));
  y0 = int(std::llround(fy));
  m = int(std::llround(fm));
  return std::abs(fx - x0) < 1e-9 && std::abs(fy - y0) < 1e-9 && std::abs(fm - m) < 1e-9 && m >= 1 &&
         x0 >= 0 && y0 >= 0 && x0 + m <= g.n && y0 + m <= g.n;
}

SubField extract_subfield(const DisplacementField& u, const Square& sq) {
  SubField out;
  if (!cell_aligned(u.grid, sq, out.x0, out.y0, out.m))
    throw geometry_error("extract_subfield: square is not cell-aligned");
  out.offset = sq.center;
  GridSpec sub(out.m, sq.halfside);
  out.field = DisplacementField(sub);
  for (int iy = 0; iy < out.m; ++iy)
    for (int ix = 0; ix < out.m; ++ix) out.field.at(ix, iy) = u.at(out.x0 + ix, out.y0 + iy);
  // clip to the OPEN square and recenter the jumps; segments on the square
  // boundary are interface, not interior jump
  Box b = sq.box();
  double shrink = 1e-9 * sq.halfside;
  b.x0 += shrink; b.y0 += shrink; b.x1 -= shrink; b.y1 -= shrink;
  Vec2 a, c;
  for (const auto& s : u.jumps.segments)
    if (clip_segment(s, b, a, c)) {
      Vec2 la = a - sq.center, lc = c - sq.center;
      if ((lc - la).norm() > 0) out.field.jumps.add(Segment{la, lc});
    }
  return out;
}

// gradient of (values - nothing) with stencils blocked by jumps and label changes
struct MaskedGradient {
  std::vector<Mat2> grad;
  std::vector<uint8_t> valid;
};

MaskedGradient label_aware_gradient(const std::vector<Vec2>& values, const GridSpec& g, const SegmentSet& jumps,
                                    const std::vector<int>& labels) {
  MaskedGradient out;
  out.grad.assign(size_t(g.n) * g.n, Mat2{});
  out.valid.assign(size_t(g.n) * g.n, 0);
  SegmentIndex sidx(g, jumps);
  bool nj = jumps.empty();
  double h = g.h();
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int lab = labels[g.idx(ix, iy)];
      auto ok = [&](int ax, int ay, int bx, int by) {
        if (!g.valid(ax, ay) || !g.valid(bx, by)) return false;
        if (labels[g.idx(ax, ay)] != lab || labels[g.idx(bx, by)] != lab) return false;
        if (!nj && sidx.any_intersecting(Segment{g.cell_center(ax, ay), g.cell_center(bx, by)})) return false;
        return true;
      };
      double d1x = 0, d2x = 0, d1y = 0, d2y = 0;
      bool okx = false, oky = false;
      auto diff = [&](int ax, int ay, int bx, int by, double span, double& d1, double& d2) {
        if (!ok(ax, ay, bx, by)) return false;
        const Vec2& ua = values[g.idx(ax, ay)];
        const Vec2& ub = values[g.idx(bx, by)];
        d1 = (ub.x - ua.x) / span;
        d2 = (ub.y - ua.y) / span;
        return true;
      };
      okx = diff(ix - 1, iy, ix + 1, iy, 2 * h, d1x, d2x) || diff(ix, iy, ix + 1, iy, h, d1x, d2x) ||
            diff(ix - 1, iy, ix, iy, h, d1x, d2x);
      oky = diff(ix, iy - 1, ix, iy + 1, 2 * h, d1y, d2y) || diff(ix, iy, ix, iy + 1, h, d1y, d2y) ||
            diff(ix, iy - 1, ix, iy, h, d1y, d2y);
      if (okx && oky) {
        out.grad[g.idx(ix, iy)] = Mat2{d1x, d1y, d2x, d2y};
        out.valid[g.idx(ix, iy)] = 1;
      }
    }
  return out;
}

// one-pass least-squares rigid fits for every label; cells in `exclude` are
// skipped when the remainder has >= 3 cells, tiny pieces get the mean
struct PieceAccum {
  long double S = 0, Sx = 0, Sy = 0, Sxx = 0, R0 = 0, Su1 = 0, Su2 = 0;
  void add(const Vec2& p, const Vec2& v) {
    S += 1;
    Sx += p.x;
    Sy += p.y;
    Sxx += p.x * p.x + p.y * p.y;
    R0 += p.x * v.y - p.y * v.x;
    Su1 += v.x;
    Su2 += v.y;
  }
  bool solve(RigidMotion& m) const {
    if (S < 1) return false;
    if (S < 3) {
      m = RigidMotion{0.0, {double(Su1 / S), double(Su2 / S)}};
      return true;
    }
    long double xb = Sx / S, yb = Sy / S;
    long double den = Sxx - S * (xb * xb + yb * yb);
    if (den <= 1e-24 * std::max((long double)1.0, Sxx)) {
      m = RigidMotion{0.0, {double(Su1 / S), double(Su2 / S)}};
      return true;
    }
    long double num = R0 - (xb * Su2 - yb * Su1);
    long double w = num / den;
    m.omega = double(w);
    m.b = {double(Su1 / S + w * yb), double(Su2 / S - w * xb)};
    return true;
  }
};

void multifit_pieces(const DisplacementField& u, const std::vector<int>& labels, int np, const CellSet* exclude,
                     std::vector<RigidMotion>& motions) {
  const GridSpec& g = u.grid;
  std::vector<PieceAccum> off(np), all(np);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int i = g.idx(ix, iy);
      int lab = labels[i];
      Vec2 p = g.cell_center(ix, iy);
      all[lab].add(p, u.u[i]);
      if (!exclude || !exclude->mask[i]) off[lab].add(p, u.u[i]);
    }
  for (int k = 0; k < np; ++k) {
    const PieceAccum& a = off[k].S >= 3 ? off[k] : all[k];
    RigidMotion m = motions[k];
    if (a.solve(m)) motions[k] = m;
  }
}


double label_boundary_length(const std::vector<int>& labels, const GridSpec& g) {
  double h = g.h();
  size_t edges = 0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (ix + 1 < g.n && labels[g.idx(ix, iy)] != labels[g.idx(ix + 1, iy)]) ++edges;
      if (iy + 1 < g.n && labels[g.idx(ix, iy)] != labels[g.idx(ix, iy + 1)]) ++edges;
    }
  return double(edges) * h + 8.0 * g.mu;  // interior label boundary + ∂Q
}

}  // namespace

// ---- decompose_square ----------------------------------------------------------

SquareDecomposition decompose_square(const DisplacementField& u, const PipelineConfig& cfg) {
  const GridSpec& g = u.grid;
  double mu = g.mu;
  double theta = cfg.theta;
  SquareDecomposition out;
  out.grid = g;
  out.jump_len = u.jumps.total_length();

  GenerationWindow win = compute_window(g, theta);
  out.window = win;

  double jlen = out.jump_len;
  if (jlen > 2.0 * std::sqrt(2.0) * mu / (theta * theta) + 1e-12) {
    // raw length can exceed the concentration bound when jumps sit on dyadic
    // lattice lines; the binding requirement is the per-square density
    DensityCheck dc = check_density_bound(u.jumps, g, theta);
    if (dc.violations > 0)
      throw pipeline_error("decompose_square: jump density too large; regularize first",
                           "{\"jump_length\":" + std::to_string(jlen) +
                               ",\"density_violations\":" + std::to_string(dc.violations) + "}");
  }

  auto type2_direct = [&](const DisplacementField& target, bool from_ubar) {
    out.type1 = false;
    CellSet all(g, true);
    double budget = std::min(jlen * jlen, 0.45 * all.area());
    TrimmedFit tf = fit_rigid_trimmed(target, all, budget, 2.0);
    out.motion = tf.motion;
    out.fit_residual = tf.residual_lp;
    out.exceptional = CellSet(g);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix)
        if (!tf.inliers.test(ix, iy)) out.exceptional.set(ix, iy);
    // Γ_u: boundary strip within one cell of a jump
    double gl = 0.0;
    if (!u.jumps.empty()) {
      double h = g.h();
      SegmentIndex sidx(g, u.jumps);
      int steps = 4 * g.n;
      double per = 8.0 * mu / steps;
      for (int k = 0; k < steps; ++k) {
        double t = double(k) / steps * 8.0 * mu;
        // walk the boundary counterclockwise
        double side = 2.0 * mu;
        Vec2 p;
        double tt = t;
        if (tt < side)
          p = {-mu + tt, -mu};
        else if ((tt -= side) < side)
          p = {mu, -mu + tt};
        else if ((tt -= side) < side)
          p = {mu - tt, mu};
        else
          p = {-mu, mu - (tt - side)};
        Box nb{p.x - h, p.y - h, p.x + h, p.y + h};
        std::vector<int> cand;
        sidx.query(nb, cand);
        for (int si : cand)
          if (point_segment_distance(p, u.jumps.segments[si]) <= h) {
            gl += per;
            break;
          }
      }
    }
    out.trace_gamma_len = gl;
    out.jump_free = u.jumps.empty();
    (void)from_ubar;
    return out;
  };

  // atomic square or small jump: single trimmed fit
  if (!win.valid || jlen < mu * theta * theta) return type2_direct(u, false);

  // full construction
  DyadicLayout layout(mu, theta);
  SegmentSet jstar = auxiliary_jump(u.jumps, mu, theta, win.j0);
  BadSquareIndex index = classify_bad(jstar, layout, win, cfg.r());
  AuxPartition aux = build_aux_partition(index, u.jumps, g);
  WhitneyCovering cov = build_whitney(aux, index);
  out.truncated = cov.window.truncated;
  out.window = cov.window;

  // S_u = J \ ∪ Q' of the covering
  double covered_jump = 0.0;
  {
    // per segment, merge parameter intervals covered by enlarged squares
    for (const auto& seg : u.jumps.segments) {
      std::vector<std::pair<double, double>> iv;
      double L = seg.length();
      Vec2 a, b;
      for (const auto& q : cov.squares) {
        if (!clip_segment(seg, enlarged_q1(q).box(), a, b)) continue;
        double t0 = (a - seg.a).norm() / L, t1 = (b - seg.a).norm() / L;
        if (t0 > t1) std::swap(t0, t1);
        iv.emplace_back(t0, t1);
      }
      std::sort(iv.begin(), iv.end());
      double c0 = 0, c1 = -1;
      for (auto [t0, t1] : iv) {
        if (t0 > c1) {
          if (c1 > c0) covered_jump += (c1 - c0) * L;
          c0 = t0;
          c1 = t1;
        } else
          c1 = std::max(c1, t1);
      }
      if (c1 > c0) covered_jump += (c1 - c0) * L;
    }
  }
  out.s_u_len = std::max(0.0, jlen - covered_jump);

  PartitionOfUnity pou = build_pou(cov);
  FitOptions fopts;
  fopts.p = cfg.p;
  fopts.linf_guard = cfg.linf_guard;
  SquareFits fits = fit_per_square(u, cov, fopts);
  out.covering_residuals = fits.residuals;

  if (out.s_u_len < mu * theta * theta) {
    // case (b)(i): single motion via the smooth approximation
    SmoothApprox smooth = assemble_ubar(u, cov, pou, fits, cfg.p);
    SquareDecomposition r = type2_direct(smooth.ubar, true);
    r.exceptional |= smooth.exceptional;
    // covering of a type-2 square refines dyadically in the next iteration
    return r;
  }

  // ---- type 1 ------------------------------------------------------------------
  out.type1 = true;
  SmoothApprox smooth = assemble_ubar(u, cov, pou, fits, cfg.p);
  double eps_area = cfg.john_eps_area_rel * 4.0 * mu * mu / std::max(1, aux.piece_count);
  JohnRefineResult refined = john_refine(aux, cfg.john_rho_target, eps_area);

  // labels: refined pieces, rest components, then Z overrides
  std::vector<int> labels = refined.labels;
  int next = refined.piece_count;
  std::vector<uint8_t> isz, isrest;
  isz.assign(next, 0);
  isrest.assign(next, 0);
  {
    Components rc = label_components(refined.rest, 4);
    for (int c = 0; c < rc.count; ++c) {
      int id = next++;
      isz.push_back(0);
      isrest.push_back(1);
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
          if (rc.labels[g.idx(ix, iy)] == c) labels[g.idx(ix, iy)] = id;
    }
  }
  for (const auto& z : cov.zcomps) {
    int id = next++;
    isz.push_back(1);
    isrest.push_back(0);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix)
        if (z.cells.test(ix, iy)) labels[g.idx(ix, iy)] = id;
  }
  // re-split: labels must be connected pieces
  {
    CellSet full(g, true);
    std::vector<int> final_labels(size_t(g.n) * g.n, -1);
    std::vector<uint8_t> fz, frest;
    int count = 0;
    std::deque<int> q;
    for (int sy = 0; sy < g.n; ++sy)
      for (int sx = 0; sx < g.n; ++sx) {
        int si = g.idx(sx, sy);
        if (final_labels[si] >= 0) continue;
        int lab = labels[si];
        int id = count++;
        fz.push_back(lab >= 0 && lab < int(isz.size()) ? isz[lab] : 0);
        frest.push_back(lab >= 0 && lab < int(isrest.size()) ? isrest[lab] : 0);
        final_labels[si] = id;
        q.push_back(si);
        while (!q.empty()) {
          int i = q.front();
          q.pop_front();
          int x = i % g.n, y = i / g.n;
          auto visit = [&](int nx, int ny) {
            if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n) return;
            int ni = g.idx(nx, ny);
            if (final_labels[ni] < 0 && labels[ni] == lab) {
              final_labels[ni] = id;
              q.push_back(ni);
            }
          };
          visit(x - 1, y);
          visit(x + 1, y);
          visit(x, y - 1);
          visit(x, y + 1);
        }
      }
    out.labels = std::move(final_labels);
    out.piece_count = count;
    out.piece_is_z = fz;
    (void)frest;
  }

  // motions per piece
  out.exceptional = smooth.exceptional;
  out.rest = refined.rest;
  out.uncovered = cov.uncovered;
  out.piece_motions.assign(out.piece_count, RigidMotion{});
  multifit_pieces(u, out.labels, out.piece_count, &out.exceptional, out.piece_motions);
  out.covering = cov.squares;
  out.boundary_len = label_boundary_length(out.labels, g);
  return out;
}

// ---- poincare_split --------------------------------------------------------------

namespace {

struct EdgeVal {
  double lo = 0, hi = 0;  // value interval across the edge
};

struct ScalarCoarea {
  CoareaComponent comp;
  std::vector<int> band_of;  // per cell, band index relative to comp.band_lo
  int bands = 0;
};

ScalarCoarea coarea_scalar(const std::vector<double>& vals, const GridSpec& g, const EdgeCuts& cuts, double rho) {
  ScalarCoarea out;
  double h = g.h();
  // uncut dual edges with their value intervals
  std::vector<EdgeVal> edges;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (ix + 1 < g.n && !cuts.hcut_at(ix, iy)) {
        double a = vals[g.idx(ix, iy)], b = vals[g.idx(ix + 1, iy)];
        if (a != b) edges.push_back({std::min(a, b), std::max(a, b)});
      }
      if (iy + 1 < g.n && !cuts.vcut_at(ix, iy)) {
        double a = vals[g.idx(ix, iy)], b = vals[g.idx(ix, iy + 1)];
        if (a != b) edges.push_back({std::min(a, b), std::max(a, b)});
      }
    }
  double tv = 0.0;
  for (const auto& e : edges) tv += (e.hi - e.lo) * h;
  out.comp.tv = tv;
  double M = tv / rho;

  double vmin = *std::min_element(vals.begin(), vals.end());
  double vmax = *std::max_element(vals.begin(), vals.end());
  // cap the band count; a larger M only tightens the same certificates
  // (it corresponds to running with a smaller rho)
  if (M > 0.0 && (vmax - vmin) / M > 4096.0) M = (vmax - vmin) / 4096.0;
  out.comp.M = M;
  if (tv <= 0.0 || M <= 0.0) {
    // constant off-jump; single band anchored at the value itself
    out.comp.levels = {vmin};
    out.comp.band_lo = 0;
    out.bands = 1;
    out.band_of.assign(vals.size(), 0);
    return out;
  }

  int blo = int(std::floor(vmin / M)) - 1;
  int bhi = int(std::floor(vmax / M)) + 1;
  int nb = bhi - blo + 1;
  // bucket edges by the bands their interval spans
  std::vector<std::vector<int>> by_band(nb);
  for (int e = 0; e < int(edges.size()); ++e) {
    int b0 = std::max(blo, int(std::floor(edges[e].lo / M)));
    int b1 = std::min(bhi, int(std::floor(edges[e].hi / M)));
    for (int b = b0; b <= b1; ++b) by_band[b - blo].push_back(e);
  }

  auto per_at = [&](int band, double t) {
    double per = 0.0;
    for (int e : by_band[band - blo])
      if (edges[e].lo <= t && t < edges[e].hi) per += h;
    return per;
  };

  // Per band: candidate levels are the midpoints of the gaps between
  // consecutive cell values (never equal to a value, so a chosen level is a
  // genuine cut or a genuine dodge). Minimize the cut perimeter; ties prefer
  // the candidate closest to the band midpoint. The minimum over a band is
  // at most the band average, which certifies the 2*rho budget.
  auto pick_levels = [&]() {
    std::vector<double> levels(nb + 1, 0.0);
    for (int b = blo; b <= bhi; ++b) {
      double lo = b * M, hi = (b + 1) * M;
      double mid = 0.5 * (lo + hi);
      std::vector<double> brk;
      for (int e : by_band[b - blo]) {
        if (edges[e].lo > lo && edges[e].lo <= hi) brk.push_back(edges[e].lo);
        if (edges[e].hi > lo && edges[e].hi <= hi) brk.push_back(edges[e].hi);
      }
      brk.push_back(lo);
      brk.push_back(hi);
      std::sort(brk.begin(), brk.end());
      brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
      double best_t = mid, best_p = std::numeric_limits<double>::infinity();
      auto try_t = [&](double t) {
        if (t <= lo || t > hi) return;
        double p = per_at(b, t);
        if (p < best_p - 1e-15 ||
            (p < best_p + 1e-15 && std::abs(t - mid) < std::abs(best_t - mid) - 1e-15)) {
          best_p = p;
          best_t = t;
        }
      };
      for (size_t k = 0; k + 1 < brk.size(); ++k) try_t(0.5 * (brk[k] + brk[k + 1]));
      if (brk.size() < 2) try_t(mid);
      levels[b - blo] = best_t;
    }
    return levels;
  };

  auto added_perimeter_of = [&](const std::vector<double>& levels) {
    double ap = 0.0;
    for (const auto& e : edges) {
      int crossings = 0;
      for (size_t b = 0; b + 1 < size_t(nb); ++b)
        if (e.lo <= levels[b] && levels[b] < e.hi) ++crossings;
      if (crossings > 0) ap += h;
    }
    return 2.0 * ap;
  };

  std::vector<double> levels = pick_levels();
  // strictly increasing by construction (levels in disjoint bands)
  out.comp.levels.assign(levels.begin(), levels.end() - 1);
  out.comp.band_lo = blo;
  out.bands = nb - 1;

  // piece perimeter: every boundary edge of some E_i crosses a chosen level
  // (each edge separates at most two pieces, hence the factor two)
  out.comp.added_perimeter = added_perimeter_of(levels);

  // band assignment: find i with t_i < v <= t_{i+1}
  out.band_of.assign(vals.size(), 0);
  const auto& L = out.comp.levels;
  for (size_t i = 0; i < vals.size(); ++i) {
    double v = vals[i];
    int b = int(std::upper_bound(L.begin(), L.end(), v) - L.begin()) - 1;
    b = std::clamp(b, 0, int(L.size()) - 1);
    out.band_of[i] = b;
  }
  return out;
}

}  // namespace

CoareaPartition poincare_split_scalar(const std::vector<double>& values, const GridSpec& grid,
                                      const SegmentSet& jumps, double rho) {
  if (rho <= 0) throw std::invalid_argument("poincare_split: rho must be positive");
  CoareaPartition out;
  out.grid = grid;
  out.m = 1;
  EdgeCuts cuts(grid);
  cuts.add_segments(jumps);
  ScalarCoarea sc = coarea_scalar(values, grid, cuts, rho);
  out.comps.push_back(sc.comp);
  if (sc.comp.tv <= 0) {
    out.single_piece = true;
    out.labels.assign(values.size(), 0);
    out.piece_count = 1;
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    out.translations = {{mean}};
    for (double v : values) out.v_linf = std::max(out.v_linf, std::abs(v - mean));
    return out;
  }
  std::map<int, int> remap;
  out.labels.assign(values.size(), -1);
  for (size_t i = 0; i < values.size(); ++i) {
    auto it = remap.find(sc.band_of[i]);
    if (it == remap.end()) {
      it = remap.emplace(sc.band_of[i], int(remap.size())).first;
      out.translations.push_back({sc.comp.levels[sc.band_of[i]]});
    }
    out.labels[i] = it->second;
  }
  out.piece_count = int(remap.size());
  for (size_t i = 0; i < values.size(); ++i) {
    double v = values[i] - out.translations[out.labels[i]][0];
    out.v_linf = std::max(out.v_linf, std::abs(v));
  }
  out.budget_ok = sc.comp.added_perimeter <= 2.0 * rho + 1e-9;
  out.v_bound_ok = out.v_linf <= 2.0 * sc.comp.M + 1e-12;
  return out;
}

CoareaPartition poincare_split(const DisplacementField& u, double rho) {
  if (rho <= 0) throw std::invalid_argument("poincare_split: rho must be positive");
  const GridSpec& g = u.grid;
  CoareaPartition out;
  out.grid = g;
  out.m = 2;
  EdgeCuts cuts(g);
  cuts.add_segments(u.jumps);
  std::vector<double> c1(u.u.size()), c2(u.u.size());
  for (size_t i = 0; i < u.u.size(); ++i) {
    c1[i] = u.u[i].x;
    c2[i] = u.u[i].y;
  }
  ScalarCoarea s1 = coarea_scalar(c1, g, cuts, rho);
  ScalarCoarea s2 = coarea_scalar(c2, g, cuts, rho);
  out.comps.push_back(s1.comp);
  out.comps.push_back(s2.comp);
  if (s1.comp.tv <= 0 && s2.comp.tv <= 0) out.single_piece = true;

  std::map<std::pair<int, int>, int> remap;
  out.labels.assign(u.u.size(), -1);
  for (size_t i = 0; i < u.u.size(); ++i) {
    std::pair<int, int> key{s1.band_of[i], s2.band_of[i]};
    auto it = remap.find(key);
    if (it == remap.end()) {
      it = remap.emplace(key, int(remap.size())).first;
      out.translations.push_back({s1.comp.levels[key.first], s2.comp.levels[key.second]});
    }
    out.labels[i] = it->second;
  }
  out.piece_count = int(remap.size());
  for (size_t i = 0; i < u.u.size(); ++i) {
    const auto& t = out.translations[out.labels[i]];
    out.v_linf = std::max(out.v_linf, std::max(std::abs(c1[i] - t[0]), std::abs(c2[i] - t[1])));
  }
  for (int c = 0; c < 2; ++c) {
    const auto& sc = out.comps[c];
    if (sc.tv > 0 && sc.added_perimeter > 2.0 * rho + 1e-9) out.budget_ok = false;
  }
  double Mmax = std::max(s1.comp.M, s2.comp.M);
  out.v_bound_ok = out.v_linf <= 2.0 * Mmax + 1e-12;
  return out;
}

// ---- korn_poincare_small_jump ------------------------------------------------------

TruncationResult korn_poincare_small_jump(const DisplacementField& u, double q_exponent) {
  const GridSpec& g = u.grid;
  TruncationResult out;
  out.jump_length = u.jumps.total_length();
  StrainField su = strain(u);
  out.e_u_l2 = lp_norm_grad(su, 2.0, nullptr, true).value;

  CellSet all(g, true);
  if (out.jump_length <= 0.0) {
    out.degenerate = true;
    out.motion = fit_rigid(u, all).motion;
    out.E = CellSet(g);
    std::vector<double> diff(u.u.size());
    for (size_t i = 0; i < u.u.size(); ++i) {
      int ix = int(i) % g.n, iy = int(i) / g.n;
      diff[i] = (u.u[i] - out.motion.eval(g.cell_center(ix, iy))).norm();
    }
    out.u_minus_a_lq = lp_norm_scalar(diff, g, q_exponent, nullptr).value;
    out.u_minus_a_linf = lp_norm_scalar(diff, g, std::numeric_limits<double>::infinity(), nullptr).value;
    return out;
  }

  double budget = std::min(out.jump_length * out.jump_length, 0.45 * all.area());
  TrimmedFit tf = fit_rigid_trimmed(u, all, budget, 2.0);
  out.motion = tf.motion;
  out.M = std::pow(out.jump_length, -0.5) * out.e_u_l2;

  // v and its clamped version
  std::vector<Vec2> v(u.u.size());
  for (size_t i = 0; i < u.u.size(); ++i) {
    int ix = int(i) % g.n, iy = int(i) / g.n;
    v[i] = u.u[i] - out.motion.eval(g.cell_center(ix, iy));
  }
  double M2 = 2.0 * out.M;
  EdgeCuts cuts(g);
  cuts.add_segments(u.jumps);
  double h = g.h();

  out.E = CellSet(g);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> vc(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      double x = comp == 0 ? v[i].x : v[i].y;
      vc[i] = std::clamp(x, -M2, M2);
    }
    // pick t in (M, 2M) minimizing the discrete perimeter of {|v'| < t}
    double best_t = 2.0 * out.M, best_p = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 32; ++k) {
      double t = out.M + (out.M) * double(k + 1) / 34.0;
      double per = 0.0;
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
          int i = g.idx(ix, iy);
          bool in_i = std::abs(vc[i]) < t;
          if (ix + 1 < g.n && !cuts.hcut_at(ix, iy) && in_i != (std::abs(vc[g.idx(ix + 1, iy)]) < t)) per += h;
          if (iy + 1 < g.n && !cuts.vcut_at(ix, iy) && in_i != (std::abs(vc[g.idx(ix, iy + 1)]) < t)) per += h;
        }
      if (per < best_p) {
        best_p = per;
        best_t = t;
      }
    }
    out.levels.push_back(best_t);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix)
        if (!(std::abs(vc[g.idx(ix, iy)]) < best_t)) out.E.set(ix, iy);
    // truncation identity: v' = v wherever |v'| < 2M
    for (size_t i = 0; i < v.size(); ++i) {
      double x = comp == 0 ? v[i].x : v[i].y;
      if (std::abs(vc[i]) < best_t && vc[i] != x) out.truncation_identity_ok = false;
    }
  }
  out.e_area = out.E.area();
  // H1(∂*E ∩ Q)
  {
    size_t edges = 0;
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        if (ix + 1 < g.n && out.E.test(ix, iy) != out.E.test(ix + 1, iy)) ++edges;
        if (iy + 1 < g.n && out.E.test(ix, iy) != out.E.test(ix, iy + 1)) ++edges;
      }
    out.e_perimeter = double(edges) * h;
  }
  CellSet offE = out.E.complement();
  std::vector<double> diff(u.u.size());
  for (size_t i = 0; i < u.u.size(); ++i) diff[i] = v[i].norm();
  out.u_minus_a_lq = lp_norm_scalar(diff, g, q_exponent, &offE).value;
  out.u_minus_a_linf = lp_norm_scalar(diff, g, std::numeric_limits<double>::infinity(), &offE).value;
  return out;
}

// ---- iterate -----------------------------------------------------------------------

namespace {

struct WorkPiece {
  RigidMotion motion;
  bool is_z = false;
  bool is_rest = false;
  bool absorbed = false;
};

struct WorkSquare {
  Square sq;       // absolute coordinates on the root grid
  bool final_ = false;
  double residual = 0.0;
};

double epsilon_bound(const DisplacementField& u, const StrainField& su, double p) {
  // largest area A such that the worst-A-area mass of |∇u|^p stays below
  // mu^(2-p) ||e(u)||_2^p; returned as A/4
  const GridSpec& g = u.grid;
  double h2 = g.h() * g.h();
  std::vector<double> mags;
  mags.reserve(su.grad.size());
  for (size_t i = 0; i < su.grad.size(); ++i)
    if (su.valid[i]) mags.push_back(std::pow(su.grad[i].frobenius(), p) * h2);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double e2 = lp_norm_grad(su, 2.0, nullptr, true).value;
  double budget = std::pow(g.mu, 2.0 - p) * std::pow(e2, p);
  double acc = 0.0;
  size_t k = 0;
  for (; k < mags.size(); ++k) {
    if (acc + mags[k] > budget) break;
    acc += mags[k];
  }
  return double(k) * h2 / 4.0;
}


// split label regions into pieces connected off the jump cuts
void split_labels_cut(const GridSpec& g, const EdgeCuts& jcuts, std::vector<int>& labels,
                      std::vector<WorkPiece>& pieces) {
  std::vector<int> cc(labels.size(), -1);
  std::vector<WorkPiece> cpieces;
  std::deque<int> q;
  for (int sy = 0; sy < g.n; ++sy)
    for (int sx = 0; sx < g.n; ++sx) {
      int si = g.idx(sx, sy);
      if (cc[si] >= 0) continue;
      int lab = labels[si];
      int id = int(cpieces.size());
      cpieces.push_back(pieces[lab]);
      cc[si] = id;
      q.push_back(si);
      while (!q.empty()) {
        int i = q.front();
        q.pop_front();
        int x = i % g.n, y = i / g.n;
        auto visit = [&](int nx, int ny) {
          int ni = g.idx(nx, ny);
          if (cc[ni] < 0 && labels[ni] == lab) {
            cc[ni] = id;
            q.push_back(ni);
          }
        };
        if (x > 0 && !jcuts.hcut_at(x - 1, y)) visit(x - 1, y);
        if (x + 1 < g.n && !jcuts.hcut_at(x, y)) visit(x + 1, y);
        if (y > 0 && !jcuts.vcut_at(x, y - 1)) visit(x, y - 1);
        if (y + 1 < g.n && !jcuts.vcut_at(x, y)) visit(x, y + 1);
      }
    }
  labels = std::move(cc);
  pieces = std::move(cpieces);
}

// least-squares refit of every piece; cells in `exclude` are skipped when the
// remainder is big enough, pieces below three cells get a mean translation
void refit_pieces(const DisplacementField& u, const CellSet* exclude, const std::vector<int>& labels,
                  std::vector<WorkPiece>& pieces) {
  int np = int(pieces.size());
  std::vector<RigidMotion> motions(np);
  for (int k = 0; k < np; ++k) motions[k] = pieces[k].motion;
  multifit_pieces(u, labels, np, exclude, motions);
  for (int k = 0; k < np; ++k) pieces[k].motion = motions[k];
}

// union-find merge of adjacent pieces across non-jump edges whose motions
// agree on the shared edge within tol
int merge_pieces(const DisplacementField& u, const EdgeCuts& jcuts, double tol, std::vector<int>& labels,
                 std::vector<WorkPiece>& pieces) {
  const GridSpec& g = u.grid;
  int np = int(pieces.size());
  std::vector<int> parent(np);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  std::map<std::pair<int, int>, double> gap;
  auto consider = [&](int i1, int i2, const Vec2& mid) {
    int a = labels[i1], b = labels[i2];
    if (a == b) return;
    if (a > b) std::swap(a, b);
    double d = (pieces[a].motion.eval(mid) - pieces[b].motion.eval(mid)).norm();
    auto key = std::make_pair(a, b);
    auto it2 = gap.find(key);
    if (it2 == gap.end())
      gap.emplace(key, d);
    else
      it2->second = std::max(it2->second, d);
  };
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (ix + 1 < g.n && !jcuts.hcut_at(ix, iy))
        consider(g.idx(ix, iy), g.idx(ix + 1, iy), (g.cell_center(ix, iy) + g.cell_center(ix + 1, iy)) * 0.5);
      if (iy + 1 < g.n && !jcuts.vcut_at(ix, iy))
        consider(g.idx(ix, iy), g.idx(ix, iy + 1), (g.cell_center(ix, iy) + g.cell_center(ix, iy + 1)) * 0.5);
    }
  int merged = 0;
  for (const auto& [key, d] : gap)
    if (d <= tol) {
      int a = find(key.first), b = find(key.second);
      if (a != b) {
        parent[std::max(a, b)] = std::min(a, b);
        ++merged;
      }
    }
  if (merged > 0) {
    std::map<int, int> remap2;
    std::vector<WorkPiece> mp;
    for (size_t i = 0; i < labels.size(); ++i) {
      int r = find(labels[i]);
      auto it2 = remap2.find(r);
      if (it2 == remap2.end()) {
        it2 = remap2.emplace(r, int(mp.size())).first;
        mp.push_back(pieces[r]);
      }
      labels[i] = it2->second;
    }
    pieces = std::move(mp);
  }
  return merged;
}

int finalize_pieces(const DisplacementField& u, std::vector<int>& labels, std::vector<WorkPiece>& pieces,
                    const CellSet* exclude, double tol) {
  EdgeCuts jcuts(u.grid);
  jcuts.add_segments(u.jumps);
  split_labels_cut(u.grid, jcuts, labels, pieces);
  refit_pieces(u, exclude, labels, pieces);
  int merged = merge_pieces(u, jcuts, tol, labels, pieces);
  if (merged > 0) refit_pieces(u, exclude, labels, pieces);
  return merged;
}

void assemble_output(const DisplacementField& u, const PipelineConfig& cfg, const std::vector<int>& labels,
                     const std::vector<WorkPiece>& pieces, PiecewiseDecomposition& out) {
  const GridSpec& g = u.grid;
  out.labels = labels;
  out.pieces.assign(pieces.size(), {});
  for (size_t k = 0; k < pieces.size(); ++k) {
    out.pieces[k].motion = pieces[k].motion;
    out.pieces[k].is_z = pieces[k].is_z;
    out.pieces[k].is_rest = pieces[k].is_rest;
    out.pieces[k].absorbed = pieces[k].absorbed;
  }
  out.v.assign(u.u.size(), Vec2{});
  out.v_linf = 0.0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int i = g.idx(ix, iy);
      out.pieces[out.labels[i]].cells++;
      out.v[i] = u.u[i] - out.pieces[out.labels[i]].motion.eval(g.cell_center(ix, iy));
      out.v_linf = std::max(out.v_linf, out.v[i].norm());
    }
  double h2 = g.h() * g.h();
  out.main_piece_count = 0;
  for (auto& pc : out.pieces) {
    pc.area = pc.cells * h2;
    if (pc.area >= 4.0 * h2) out.main_piece_count++;
  }
  out.boundary_length = label_boundary_length(out.labels, g);
  out.boundary_ratio = out.boundary_length / (out.jump_length + 8.0 * g.mu);
  MaskedGradient mg = label_aware_gradient(out.v, g, u.jumps, out.labels);
  std::vector<double> mags(mg.grad.size(), 0.0);
  CellSet valid(g);
  for (size_t i = 0; i < mg.grad.size(); ++i)
    if (mg.valid[i]) {
      valid.mask[i] = 1;
      mags[i] = mg.grad[i].frobenius();
    }
  out.grad_v_lp = lp_norm_scalar(mags, g, cfg.p, &valid).value;
  out.grad_v_lp_prime = lp_norm_scalar(mags, g, cfg.p_prime(), &valid).value;
  out.korn_ratio = out.e_u_l2 > 0 ? out.grad_v_lp / out.e_u_l2 : 0.0;
}

}  // namespace

PiecewiseDecomposition iterate(const DisplacementField& u, const PipelineConfig& cfg) {
  const GridSpec& g = u.grid;
  double mu = g.mu;
  double h = g.h();

  PiecewiseDecomposition out;
  out.grid = g;
  out.jump_length = u.jumps.total_length();

  StrainField su = strain(u);
  out.e_u_l2 = lp_norm_grad(su, 2.0, nullptr, true).value;
  double max_grad = max_discrete_gradient(su);
  double u_scale = 0.0;
  for (const auto& vv : u.u) u_scale = std::max(u_scale, vv.norm());

  double eps = std::min(cfg.epsilon_rel * 4.0 * mu * mu, std::max(epsilon_bound(u, su, cfg.p), 16.0 * h * h));
  out.epsilon = eps;

  std::vector<int> labels(size_t(g.n) * g.n, 0);
  std::vector<WorkPiece> pieces;
  std::vector<WorkSquare> covering;
  CellSet E(g), R(g), uncovered(g);
  double S_len = 0.0;
  bool truncated = false;

  // iteration 0: the whole domain
  {
    Square root;
    root.center = {0, 0};
    root.halfside = mu;
    root.gen = 0;
    root.ix = root.iy = 0;
    covering.push_back({root, false, 0.0});
    pieces.push_back(WorkPiece{});
  }

  auto map_cell = [&](const SubField& sf, int lx, int ly) { return g.idx(sf.x0 + lx, sf.y0 + ly); };

  int it = 0;
  int stall = 0;
  double prevE = std::numeric_limits<double>::infinity();
  for (; it < cfg.max_iters; ++it) {
    bool any_active = false;
    for (const auto& ws : covering)
      if (!ws.final_) any_active = true;
    if (!any_active) break;

    std::vector<WorkSquare> next_cover;
    CellSet E_new(g);
    // remember which cells sat in Z pieces before this sweep (d') handling
    std::vector<int> z_parent(size_t(g.n) * g.n, -1);
    for (size_t i = 0; i < labels.size(); ++i)
      if (pieces[labels[i]].is_z) z_parent[i] = labels[i];

    for (const auto& ws : covering) {
      if (ws.final_) {
        next_cover.push_back(ws);
        continue;
      }
      SubField sf = extract_subfield(u, ws.sq);
      PipelineConfig sub_cfg = cfg;
      SquareDecomposition d = decompose_square(sf.field, sub_cfg);
      truncated = truncated || d.truncated;

      if (!d.type1) {
        // type 2: keep parent labels/motions; accumulate E; refine covering
        for (int ly = 0; ly < sf.m; ++ly)
          for (int lx = 0; lx < sf.m; ++lx)
            if (d.exceptional.test(lx, ly)) E_new.mask[map_cell(sf, lx, ly)] = 1;
        bool splittable = double(sf.m) * cfg.theta >= 2.0 - 1e-9;
        if (d.jump_free || !splittable) {
          WorkSquare fin = ws;
          fin.final_ = true;
          fin.residual = d.fit_residual;
          next_cover.push_back(fin);
        } else {
          for (const Square& ch : dyadic_children(ws.sq, cfg.theta)) next_cover.push_back({ch, false, d.fit_residual});
        }
        // cells in a Z parent piece remember the square's fitted motion via
        // the (e') grouping below; store residual on the square
      } else {
        // type 1: adopt the sub-partition
        int base = int(pieces.size());
        for (int k = 0; k < d.piece_count; ++k) {
          WorkPiece wp;
          RigidMotion m = d.piece_motions[k];
          // recenter: motion was fitted in local coordinates x_loc = x - c
          // a_loc(x_loc) = b + w x_loc^perp  =>  a_glob(x) = (b - w c^perp) + w x^perp
          wp.motion.omega = m.omega;
          wp.motion.b = {m.b.x + m.omega * sf.offset.y, m.b.y - m.omega * sf.offset.x};
          wp.is_z = k < int(d.piece_is_z.size()) && d.piece_is_z[k];
          pieces.push_back(wp);
        }
        for (int ly = 0; ly < sf.m; ++ly)
          for (int lx = 0; lx < sf.m; ++lx) {
            int gi = map_cell(sf, lx, ly);
            labels[gi] = base + d.labels[sf.field.grid.idx(lx, ly)];
            if (d.exceptional.test(lx, ly)) E_new.mask[gi] = 1;
            if (d.rest.test(lx, ly)) R.mask[gi] = 1;
            if (d.uncovered.test(lx, ly)) uncovered.mask[gi] = 1;
          }
        S_len += d.s_u_len;
        for (const Square& cq : d.covering) {
          Square abs_q = cq;
          abs_q.center = cq.center + sf.offset;
          abs_q.gen = -1;  // generation bookkeeping is relative; geometry suffices
          next_cover.push_back({abs_q, false, 0.0});
        }
      }
    }

    // (d')/(e'): inside surviving Z pieces, group still-type-2 cells into
    // connected components and give each the motion of its best square
    {
      std::map<int, CellSet> z_remaining;
      for (size_t i = 0; i < labels.size(); ++i)
        if (z_parent[i] >= 0 && labels[i] == z_parent[i]) {
          auto it2 = z_remaining.find(z_parent[i]);
          if (it2 == z_remaining.end()) it2 = z_remaining.emplace(z_parent[i], CellSet(g)).first;
          it2->second.mask[i] = 1;
        }
      for (auto& [zlab, cells] : z_remaining) {
        Components comps = label_components(cells, 4);
        if (comps.count <= 1) continue;
        for (int c = 1; c < comps.count; ++c) {
          WorkPiece wp = pieces[zlab];
          int id = int(pieces.size());
          pieces.push_back(wp);
          for (size_t i = 0; i < labels.size(); ++i)
            if (cells.mask[i] && comps.labels[i] == c) labels[i] = id;
        }
      }
    }

    E = E_new;
    covering = std::move(next_cover);
    out.e_area_history.push_back(E.area());
    double eA = E.area();
    if (eA <= eps) {
      ++it;
      break;
    }
    if (eA >= prevE - 1e-15) {
      if (++stall >= 3) {
        std::ostringstream led;
        led << "{\"e_area_history\":[";
        for (size_t k = 0; k < out.e_area_history.size(); ++k)
          led << (k ? "," : "") << out.e_area_history[k];
        led << "]}";
        throw pipeline_error("iterate: exceptional set stopped shrinking", led.str());
      }
    } else
      stall = 0;
    prevE = eA;
  }
  out.iterations = it;
  out.truncated_generations = truncated;

  // ---- Step VI: absorb, translations via poincare, merge, refit ---------------
  CellSet Eprime = E;
  Eprime |= R;
  Eprime |= uncovered;

  {
    std::vector<int> tot(pieces.size(), 0), exc(pieces.size(), 0);
    for (size_t i = 0; i < labels.size(); ++i) {
      tot[labels[i]]++;
      if (Eprime.mask[i]) exc[labels[i]]++;
    }
    for (size_t k = 0; k < pieces.size(); ++k)
      if (tot[k] > 0 && tot[k] - exc[k] < (tot[k] + 1) / 2) pieces[k].absorbed = true;
  }

  // v' = u - A_j x (skew parts only; translations come from the band split).
  // Absorbed pieces keep their fitted skew part too: any motion is admissible
  // inside the exceptional region and the fit only tightens the result.
  std::vector<Vec2> vprime(u.u.size());
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int i = g.idx(ix, iy);
      const WorkPiece& wp = pieces[labels[i]];
      Vec2 p = g.cell_center(ix, iy);
      double w = wp.motion.omega;
      vprime[i] = {u.u[i].x + w * p.y, u.u[i].y - w * p.x};
    }
  double rho = cfg.rho > 0 ? cfg.rho : (out.jump_length + 8.0 * mu);
  out.poincare_rho = rho;
  DisplacementField vfield(g);
  vfield.u = vprime;
  vfield.jumps = u.jumps;
  CoareaPartition bands = poincare_split(vfield, rho);
  out.poincare_M = bands.comps.empty() ? 0.0 : bands.comps[0].M;

  // final labels = (piece, band) pairs
  std::map<std::pair<int, int>, int> remap;
  std::vector<int> flabels(labels.size(), -1);
  std::vector<WorkPiece> fpieces;
  for (size_t i = 0; i < labels.size(); ++i) {
    std::pair<int, int> key{labels[i], bands.labels[i]};
    auto it2 = remap.find(key);
    if (it2 == remap.end()) {
      it2 = remap.emplace(key, int(fpieces.size())).first;
      WorkPiece wp = pieces[labels[i]];
      wp.motion.b = {bands.translations[bands.labels[i]][0], bands.translations[bands.labels[i]][1]};
      fpieces.push_back(wp);
    }
    flabels[i] = it2->second;
  }

  double tol = 10.0 * h * max_grad + 1e-9 * (u_scale + 1.0);
  out.merged_pieces = finalize_pieces(u, flabels, fpieces, &Eprime, tol);

  assemble_output(u, cfg, flabels, fpieces, out);
  out.exceptional_area = E.area();
  out.rest_area = R.area();
  out.window = compute_window(g, cfg.theta);
  out.exceptional_cells = Eprime;
  return out;
}

PiecewiseDecomposition decompose_pipeline(const DisplacementField& u, const PipelineConfig& cfg,
                                          RegularizeResult* reg_out) {
  RegularizeResult reg = regularize_jump_density(u, cfg.theta);
  if (reg_out) *reg_out = reg;
  if (!reg.violated) return iterate(u, cfg);

  // run per stage on the removed squares, coarsest last; the final stage is
  // the whole domain with the fully regularized field
  DisplacementField ulast = regularized_field(u, reg, int(reg.stages.size()) - 1);
  PiecewiseDecomposition base = iterate(ulast, cfg);
  const GridSpec& g = u.grid;

  std::vector<int> labels = base.labels;
  std::vector<WorkPiece> pieces;
  for (const auto& pc : base.pieces) {
    WorkPiece wp;
    wp.motion = pc.motion;
    wp.is_z = pc.is_z;
    wp.is_rest = pc.is_rest;
    wp.absorbed = pc.absorbed;
    pieces.push_back(wp);
  }

  // overlay: stage j squares get their own decomposition of the stage field
  for (int j = int(reg.stages.size()) - 1; j >= 1; --j) {
    DisplacementField uj = regularized_field(u, reg, j - 1);
    DyadicLayout layout(g.mu, cfg.theta);
    for (auto [ix, iy] : reg.stages[j].squares) {
      Square sq = layout.square(reg.stages[j].gen, ix, iy);
      SubField sf = extract_subfield(uj, sq);
      if (sf.m < 8) continue;  // below the sampling floor; keep base labels
      PiecewiseDecomposition sub = iterate(sf.field, cfg);
      int base_id = int(pieces.size());
      for (const auto& pc : sub.pieces) {
        WorkPiece np;
        np.motion.omega = pc.motion.omega;
        np.motion.b = {pc.motion.b.x + pc.motion.omega * sf.offset.y,
                       pc.motion.b.y - pc.motion.omega * sf.offset.x};
        np.is_z = pc.is_z;
        pieces.push_back(np);
      }
      for (int ly = 0; ly < sf.m; ++ly)
        for (int lx = 0; lx < sf.m; ++lx) {
          int gi = g.idx(sf.x0 + lx, sf.y0 + ly);
          // only overwrite cells not already claimed by an earlier (finer) stage
          bool earlier = false;
          for (int k = 0; k < j; ++k)
            if (reg.stages[k].cells.mask[gi]) earlier = true;
          if (!earlier) labels[gi] = base_id + sub.labels[sf.field.grid.idx(lx, ly)];
        }
    }
  }

  PiecewiseDecomposition out;
  out.grid = g;
  out.jump_length = u.jumps.total_length();
  StrainField su = strain(u);
  out.e_u_l2 = lp_norm_grad(su, 2.0, nullptr, true).value;
  out.iterations = base.iterations;
  out.truncated_generations = base.truncated_generations;
  out.e_area_history = base.e_area_history;
  out.epsilon = base.epsilon;
  out.poincare_rho = base.poincare_rho;
  out.poincare_M = base.poincare_M;
  out.exceptional_area = base.exceptional_area;
  out.rest_area = base.rest_area;

  double max_grad = max_discrete_gradient(su);
  double u_scale = 0.0;
  for (const auto& vv : u.u) u_scale = std::max(u_scale, vv.norm());
  double tol = 10.0 * g.h() * max_grad + 1e-9 * (u_scale + 1.0);
  out.merged_pieces = finalize_pieces(u, labels, pieces, nullptr, tol);
  assemble_output(u, cfg, labels, pieces, out);
  out.window = base.window;
  out.exceptional_cells = base.exceptional_cells;
  return out;
}

double decomposition_gradient_norm(const DisplacementField& u, const PiecewiseDecomposition& d, double p) {
  MaskedGradient mg = label_aware_gradient(d.v, u.grid, u.jumps, d.labels);
  std::vector<double> mags(mg.grad.size(), 0.0);
  CellSet valid(u.grid);
  for (size_t i = 0; i < mg.grad.size(); ++i)
    if (mg.valid[i]) {
      valid.mask[i] = 1;
      mags[i] = mg.grad[i].frobenius();
    }
  return lp_norm_scalar(mags, u.grid, p, &valid).value;
}

double edge_tv(const std::vector<double>& values, const GridSpec& grid, const EdgeCuts& cuts) {
  double h = grid.h();
  double tv = 0.0;
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix) {
      if (ix + 1 < grid.n && !cuts.hcut_at(ix, iy))
        tv += std::abs(values[grid.idx(ix + 1, iy)] - values[grid.idx(ix, iy)]) * h;
      if (iy + 1 < grid.n && !cuts.vcut_at(ix, iy))
        tv += std::abs(values[grid.idx(ix, iy + 1)] - values[grid.idx(ix, iy)]) * h;
    }
  return tv;
}

}  // namespace korn
