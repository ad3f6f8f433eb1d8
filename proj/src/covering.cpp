#include "korn/covering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace korn {

GenerationWindow compute_window(const GridSpec& grid, double theta) {
  GenerationWindow w;
  // finest generation whose squares still span >= 2x2 cells
  int ifill = 0;
  for (int i = 1; i < 40; ++i) {
    if (double(grid.n) * std::pow(theta, i) >= 2.0 - 1e-12)
      ifill = i;
    else
      break;
  }
  w.I_fill = ifill;
  // The enlarged bad squares around a J0 grid line blot out a tube about six
  // squares wide, so the J0 pitch must exceed that: theta^-(i_min - j0) >= 8.
  int gap = int(std::ceil(std::log(8.0) / std::log(1.0 / theta) - 1e-12));
  int I = ifill - 1;               // keep one fill generation below I
  if (I < 1 || I - gap < 0) {
    w.valid = false;
    w.truncated = true;
    return w;
  }
  w.I = I;
  w.j0 = std::clamp(std::min(7, I - gap - 1), 0, I - gap);  // j0 = 0: frame only
  w.i_min = w.j0 + gap;
  if (w.i_min < 1) w.i_min = 1;
  w.valid = true;
  w.truncated = (w.j0 < 7);
  return w;
}

SegmentSet auxiliary_jump(const SegmentSet& J, double mu, double theta, int j0_gen) {
  DyadicLayout layout(mu, theta);
  int m = layout.per_side(j0_gen);
  double s = layout.halfside(j0_gen);
  SegmentSet out = J;
  for (int k = 0; k <= m; ++k) {
    double c = -mu + 2.0 * s * k;
    out.add(Segment{{c, -mu}, {c, mu}});
    out.add(Segment{{-mu, c}, {mu, c}});
  }
  return out;
}

bool is_bad_square(const Square& sq, const SegmentSet& jstar, double theta) {
  double thresh = theta * theta * theta * sq.halfside;
  return segment_measure_in(enlarged_q1(sq), jstar) >= thresh;
}

BadSquareIndex classify_bad(const SegmentSet& jstar, const DyadicLayout& layout, const GenerationWindow& window,
                            double r) {
  if (!window.valid) throw std::invalid_argument("classify_bad: invalid generation window");
  BadSquareIndex idx;
  idx.layout = layout;
  idx.window = window;
  idx.jstar = jstar;
  idx.r = r;
  for (int gen = window.i_min; gen <= window.I_fill; ++gen) {
    GridSpec lat = GridSpec(layout.per_side(gen), layout.mu);
    CellSet bad(lat);
    SegmentIndex sidx(lat, idx.jstar);
    double thresh = std::pow(layout.theta, 3) * layout.halfside(gen);
    std::vector<int> cand;
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        Box qp = enlarged_q1(layout.square(gen, ix, iy)).box();
        sidx.query(qp, cand);
        double len = 0.0;
        Vec2 a, b;
        for (int si : cand) {
          if (clip_segment(idx.jstar.segments[si], qp, a, b)) len += (b - a).norm();
          if (len >= thresh) break;
        }
        if (len >= thresh) bad.set(ix, iy);
      }
    idx.bad.push_back(std::move(bad));
  }
  // bad[] is indexed from i_min; trim to [i_min, I_fill]
  return idx;
}

namespace {

// Union of 5x enlargements (Q''') of the marked squares, on the same lattice,
// clipped to the domain.
CellSet dilate_chebyshev(const CellSet& marked, int radius) {
  const GridSpec& g = marked.grid;
  CellSet out(g);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!marked.test(ix, iy)) continue;
      int x0 = std::max(0, ix - radius), x1 = std::min(g.n - 1, ix + radius);
      int y0 = std::max(0, iy - radius), y1 = std::min(g.n - 1, iy + radius);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.set(x, y);
    }
  return out;
}

double boundary_length_of_mask(const CellSet& m) {
  // exposed cell edges; domain frame counts as exposed only where the mask
  // touches it (boundary of the set within the closed domain square)
  const GridSpec& g = m.grid;
  double s = g.h();
  size_t edges = 0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!m.test(ix, iy)) continue;
      if (ix == 0 || !m.test(ix - 1, iy)) ++edges;
      if (ix == g.n - 1 || !m.test(ix + 1, iy)) ++edges;
      if (iy == 0 || !m.test(ix, iy - 1)) ++edges;
      if (iy == g.n - 1 || !m.test(ix, iy + 1)) ++edges;
    }
  return double(edges) * s;
}

}  // namespace

ComponentSet components(const BadSquareIndex& index, int gen) {
  if (gen < index.window.i_min || gen > index.window.I_fill)
    throw std::invalid_argument("components: generation outside classified range");
  ComponentSet out;
  out.lattice = index.lattice(gen);
  out.bmask = dilate_chebyshev(index.bad_mask(gen), 2);
  out.raw = label_components(out.bmask, 8);
  double s = index.layout.halfside(gen);
  double iso_thresh = std::pow(index.layout.theta, -double(gen) * index.r) * s;
  for (int k = 0; k < out.raw.count; ++k) {
    ComponentInfo ci;
    ci.bbox = out.raw.bboxes[k];
    ci.cells = out.raw.sizes[k];
    ci.diameter = std::hypot(ci.bbox.width(), ci.bbox.height());
    CellSet comp(out.lattice);
    for (int iy = 0; iy < out.lattice.n; ++iy)
      for (int ix = 0; ix < out.lattice.n; ++ix)
        if (out.raw.labels[out.lattice.idx(ix, iy)] == k) comp.set(ix, iy);
    ci.boundary_length = boundary_length_of_mask(comp);
    ci.isolated = ci.diameter <= iso_thresh;
    out.info.push_back(ci);
  }
  return out;
}

UnionBoundaryResult union_boundary_bound(const DyadicLayout& layout, const std::vector<SelectedSquares>& selected,
                                         const SegmentSet& jstar) {
  UnionBoundaryResult out;
  if (selected.empty()) return out;
  int finest = 0;
  for (const auto& s : selected) finest = std::max(finest, s.gen);
  GridSpec flat(layout.per_side(finest), layout.mu);

  // rasterize R = union of Q''' at the finest lattice
  CellSet rmask(flat);
  auto block_of = [&](int gen, int ix, int iy, int pad) {
    // cells of the finest lattice covered by the (2*pad+1)-block around (ix,iy)
    int f = flat.n / layout.per_side(gen);
    int x0 = std::max(0, (ix - pad) * f), x1 = std::min(flat.n, (ix + pad + 1) * f);
    int y0 = std::max(0, (iy - pad) * f), y1 = std::min(flat.n, (iy + pad + 1) * f);
    return std::array<int, 4>{x0, y0, x1, y1};
  };
  for (const auto& sel : selected)
    for (auto [ix, iy] : sel.squares) {
      auto [x0, y0, x1, y1] = block_of(sel.gen, ix, iy, 2);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) rmask.set(x, y);
    }
  out.boundary_length = boundary_length_of_mask(rmask);

  // H1(J* ∩ R): per segment, merge parameter intervals inside R cells
  double jl = 0.0;
  for (const auto& seg : jstar.segments) {
    std::vector<std::pair<double, double>> ivals;
    double hh = flat.h();
    Box bb{std::min(seg.a.x, seg.b.x), std::min(seg.a.y, seg.b.y), std::max(seg.a.x, seg.b.x),
           std::max(seg.a.y, seg.b.y)};
    int ix0 = std::max(0, int(std::floor((bb.x0 + flat.mu) / hh)) - 1);
    int ix1 = std::min(flat.n - 1, int(std::floor((bb.x1 + flat.mu) / hh)) + 1);
    int iy0 = std::max(0, int(std::floor((bb.y0 + flat.mu) / hh)) - 1);
    int iy1 = std::min(flat.n - 1, int(std::floor((bb.y1 + flat.mu) / hh)) + 1);
    Vec2 a, b;
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        if (!rmask.test(ix, iy)) continue;
        if (!clip_segment(seg, flat.cell_box(ix, iy), a, b)) continue;
        double L = seg.length();
        double t0 = (a - seg.a).norm() / L, t1 = (b - seg.a).norm() / L;
        if (t0 > t1) std::swap(t0, t1);
        ivals.emplace_back(t0, t1);
      }
    std::sort(ivals.begin(), ivals.end());
    double cur0 = 0, cur1 = -1;
    for (auto [t0, t1] : ivals) {
      if (t0 > cur1) {
        if (cur1 > cur0) jl += (cur1 - cur0) * seg.length();
        cur0 = t0;
        cur1 = t1;
      } else
        cur1 = std::max(cur1, t1);
    }
    if (cur1 > cur0) jl += (cur1 - cur0) * seg.length();
  }
  out.jump_in_union = jl;
  out.ratio = jl > 0 ? out.boundary_length / jl : 0.0;

  // greedy subfamily: generations ascending, Q''' not already covered by
  // earlier generations' union
  CellSet covered(flat);
  std::vector<SelectedSquares> bygen = selected;
  std::sort(bygen.begin(), bygen.end(), [](const auto& a, const auto& b) { return a.gen < b.gen; });
  for (const auto& sel : bygen) {
    std::vector<std::pair<int, int>> keep;
    for (auto [ix, iy] : sel.squares) {
      auto [x0, y0, x1, y1] = block_of(sel.gen, ix, iy, 2);
      bool inside = true;
      for (int y = y0; y < y1 && inside; ++y)
        for (int x = x0; x < x1; ++x)
          if (!covered.test(x, y)) {
            inside = false;
            break;
          }
      if (!inside) {
        keep.emplace_back(ix, iy);
        double s = layout.halfside(sel.gen);
        Square q = layout.square(sel.gen, ix, iy);
        Box q3 = enlarged_q3(q).box();
        out.gamma.add(Segment{{q3.x0, q3.y0}, {q3.x1, q3.y0}});
        out.gamma.add(Segment{{q3.x1, q3.y0}, {q3.x1, q3.y1}});
        out.gamma.add(Segment{{q3.x1, q3.y1}, {q3.x0, q3.y1}});
        out.gamma.add(Segment{{q3.x0, q3.y1}, {q3.x0, q3.y0}});
        (void)s;
      }
    }
    for (auto [ix, iy] : keep) {
      auto [x0, y0, x1, y1] = block_of(sel.gen, ix, iy, 2);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) covered.set(x, y);
    }
  }

  // connectivity of Γ_R within each component of R, via supercover labeling
  Components comps = label_components(rmask, 8);
  out.components = comps.count;
  double hh = flat.h();
  for (int k = 0; k < comps.count && out.gamma_connected_per_component; ++k) {
    CellSet gsup(flat);
    Vec2 a, b;
    for (const auto& seg : out.gamma.segments)
      for (int iy = 0; iy < flat.n; ++iy)
        for (int ix = 0; ix < flat.n; ++ix) {
          if (comps.labels[flat.idx(ix, iy)] != k || gsup.test(ix, iy)) continue;
          Box cb = flat.cell_box(ix, iy);
          cb.x1 += 1e-12 * hh;
          cb.y1 += 1e-12 * hh;
          if (clip_segment(seg, cb, a, b)) gsup.set(ix, iy);
        }
    if (gsup.count() == 0) continue;
    Components gc = label_components(gsup, 8);
    if (gc.count > 1) out.gamma_connected_per_component = false;
  }
  return out;
}

DensityCheck check_density_bound(const SegmentSet& J, const GridSpec& grid, double theta) {
  DensityCheck out;
  DyadicLayout layout(grid.mu, theta);
  double bound_factor = 1.0 / theta;
  // the density assumption quantifies over generations >= 1
  for (int gen = 1;; ++gen) {
    int m = layout.per_side(gen);
    if (double(grid.n) * std::pow(theta, gen) < 1.0 - 1e-12) break;  // below cell size
    double s = layout.halfside(gen);
    double dq = 2.0 * std::sqrt(2.0) * s;
    GridSpec lat(m, grid.mu);
    SegmentIndex sidx(lat, J);
    std::vector<int> cand;
    double shrink = 1e-9 * s;
    for (int iy = 0; iy < m; ++iy)
      for (int ix = 0; ix < m; ++ix) {
        Box qb = layout.square(gen, ix, iy).box();
        qb.x0 += shrink; qb.y0 += shrink; qb.x1 -= shrink; qb.y1 -= shrink;  // open square
        sidx.query(qb, cand);
        double len = 0.0;
        Vec2 a, b;
        for (int si : cand)
          if (clip_segment(J.segments[si], qb, a, b)) len += (b - a).norm();
        double ratio = len / (bound_factor * dq);
        out.worst_ratio = std::max(out.worst_ratio, ratio);
        if (ratio > 1.0 + 1e-12) ++out.violations;
      }
    if (m >= grid.n) break;
  }
  return out;
}

namespace {

// Boundary of a lattice mask as merged horizontal/vertical segment runs,
// optionally dropping the parts inside `minus` (a mask on the same lattice).
SegmentSet boundary_segments_of_mask(const CellSet& m, const std::vector<const CellSet*>& minus_fine,
                                     const GridSpec& fine) {
  SegmentSet out;
  const GridSpec& g = m.grid;
  double s = g.h();
  auto covered_by_minus = [&](Vec2 mid) {
    for (const CellSet* mk : minus_fine) {
      double hh = fine.h();
      int ix = std::clamp(int(std::floor((mid.x + fine.mu) / hh)), 0, fine.n - 1);
      int iy = std::clamp(int(std::floor((mid.y + fine.mu) / hh)), 0, fine.n - 1);
      if (mk->test(ix, iy)) return true;
    }
    return false;
  };
  // emit unit edges (no merging; lengths are what matter downstream)
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!m.test(ix, iy)) continue;
      Box cb = g.cell_box(ix, iy);
      auto emit = [&](Vec2 a, Vec2 b) {
        Vec2 mid = (a + b) * 0.5;
        double mu = g.mu;
        bool on_frame = std::abs(std::abs(mid.x) - mu) < 1e-12 * mu || std::abs(std::abs(mid.y) - mu) < 1e-12 * mu;
        if (!on_frame && !covered_by_minus(mid)) out.add(Segment{a, b});
      };
      if (ix == 0 || !m.test(ix - 1, iy)) emit({cb.x0, cb.y0}, {cb.x0, cb.y1});
      if (ix == g.n - 1 || !m.test(ix + 1, iy)) emit({cb.x1, cb.y0}, {cb.x1, cb.y1});
      if (iy == 0 || !m.test(ix, iy - 1)) emit({cb.x0, cb.y0}, {cb.x1, cb.y0});
      if (iy == g.n - 1 || !m.test(ix, iy + 1)) emit({cb.x0, cb.y1}, {cb.x1, cb.y1});
      (void)s;
    }
  return out;
}

// Sub-segments of J outside all removed masks (interval subtraction on the
// field grid footprint).
SegmentSet jump_outside(const SegmentSet& J, const std::vector<const CellSet*>& removed, const GridSpec& g) {
  SegmentSet out;
  double hh = g.h();
  for (const auto& seg : J.segments) {
    // collect covered parameter intervals
    std::vector<std::pair<double, double>> cov;
    Box bb{std::min(seg.a.x, seg.b.x), std::min(seg.a.y, seg.b.y), std::max(seg.a.x, seg.b.x),
           std::max(seg.a.y, seg.b.y)};
    int ix0 = std::max(0, int(std::floor((bb.x0 + g.mu) / hh)) - 1);
    int ix1 = std::min(g.n - 1, int(std::floor((bb.x1 + g.mu) / hh)) + 1);
    int iy0 = std::max(0, int(std::floor((bb.y0 + g.mu) / hh)) - 1);
    int iy1 = std::min(g.n - 1, int(std::floor((bb.y1 + g.mu) / hh)) + 1);
    Vec2 a, b;
    double L = seg.length();
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        bool rem = false;
        for (const CellSet* mk : removed)
          if (mk->test(ix, iy)) {
            rem = true;
            break;
          }
        if (!rem) continue;
        if (!clip_segment(seg, g.cell_box(ix, iy), a, b)) continue;
        double t0 = (a - seg.a).norm() / L, t1 = (b - seg.a).norm() / L;
        if (t0 > t1) std::swap(t0, t1);
        cov.emplace_back(t0, t1);
      }
    std::sort(cov.begin(), cov.end());
    double pos = 0.0;
    auto emit = [&](double t0, double t1) {
      if (t1 - t0 < 1e-12) return;
      Vec2 pa = seg.a + (seg.b - seg.a) * t0;
      Vec2 pb = seg.a + (seg.b - seg.a) * t1;
      out.add(Segment{pa, pb});
    };
    for (auto [t0, t1] : cov) {
      if (t0 > pos) emit(pos, t0);
      pos = std::max(pos, t1);
    }
    if (pos < 1.0) emit(pos, 1.0);
  }
  return out;
}

}  // namespace

namespace {

// Γ_upto = ∪_{k<=upto} (∂R_k \ later removals) ∪ (J \ all removals so far)
SegmentSet stage_gamma(const SegmentSet& J, const std::vector<RemovedStage>& stages, int upto, const GridSpec& g,
                       const DyadicLayout& layout) {
  SegmentSet gam;
  for (int k = 0; k <= upto; ++k) {
    GridSpec lat(layout.per_side(stages[k].gen), g.mu);
    CellSet lm(lat);
    for (auto [ix, iy] : stages[k].squares) lm.set(ix, iy);
    std::vector<const CellSet*> later;
    for (int l = k + 1; l <= upto; ++l) later.push_back(&stages[l].cells);
    gam.add(boundary_segments_of_mask(lm, later, g));
  }
  std::vector<const CellSet*> all;
  for (int k = 0; k <= upto; ++k) all.push_back(&stages[k].cells);
  gam.add(jump_outside(J, all, g));
  return gam;
}

}  // namespace

RegularizeResult regularize_jump_density(const DisplacementField& u, double theta) {
  RegularizeResult out;
  out.theta = theta;
  out.jump_length = u.jumps.total_length();
  const GridSpec& g = u.grid;
  DyadicLayout layout(g.mu, theta);

  DensityCheck pre = check_density_bound(u.jumps, g, theta);
  if (pre.violations == 0) {
    out.violated = false;
    out.gamma_final = u.jumps;
    out.post_density_worst = pre.worst_ratio;
    return out;
  }
  out.violated = true;

  // start generation: finest with squares >= 1 cell
  int I0 = 0;
  for (int i = 1; i < 40; ++i)
    if (double(g.n) * std::pow(theta, i) >= 1.0 - 1e-12) I0 = i;
  out.start_gen = I0;

  std::vector<CellSet> removed_fine;  // per stage, on the field grid
  std::vector<RemovedStage> stages;

  // R_0: start-generation squares meeting J_u
  {
    RemovedStage st;
    st.gen = I0;
    GridSpec lat(layout.per_side(I0), g.mu);
    CellSet lm(lat);
    SegmentIndex sidx(lat, u.jumps);
    std::vector<int> cand;
    Vec2 a, b;
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        Box qb = layout.square(I0, ix, iy).box();
        sidx.query(qb, cand);
        for (int si : cand)
          if (clip_segment(u.jumps.segments[si], qb, a, b)) {
            lm.set(ix, iy);
            st.squares.emplace_back(ix, iy);
            break;
          }
      }
    st.cells = CellSet(g);
    int f = g.n / lat.n;
    for (auto [ix, iy] : st.squares)
      for (int y = iy * f; y < (iy + 1) * f; ++y)
        for (int x = ix * f; x < (ix + 1) * f; ++x) st.cells.set(x, y);
    st.boundary_length = boundary_length_of_mask(lm) * 1.0;
    stages.push_back(std::move(st));
  }

  auto gamma_at = [&](int upto) { return stage_gamma(u.jumps, stages, upto, g, layout); };

  // sweep coarser generations; the paper's 16t threshold is capped by the
  // density target 2*sqrt(2)*t/theta it must certify (binding for theta > 1/8)
  double tfac = std::min(16.0, 2.0 * std::sqrt(2.0) / theta);
  for (int step = 0; I0 - 1 - step >= 1; ++step) {
    int gen = I0 - 1 - step;
    SegmentSet gam = gamma_at(int(stages.size()) - 1);
    double t = layout.halfside(gen);
    GridSpec lat(layout.per_side(gen), g.mu);
    SegmentIndex sidx(lat, gam);
    RemovedStage st;
    st.gen = gen;
    st.cells = CellSet(g);
    std::vector<int> cand;
    Vec2 a, b;
    double shrink = 1e-9 * t;
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        Box qb = layout.square(gen, ix, iy).box();
        qb.x0 += shrink; qb.y0 += shrink; qb.x1 -= shrink; qb.y1 -= shrink;
        sidx.query(qb, cand);
        double len = 0.0;
        for (int si : cand)
          if (clip_segment(gam.segments[si], qb, a, b)) len += (b - a).norm();
        if (len > tfac * t) st.squares.emplace_back(ix, iy);
      }
    if (!st.squares.empty()) {
      GridSpec flat(layout.per_side(gen), g.mu);
      CellSet lm(flat);
      for (auto [ix, iy] : st.squares) lm.set(ix, iy);
      int f = g.n / flat.n;
      for (auto [ix, iy] : st.squares)
        for (int y = iy * f; y < (iy + 1) * f; ++y)
          for (int x = ix * f; x < (ix + 1) * f; ++x) st.cells.set(x, y);
      st.boundary_length = boundary_length_of_mask(lm);
      stages.push_back(std::move(st));
    }
    if (gen == 0) break;
  }

  out.stages = stages;
  for (const auto& st : stages) out.boundary_ledger += st.boundary_length;
  out.ledger_ratio = out.jump_length > 0 ? out.boundary_ledger / out.jump_length : 0.0;
  out.gamma_final = gamma_at(int(stages.size()) - 1);
  DensityCheck post = check_density_bound(out.gamma_final, g, theta);
  out.post_density_worst = post.worst_ratio;
  out.post_density_violations = post.violations;
  return out;
}

DisplacementField regularized_field(const DisplacementField& u, const RegularizeResult& reg, int stage) {
  DisplacementField out = u;
  if (!reg.violated || reg.stages.empty()) return out;
  int upto = std::clamp(stage, 0, int(reg.stages.size()) - 1);
  for (int k = 0; k <= upto; ++k) {
    const CellSet& c = reg.stages[k].cells;
    for (int iy = 0; iy < u.grid.n; ++iy)
      for (int ix = 0; ix < u.grid.n; ++ix)
        if (c.test(ix, iy)) out.at(ix, iy) = {0.0, 0.0};
  }
  DyadicLayout layout(u.grid.mu, reg.theta);
  out.jumps = stage_gamma(u.jumps, reg.stages, upto, u.grid, layout);
  return out;
}

}  // namespace korn
