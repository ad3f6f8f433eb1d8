#include "korn/partition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

namespace korn {

namespace {

void supercover_into(const GridSpec& g, const Segment& s, CellSet& out) {
  double hh = g.h();
  Box bb{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y), std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y)};
  int ix0 = std::max(0, int(std::floor((bb.x0 + g.mu) / hh)) - 1);
  int ix1 = std::min(g.n - 1, int(std::floor((bb.x1 + g.mu) / hh)) + 1);
  int iy0 = std::max(0, int(std::floor((bb.y0 + g.mu) / hh)) - 1);
  int iy1 = std::min(g.n - 1, int(std::floor((bb.y1 + g.mu) / hh)) + 1);
  Vec2 a, b;
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix) {
      Box cb = g.cell_box(ix, iy);
      cb.x1 += 1e-12 * hh;
      cb.y1 += 1e-12 * hh;
      if (clip_segment(s, cb, a, b)) out.set(ix, iy);
    }
}

CellSet supercover(const GridSpec& g, const SegmentSet& segs) {
  CellSet out(g);
  for (const auto& s : segs.segments) supercover_into(g, s, out);
  return out;
}

// Segment components of a segment set (union-find over pairwise intersection).
std::vector<int> segment_components(const SegmentSet& segs, int* count_out) {
  int n = int(segs.segments.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (segments_intersect(segs.segments[i], segs.segments[j])) {
        int a = find(i), b = find(j);
        if (a != b) parent[a] = b;
      }
  std::map<int, int> remap;
  std::vector<int> comp(n);
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    auto it = remap.find(r);
    if (it == remap.end()) it = remap.emplace(r, int(remap.size())).first;
    comp[i] = it->second;
  }
  if (count_out) *count_out = int(remap.size());
  return comp;
}

}  // namespace

// Construction state kept alive for build_whitney.
struct AuxInternals {
  GenerationWindow win;  // with the effective final generation
  SegmentSet jstar;      // classification jump set actually used
  SegmentSet J;          // input jump set
  GridSpec fine;         // lattice at the final generation
  // all masks on the fine lattice, indexed gen - win.i_min
  std::vector<CellSet> chain;        // decreasing bad-set chain per generation
  std::vector<CellSet> iso_sat;      // saturated isolated components per generation
  std::vector<CellSet> bad_union;    // enlarged bad squares per generation
  std::vector<CellSet> inner_tiles;  // jump-free tiles at least one ring inside
  bool jstar_has_j0 = true;
};

namespace {

// fine-lattice block of a gen-g square (with Chebyshev padding in squares)
struct BlockMap {
  int fm = 0;  // fine per side
  int gm = 0;  // gen per side
  int f = 1;   // fm / gm
  std::array<int, 4> block(int ix, int iy, int pad) const {
    int x0 = std::max(0, (ix - pad) * f), x1 = std::min(fm, (ix + pad + 1) * f);
    int y0 = std::max(0, (iy - pad) * f), y1 = std::min(fm, (iy + pad + 1) * f);
    return {x0, y0, x1, y1};
  }
};

bool block_all(const CellSet& m, const std::array<int, 4>& b) {
  for (int y = b[1]; y < b[3]; ++y)
    for (int x = b[0]; x < b[2]; ++x)
      if (!m.test(x, y)) return false;
  return true;
}

bool block_any(const CellSet& m, const std::array<int, 4>& b) {
  for (int y = b[1]; y < b[3]; ++y)
    for (int x = b[0]; x < b[2]; ++x)
      if (m.test(x, y)) return true;
  return false;
}

void block_set(CellSet& m, const std::array<int, 4>& b) {
  for (int y = b[1]; y < b[3]; ++y)
    for (int x = b[0]; x < b[2]; ++x) m.set(x, y);
}

// closest pair of cells between two labeled regions by simultaneous BFS;
// returns squared-distance-ish chamfer and the两 cells. Deterministic.
struct PairHit {
  int ax = -1, ay = -1, bx = -1, by = -1;
  double dist = 0.0;
};

PairHit closest_pair(const GridSpec& g, const std::vector<int>& labels, int la, int lb_any, int* hit_label) {
  // multi-source BFS from component la, over all cells, until we touch any
  // other labeled component (lb_any < 0) or the specific one.
  std::vector<int> dist(size_t(g.n) * g.n, -1);
  std::vector<int> src(size_t(g.n) * g.n, -1);
  std::deque<int> q;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int i = g.idx(ix, iy);
      if (labels[i] == la) {
        dist[i] = 0;
        src[i] = i;
        q.push_back(i);
      }
    }
  while (!q.empty()) {
    int i = q.front();
    q.pop_front();
    int x = i % g.n, y = i / g.n;
    int lab = labels[i];
    if (lab >= 0 && lab != la && (lb_any < 0 || lab == lb_any)) {
      PairHit hit;
      hit.bx = x;
      hit.by = y;
      hit.ax = src[i] % g.n;
      hit.ay = src[i] / g.n;
      hit.dist = (g.cell_center(hit.ax, hit.ay) - g.cell_center(hit.bx, hit.by)).norm();
      if (hit_label) *hit_label = lab;
      return hit;
    }
    auto push = [&](int nx, int ny) {
      if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n) return;
      int ni = g.idx(nx, ny);
      if (dist[ni] < 0) {
        dist[ni] = dist[i] + 1;
        src[ni] = src[i];
        q.push_back(ni);
      }
    };
    push(x - 1, y);
    push(x + 1, y);
    push(x, y - 1);
    push(x, y + 1);
  }
  return PairHit{};
}

}  // namespace

AuxPartition build_aux_partition(const BadSquareIndex& index, const SegmentSet& J, const GridSpec& grid,
                                 const AuxOptions& opts) {
  const DyadicLayout& layout = index.layout;
  const GenerationWindow& win0 = index.window;
  if (!win0.valid) throw std::invalid_argument("build_aux_partition: invalid generation window");

  AuxPartition out;
  out.grid = grid;
  out.layout = layout;
  out.jump_length = J.total_length();
  auto internals = std::make_shared<AuxInternals>();
  internals->J = J;
  internals->jstar = index.jstar;
  internals->jstar_has_j0 = opts.include_j0;
  GenerationWindow win = win0;

  // ---- effective final generation I (distance conditions, capped) ----------
  int ncomp = 0;
  std::vector<int> segcomp = segment_components(index.jstar, &ncomp);
  double min_comp_dist = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < index.jstar.segments.size(); ++i)
    for (size_t j = i + 1; j < index.jstar.segments.size(); ++j)
      if (segcomp[i] != segcomp[j])
        min_comp_dist = std::min(min_comp_dist, segment_segment_distance(index.jstar.segments[i], index.jstar.segments[j]));
  double jstar_len = index.jstar.total_length();

  int I_eff = -1;
  for (int cand = win.i_min; cand <= win.I; ++cand) {
    double s = layout.halfside(cand);
    bool cond_dist = (ncomp <= 1) || (min_comp_dist >= s / layout.theta);
    bool cond_count = double(ncomp) <= jstar_len / s;
    bool cond_iso = true;
    for (int g2 = cand; g2 <= win.I; ++g2) {
      ComponentSet cs = components(index, g2);
      for (const auto& ci : cs.info)
        if (ci.isolated) {
          cond_iso = false;
          break;
        }
      if (!cond_iso) break;
    }
    // each component of B^cand contains exactly one J*-component
    bool cond_one = true;
    {
      ComponentSet cs = components(index, cand);
      std::vector<std::vector<uint8_t>> seen(cs.raw.count, std::vector<uint8_t>(ncomp, 0));
      for (size_t si = 0; si < index.jstar.segments.size(); ++si) {
        CellSet sc(cs.lattice);
        supercover_into(cs.lattice, index.jstar.segments[si], sc);
        for (int iy = 0; iy < cs.lattice.n && cond_one; ++iy)
          for (int ix = 0; ix < cs.lattice.n; ++ix)
            if (sc.test(ix, iy)) {
              int lab = cs.raw.labels[cs.lattice.idx(ix, iy)];
              if (lab >= 0) seen[lab][segcomp[si]] = 1;
            }
      }
      for (int k = 0; k < cs.raw.count && cond_one; ++k) {
        int cnt = 0;
        for (int c = 0; c < ncomp; ++c) cnt += seen[k][c];
        if (cnt > 1) cond_one = false;
      }
    }
    if (cond_dist && cond_count && cond_iso && cond_one) {
      I_eff = cand;
      break;
    }
  }
  if (I_eff < 0) {
    I_eff = win.I;
    win.truncated = true;
  }
  win.I = I_eff;
  internals->win = win;

  // ---- Step I: bad sets E^i on the fine lattice -----------------------------
  GridSpec fine(layout.per_side(win.I), layout.mu);
  internals->fine = fine;
  int gens = win.I - win.i_min + 1;
  std::vector<CellSet> Bfine(gens, CellSet(fine));
  for (int i = win.i_min; i <= win.I; ++i) {
    GridSpec lat = index.lattice(i);
    BlockMap bm{fine.n, lat.n, fine.n / lat.n};
    CellSet& B = Bfine[i - win.i_min];
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix)
        if (index.is_bad(i, ix, iy)) block_set(B, bm.block(ix, iy, 2));
  }
  internals->bad_union = Bfine;

  // suffix unions cum[i] = ∪_{l>=i} B^l
  std::vector<CellSet> cum(gens, CellSet(fine));
  for (int k = gens - 1; k >= 0; --k) {
    cum[k] = Bfine[k];
    if (k + 1 < gens) cum[k] |= cum[k + 1];
  }

  std::vector<CellSet> E(gens, CellSet(fine));
  std::vector<CellSet> U(gens, CellSet(fine));
  CellSet Eprev(fine, true);  // E^{i_min-1} covers the domain
  for (int i = win.i_min; i <= win.I; ++i) {
    int k = i - win.i_min;
    Components comps = label_components(cum[k], 8);
    double s = layout.halfside(i);
    double iso_thresh = std::pow(layout.theta, -double(i) * index.r) * s;
    // component meets B^i?  diameter filter; meets E^{i-1}?
    std::vector<uint8_t> meetsB(comps.count, 0), meetsE(comps.count, 0);
    for (int iy = 0; iy < fine.n; ++iy)
      for (int ix = 0; ix < fine.n; ++ix) {
        int lab = comps.labels[fine.idx(ix, iy)];
        if (lab < 0) continue;
        if (Bfine[k].test(ix, iy)) meetsB[lab] = 1;
        if (Eprev.test(ix, iy)) meetsE[lab] = 1;
      }
    std::vector<uint8_t> inE(comps.count, 0);
    for (int c = 0; c < comps.count; ++c) {
      double diam = std::hypot(comps.bboxes[c].width(), comps.bboxes[c].height());
      if (meetsB[c] && diam > iso_thresh && meetsE[c]) inE[c] = 1;
    }
    for (int iy = 0; iy < fine.n; ++iy)
      for (int ix = 0; ix < fine.n; ++ix) {
        int lab = comps.labels[fine.idx(ix, iy)];
        if (lab >= 0 && inE[lab]) E[k].set(ix, iy);
      }
    // isolated components of B^i itself (for U_i)
    Components bc = label_components(Bfine[k], 8);
    CellSet iso(fine);
    for (int iy = 0; iy < fine.n; ++iy)
      for (int ix = 0; ix < fine.n; ++ix) {
        int lab = bc.labels[fine.idx(ix, iy)];
        if (lab < 0) continue;
        double diam = std::hypot(bc.bboxes[lab].width(), bc.bboxes[lab].height());
        if (diam <= iso_thresh) iso.set(ix, iy);
      }
    U[k] = saturate(iso);
    Eprev = E[k];
  }
  internals->chain = E;
  internals->iso_sat = U;

  // ---- removed sets R^i and their Γ curves ---------------------------------
  struct RemovedComp {
    CellSet mask;  // fine lattice
    SegmentSet gamma;
  };
  std::vector<std::vector<RemovedComp>> removed(gens);  // R^i, i = i_min..I-1
  for (int i = win.i_min; i < win.I; ++i) {
    int k = i - win.i_min;
    CellSet rmask(fine);
    std::vector<SelectedSquares> sel;
    for (int l = i; l <= win.I; ++l) {
      GridSpec lat = index.lattice(l);
      BlockMap bm{fine.n, lat.n, fine.n / lat.n};
      SelectedSquares ss;
      ss.gen = l;
      for (int iy = 0; iy < lat.n; ++iy)
        for (int ix = 0; ix < lat.n; ++ix) {
          if (!index.is_bad(l, ix, iy)) continue;
          auto blk = bm.block(ix, iy, 2);
          if (block_all(E[k], blk) && !block_any(E[k + 1 <= gens - 1 ? k + 1 : k], blk) && i + 1 <= win.I) {
            ss.squares.emplace_back(ix, iy);
            block_set(rmask, blk);
          }
        }
      if (!ss.squares.empty()) sel.push_back(ss);
    }
    if (rmask.count() == 0) continue;
    Components rc = label_components(rmask, 8);
    for (int c = 0; c < rc.count; ++c) {
      RemovedComp comp;
      comp.mask = CellSet(fine);
      for (int iy = 0; iy < fine.n; ++iy)
        for (int ix = 0; ix < fine.n; ++ix)
          if (rc.labels[fine.idx(ix, iy)] == c) comp.mask.set(ix, iy);
      // Γ for the squares of this component
      std::vector<SelectedSquares> sel_c;
      for (const auto& ss : sel) {
        GridSpec lat = index.lattice(ss.gen);
        BlockMap bm{fine.n, lat.n, fine.n / lat.n};
        SelectedSquares keep;
        keep.gen = ss.gen;
        for (auto [ix, iy] : ss.squares) {
          auto blk = bm.block(ix, iy, 2);
          bool inc = false;
          for (int y = blk[1]; y < blk[3] && !inc; ++y)
            for (int x = blk[0]; x < blk[2]; ++x)
              if (comp.mask.test(x, y)) {
                inc = true;
                break;
              }
          if (inc) keep.squares.emplace_back(ix, iy);
        }
        if (!keep.squares.empty()) sel_c.push_back(keep);
      }
      if (!sel_c.empty()) comp.gamma = union_boundary_bound(layout, sel_c, index.jstar).gamma;
      removed[k].push_back(std::move(comp));
    }
  }

  // ---- Step II: connectors per generation ----------------------------------
  SegmentSet connectors;
  std::vector<SegmentSet> families;  // the connected sets S in the family
  double cbar = 10.0 * std::sqrt(2.0);
  for (int i = win.i_min; i <= win.I; ++i) {
    int k = i - win.i_min;
    // raster of E^i plus all family segments
    CellSet combined = E[k];
    for (const auto& fam : families) combined |= supercover(fine, fam);
    Components comps = label_components(combined, 8);
    if (comps.count <= 1) continue;
    double link_budget = 4.0 * cbar * layout.halfside(i - 1);
    int guard = comps.count + 8;
    while (comps.count > 1 && guard-- > 0) {
      int hit_label = -1;
      PairHit hit = closest_pair(fine, comps.labels, 0, -1, &hit_label);
      if (hit.ax < 0) break;
      Vec2 pa = fine.cell_center(hit.ax, hit.ay);
      Vec2 pb = fine.cell_center(hit.bx, hit.by);
      SegmentSet fam;
      if (hit.dist <= link_budget || k == 0 || removed[k - 1].empty()) {
        fam.add(Segment{pa, pb});
      } else {
        // route through the removed component closest to the pair
        const std::vector<RemovedComp>& rlist = removed[k - 1];
        int best = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < int(rlist.size()); ++c) {
          // distance from pa's component by bbox-center heuristic then exact BFS is
          // overkill; use min center distance of the removed mask cells
          double d = std::numeric_limits<double>::infinity();
          for (int iy = 0; iy < fine.n; ++iy)
            for (int ix = 0; ix < fine.n; ++ix)
              if (rlist[c].mask.test(ix, iy)) d = std::min(d, (fine.cell_center(ix, iy) - pa).norm());
          if (d < bestd) {
            bestd = d;
            best = c;
          }
        }
        // two legs: pa -> removed comp, removed comp -> pb
        Vec2 qa = pa, qb = pb;
        double da = std::numeric_limits<double>::infinity(), db = std::numeric_limits<double>::infinity();
        for (int iy = 0; iy < fine.n; ++iy)
          for (int ix = 0; ix < fine.n; ++ix)
            if (rlist[best].mask.test(ix, iy)) {
              Vec2 c = fine.cell_center(ix, iy);
              if ((c - pa).norm() < da) {
                da = (c - pa).norm();
                qa = c;
              }
              if ((c - pb).norm() < db) {
                db = (c - pb).norm();
                qb = c;
              }
            }
        if ((qa - pa).norm() > 1e-12) fam.add(Segment{pa, qa});
        if ((qb - pb).norm() > 1e-12) fam.add(Segment{qb, pb});
        fam.add(rlist[best].gamma);
        if (fam.empty()) fam.add(Segment{pa, pb});
      }
      for (const auto& s : fam.segments) connectors.add(s);
      families.push_back(fam);
      combined |= supercover(fine, fam);
      comps = label_components(combined, 8);
    }
  }

  // ---- Step III: final segment family S ------------------------------------
  // jump components contained in E^I components
  SegmentSet S;
  const CellSet& EI = E[gens - 1];
  std::vector<uint8_t> comp_in_EI(ncomp, 0);
  for (size_t si = 0; si < index.jstar.segments.size(); ++si) {
    CellSet sc(fine);
    supercover_into(fine, index.jstar.segments[si], sc);
    for (int iy = 0; iy < fine.n; ++iy)
      for (int ix = 0; ix < fine.n; ++ix)
        if (sc.test(ix, iy) && EI.test(ix, iy)) comp_in_EI[segcomp[si]] = 1;
  }
  for (size_t si = 0; si < index.jstar.segments.size(); ++si)
    if (comp_in_EI[segcomp[si]]) S.add(index.jstar.segments[si]);
  for (const auto& fam : families) S.add(fam);

  // connect the members of S into a single component
  if (!S.empty()) {
    CellSet sc = supercover(fine, S);
    Components comps = label_components(sc, 8);
    int guard = comps.count + 8;
    while (comps.count > 1 && guard-- > 0) {
      PairHit hit = closest_pair(fine, comps.labels, 0, -1, nullptr);
      if (hit.ax < 0) break;
      Segment link{fine.cell_center(hit.ax, hit.ay), fine.cell_center(hit.bx, hit.by)};
      S.add(link);
      connectors.add(link);
      supercover_into(fine, link, sc);
      comps = label_components(sc, 8);
    }
  }

  out.boundary_segments = S;
  out.connector_length = connectors.total_length();
  Box dom{-layout.mu, -layout.mu, layout.mu, layout.mu};
  double blen = 0.0;
  Vec2 ca, cb2;
  for (const auto& s : S.segments)
    if (clip_segment(s, dom, ca, cb2)) blen += (cb2 - ca).norm();
  out.boundary_length = blen;
  out.boundary_ratio = out.jump_length > 0 ? blen / out.jump_length : 0.0;

  // ---- pieces ---------------------------------------------------------------
  out.cuts = EdgeCuts(grid);
  out.cuts.add_segments(S);
  CellSet full(grid, true);
  Components pieces = label_components_cut(full, out.cuts);
  out.labels = pieces.labels;
  out.piece_count = pieces.count;
  double h2 = grid.h() * grid.h();
  for (int k = 0; k < pieces.count; ++k) {
    PieceInfo pi;
    pi.id = k;
    pi.cells = pieces.sizes[k];
    pi.area = pieces.sizes[k] * h2;
    pi.bbox = pieces.bboxes[k];
    CellSet pm(grid);
    for (int iy = 0; iy < grid.n; ++iy)
      for (int ix = 0; ix < grid.n; ++ix)
        if (pieces.labels[grid.idx(ix, iy)] == k) pm.set(ix, iy);
    CellSet sat = saturate(pm);
    pi.simply_connected_strict = (sat.count() == pm.count());
    pi.simply_connected = pi.simply_connected_strict || !S.empty();
    out.pieces.push_back(pi);
  }
  // T^i_- chains for the covering
  internals->inner_tiles.assign(gens, CellSet(fine));
  for (int i = win.i_min; i <= win.I; ++i) {
    int k = i - win.i_min;
    GridSpec lat = index.lattice(i);
    BlockMap bm{fine.n, lat.n, fine.n / lat.n};
    CellSet Ti(lat);
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix)
        if (!block_any(E[k], bm.block(ix, iy, 0))) Ti.set(ix, iy);
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        if (!Ti.test(ix, iy)) continue;
        bool inner = true;
        for (int dy = -1; dy <= 1 && inner; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = ix + dx, ny = iy + dy;
            if (nx < 0 || nx >= lat.n || ny < 0 || ny >= lat.n || !Ti.test(nx, ny)) {
              inner = false;
              break;
            }
          }
        if (inner) block_set(internals->inner_tiles[k], bm.block(ix, iy, 0));
      }
  }
  out.internals = internals;
  return out;
}

// ---- Whitney covering --------------------------------------------------------

WhitneyCovering build_whitney(const AuxPartition& aux, const BadSquareIndex& index) {
  if (!aux.internals) throw std::invalid_argument("build_whitney: aux partition lacks construction state");
  const AuxInternals& in = *aux.internals;
  const DyadicLayout& layout = aux.layout;
  const GenerationWindow& win = in.win;
  const GridSpec& grid = aux.grid;
  const GridSpec& fine = in.fine;

  WhitneyCovering cov;
  cov.grid = grid;
  cov.layout = layout;
  cov.window = win;

  // base squares per generation: C^i = squares in T^i_- \ T^{i-1}_-
  std::vector<CellSet> member;  // per gen membership mask (lattice of that gen)
  for (int i = win.i_min; i <= win.I; ++i) {
    int k = i - win.i_min;
    GridSpec lat = index.lattice(i);
    BlockMap bm{fine.n, lat.n, fine.n / lat.n};
    CellSet mem(lat);
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        auto blk = bm.block(ix, iy, 0);
        if (!block_all(in.inner_tiles[k], blk)) continue;
        if (k > 0 && block_all(in.inner_tiles[k - 1], blk)) continue;
        if (k == 0 || !block_any(in.inner_tiles[k - 1], blk)) mem.set(ix, iy);
        else if (!block_all(in.inner_tiles[k - 1], blk))
          mem.set(ix, iy);  // partial overlap cannot happen on aligned lattices
      }
    member.push_back(mem);
  }

  // fill generations I+1 .. I_fill: Q'' ⊂ Q_mu, Q' ∩ J = ∅, disjoint from
  // everything placed so far
  GridSpec flat(layout.per_side(win.I_fill), layout.mu);
  CellSet covered_fill(flat);
  auto mark_fill = [&](int gen, int ix, int iy) {
    int f = flat.n / layout.per_side(gen);
    for (int y = iy * f; y < (iy + 1) * f; ++y)
      for (int x = ix * f; x < (ix + 1) * f; ++x) covered_fill.set(x, y);
  };
  for (int i = win.i_min; i <= win.I; ++i) {
    GridSpec lat = index.lattice(i);
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix)
        if (member[i - win.i_min].test(ix, iy)) mark_fill(i, ix, iy);
  }
  std::vector<CellSet> fill_member;
  for (int gen = win.I + 1; gen <= win.I_fill; ++gen) {
    GridSpec lat(layout.per_side(gen), layout.mu);
    SegmentIndex sidx(lat, in.J);
    CellSet mem(lat);
    int f = flat.n / lat.n;
    std::vector<int> cand;
    Vec2 a, b;
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        Square q = layout.square(gen, ix, iy);
        Box q2 = enlarged_q2(q).box();
        Box dom{-layout.mu, -layout.mu, layout.mu, layout.mu};
        if (!dom.contains_box(q2)) continue;
        // disjoint from already covered
        bool clash = false;
        for (int y = iy * f; y < (iy + 1) * f && !clash; ++y)
          for (int x = ix * f; x < (ix + 1) * f; ++x)
            if (covered_fill.test(x, y)) {
              clash = true;
              break;
            }
        if (clash) continue;
        Box q1 = enlarged_q1(q).box();
        sidx.query(q1, cand);
        bool hitsJ = false;
        for (int si : cand)
          if (clip_segment(in.J.segments[si], q1, a, b)) {
            hitsJ = true;
            break;
          }
        if (hitsJ) continue;
        mem.set(ix, iy);
      }
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix)
        if (mem.test(ix, iy)) mark_fill(gen, ix, iy);
    fill_member.push_back(mem);
  }

  // ---- Z components + covering redefinition inside them ---------------------
  double theta = layout.theta;
  std::vector<std::pair<int, CellSet>> ycomps;  // (gen, fine-lattice mask of Y component)
  for (int i = win.i_min; i <= win.I; ++i) {
    int k = i - win.i_min;
    GridSpec lat = index.lattice(i);
    BlockMap bm{fine.n, lat.n, fine.n / lat.n};
    double s = layout.halfside(i);
    CellSet ymask(lat);
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        if (!member[k].test(ix, iy)) continue;
        if (!block_all(in.iso_sat[k], bm.block(ix, iy, 1))) continue;  // Q'' ⊂ U_i
        Square q = layout.square(i, ix, iy);
        if (segment_measure_in(enlarged_q1(q), in.J) > theta * theta * s) {
          // Y^i member seeds the 3x3 enlarged block
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              int nx = ix + dx, ny = iy + dy;
              if (nx >= 0 && nx < lat.n && ny >= 0 && ny < lat.n) ymask.set(nx, ny);
            }
        }
      }
    if (ymask.count() == 0) continue;
    CellSet sat = saturate(ymask);
    Components yc = label_components(sat, 8);
    for (int c = 0; c < yc.count; ++c) {
      CellSet compfine(fine);
      for (int iy = 0; iy < lat.n; ++iy)
        for (int ix = 0; ix < lat.n; ++ix)
          if (yc.labels[lat.idx(ix, iy)] == c) block_set(compfine, bm.block(ix, iy, 0));
      ycomps.emplace_back(i, std::move(compfine));
    }
  }
  // X components: Y comps not contained in another Y comp of a different gen
  std::vector<int> xsel;
  for (int a = 0; a < int(ycomps.size()); ++a) {
    bool contained = false;
    for (int b = 0; b < int(ycomps.size()) && !contained; ++b) {
      if (a == b || ycomps[a].first == ycomps[b].first) continue;
      bool inside = true;
      for (int iy = 0; iy < fine.n && inside; ++iy)
        for (int ix = 0; ix < fine.n; ++ix)
          if (ycomps[a].second.test(ix, iy) && !ycomps[b].second.test(ix, iy)) {
            inside = false;
            break;
          }
      if (inside) contained = true;
    }
    if (!contained) xsel.push_back(a);
  }

  // redefine: inside each X component the covering is the gen-i tiling
  for (int a : xsel) {
    int gen = ycomps[a].first;
    const CellSet& xf = ycomps[a].second;
    // remove members of other generations intersecting X
    for (int i = win.i_min; i <= win.I; ++i) {
      if (i == gen) continue;
      int kk = i - win.i_min;
      GridSpec lat = index.lattice(i);
      BlockMap bm{fine.n, lat.n, fine.n / lat.n};
      for (int iy = 0; iy < lat.n; ++iy)
        for (int ix = 0; ix < lat.n; ++ix)
          if (member[kk].test(ix, iy) && block_any(xf, bm.block(ix, iy, 0))) member[kk].set(ix, iy, false);
    }
    GridSpec lat = index.lattice(gen);
    BlockMap bm{fine.n, lat.n, fine.n / lat.n};
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix)
        if (block_any(xf, bm.block(ix, iy, 0))) member[gen - win.i_min].set(ix, iy);
  }

  // ---- assemble the square list + owners ------------------------------------
  std::vector<std::pair<int, CellSet>> all_members;  // (gen, membership lattice mask)
  for (int i = win.i_min; i <= win.I; ++i) all_members.emplace_back(i, member[i - win.i_min]);
  for (int gen = win.I + 1; gen <= win.I_fill; ++gen) all_members.emplace_back(gen, fill_member[gen - win.I - 1]);

  cov.cell_owner.assign(size_t(grid.n) * grid.n, -1);
  for (auto& [gen, mem] : all_members) {
    GridSpec lat(layout.per_side(gen), layout.mu);
    int f = grid.n / lat.n;
    for (int iy = 0; iy < lat.n; ++iy)
      for (int ix = 0; ix < lat.n; ++ix) {
        if (!mem.test(ix, iy)) continue;
        int id = int(cov.squares.size());
        cov.squares.push_back(layout.square(gen, ix, iy));
        for (int y = iy * f; y < (iy + 1) * f; ++y)
          for (int x = ix * f; x < (ix + 1) * f; ++x) cov.cell_owner[grid.idx(x, y)] = id;
      }
  }
  cov.uncovered = CellSet(grid);
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix)
      if (cov.cell_owner[grid.idx(ix, iy)] < 0) cov.uncovered.set(ix, iy);
  cov.checks.uncovered_area = cov.uncovered.area();

  // Z components on the field grid + boundary squares
  cov.zmask = CellSet(grid);
  for (int a : xsel) {
    int gen = ycomps[a].first;
    ZComponent z;
    z.gen = gen;
    z.id = int(cov.zcomps.size());
    z.cells = CellSet(grid);
    int ff = grid.n / fine.n;
    Box bb{1e300, 1e300, -1e300, -1e300};
    for (int iy = 0; iy < fine.n; ++iy)
      for (int ix = 0; ix < fine.n; ++ix) {
        if (!ycomps[a].second.test(ix, iy)) continue;
        Box cb = fine.cell_box(ix, iy);
        bb.x0 = std::min(bb.x0, cb.x0);
        bb.y0 = std::min(bb.y0, cb.y0);
        bb.x1 = std::max(bb.x1, cb.x1);
        bb.y1 = std::max(bb.y1, cb.y1);
        for (int y = iy * ff; y < (iy + 1) * ff; ++y)
          for (int x = ix * ff; x < (ix + 1) * ff; ++x) z.cells.set(x, y);
      }
    z.bbox = bb;
    z.diameter = std::hypot(bb.width(), bb.height());
    cov.zmask |= z.cells;
    // boundary squares: gen squares inside X with an edge on ∂X
    GridSpec lat = index.lattice(gen);
    BlockMap bm{fine.n, lat.n, fine.n / lat.n};
    for (int sqid = 0; sqid < int(cov.squares.size()); ++sqid) {
      const Square& q = cov.squares[sqid];
      if (q.gen != gen) continue;
      auto blk = bm.block(q.ix, q.iy, 0);
      if (!block_all(ycomps[a].second, blk)) continue;
      bool edge = false;
      for (int d = 0; d < 4 && !edge; ++d) {
        int nx = q.ix + (d == 0 ? -1 : d == 1 ? 1 : 0);
        int ny = q.iy + (d == 2 ? -1 : d == 3 ? 1 : 0);
        if (nx < 0 || nx >= lat.n || ny < 0 || ny >= lat.n)
          edge = true;
        else if (!block_all(ycomps[a].second, bm.block(nx, ny, 0)))
          edge = true;
      }
      if (edge) z.boundary_squares.push_back(sqid);
    }
    double s = layout.halfside(gen);
    if (z.diameter > std::pow(theta, -double(gen) * index.r) * s + 1e-9) cov.checks.z_structure_ok = false;
    cov.zcomps.push_back(std::move(z));
  }
  cov.checks.z_area = cov.zmask.area();

  // ---- exhaustive checks -----------------------------------------------------
  // overlap count <= 12 at every cell
  {
    std::vector<int> cnt(size_t(grid.n) * grid.n, 0);
    for (const auto& q : cov.squares) {
      CellSet qc = rasterize(grid, enlarged_q1(q));
      for (size_t i = 0; i < qc.mask.size(); ++i) cnt[i] += qc.mask[i];
    }
    for (int iy = 0; iy < grid.n; ++iy)
      for (int ix = 0; ix < grid.n; ++ix) {
        int c = cnt[grid.idx(ix, iy)];
        cov.checks.max_overlap = std::max(cov.checks.max_overlap, c);
        if (c > 12) cov.checks.overlap_violations++;
      }
  }
  // neighbor generation gap <= 1 where Q1' ∩ Q2' ≠ ∅
  {
    std::map<int, CellSet> memmask;
    for (auto& [gen, mem] : all_members) memmask.emplace(gen, mem);
    for (const auto& q : cov.squares) {
      for (auto& [gen2, mem2] : memmask) {
        if (std::abs(gen2 - q.gen) <= 1) continue;
        double reach = 1.5 * (q.halfside + layout.halfside(gen2));
        GridSpec lat2(layout.per_side(gen2), layout.mu);
        int r = int(std::ceil(reach / (2 * layout.halfside(gen2)))) + 1;
        int cx = int(std::floor((q.center.x + layout.mu) / (2 * layout.halfside(gen2))));
        int cy = int(std::floor((q.center.y + layout.mu) / (2 * layout.halfside(gen2))));
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= lat2.n || ny < 0 || ny >= lat2.n || !mem2.test(nx, ny)) continue;
            Square q2 = layout.square(gen2, nx, ny);
            Box b1 = enlarged_q1(q).box(), b2 = enlarged_q1(q2).box();
            if (b1.intersects(b2)) cov.checks.neighbor_violations++;
          }
      }
    }
    cov.checks.neighbor_violations /= 2;  // counted from both sides
  }
  // membership masks by generation, used by the neighbor and jump checks
  std::map<int, CellSet> memmask;
  for (auto& [gen, mem] : all_members) memmask.emplace(gen, mem);

  auto box_cells_in = [&](const Box& b, const CellSet& inside) {
    // every grid cell with center in b lies in `inside`?
    double hh = grid.h();
    int ix0 = std::max(0, int(std::floor((b.x0 + grid.mu) / hh)));
    int ix1 = std::min(grid.n - 1, int(std::ceil((b.x1 + grid.mu) / hh)));
    int iy0 = std::max(0, int(std::floor((b.y0 + grid.mu) / hh)));
    int iy1 = std::min(grid.n - 1, int(std::ceil((b.y1 + grid.mu) / hh)));
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        if (b.contains(grid.cell_center(ix, iy)) && !inside.test(ix, iy)) return false;
    return true;
  };
  auto has_gen_neighbor = [&](const Square& q, int gen2, double enlarge_factor) {
    auto it = memmask.find(gen2);
    if (it == memmask.end()) return false;
    double s2 = layout.halfside(gen2);
    double reach = enlarge_factor * (q.halfside + s2);
    GridSpec lat2(layout.per_side(gen2), layout.mu);
    int r = int(std::ceil(reach / (2 * s2))) + 1;
    int cx = int(std::floor((q.center.x + layout.mu) / (2 * s2)));
    int cy = int(std::floor((q.center.y + layout.mu) / (2 * s2)));
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || nx >= lat2.n || ny < 0 || ny >= lat2.n || !it->second.test(nx, ny)) continue;
        Square q2 = layout.square(gen2, nx, ny);
        if (enlarge(q, enlarge_factor).box().intersects(enlarge(q2, enlarge_factor).box())) return true;
      }
    return false;
  };

  // jump smallness off Z, plus the same bound near generation steps
  for (const auto& q : cov.squares) {
    if (q.gen > win.I) continue;
    double bound = theta * theta * layout.halfside(q.gen);
    bool q2_in_z = box_cells_in(enlarged_q2(q).box(), cov.zmask);
    if (!q2_in_z && segment_measure_in(enlarged_q1(q), in.J) > bound + 1e-12)
      cov.checks.jump_smallness_violations++;
    if (has_gen_neighbor(q, q.gen - 1, 3.0) || has_gen_neighbor(q, q.gen + 1, 3.0)) {
      if (segment_measure_in(enlarged_q1(q), in.J) > bound + 1e-12) cov.checks.neighbor_jump_violations++;
    }
  }
  // fill squares avoid J entirely (by construction)
  for (const auto& q : cov.squares)
    if (q.gen > win.I && segment_measure_in(enlarged_q1(q), in.J) > 0.0) cov.checks.fine_jump_violations++;

  // boundary squares of each X component: their Q' meets Z only inside X
  for (const auto& z : cov.zcomps)
    for (int sqid : z.boundary_squares) {
      CellSet q1 = rasterize(grid, enlarged_q1(cov.squares[sqid]));
      for (int iy = 0; iy < grid.n && cov.checks.z_structure_ok; ++iy)
        for (int ix = 0; ix < grid.n; ++ix)
          if (q1.test(ix, iy) && cov.zmask.test(ix, iy) && !z.cells.test(ix, iy)) {
            cov.checks.z_structure_ok = false;
            break;
          }
    }

  cov.checks.coverage_ok = true;
  if (cov.checks.neighbor_violations > 0 || cov.checks.overlap_violations > 0)
    throw geometry_error("whitney covering construction violated an exact invariant");
  return cov;
}

}  // namespace korn
