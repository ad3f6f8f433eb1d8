#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include "korn/partition.hpp"

namespace korn {

namespace {

// Moves respect the cut structure: orthogonal steps blocked by a cut edge,
// diagonal steps blocked when both L-paths around the corner are cut.
struct MoveGuard {
  const EdgeCuts* cuts = nullptr;
  bool ok(int x, int y, int dx, int dy) const {
    if (!cuts) return true;
    const GridSpec& g = cuts->grid;
    auto h_open = [&](int cx, int cy) { return !cuts->hcut_at(cx, cy); };  // (cx,cy)-(cx+1,cy)
    auto v_open = [&](int cx, int cy) { return !cuts->vcut_at(cx, cy); };  // (cx,cy)-(cx,cy+1)
    (void)g;
    if (dy == 0) return h_open(dx > 0 ? x : x - 1, y);
    if (dx == 0) return v_open(x, dy > 0 ? y : y - 1);
    bool horiz_first = h_open(dx > 0 ? x : x - 1, y) && v_open(x + dx, dy > 0 ? y : y - 1);
    bool vert_first = v_open(x, dy > 0 ? y : y - 1) && h_open(dx > 0 ? x : x - 1, y + dy);
    return horiz_first || vert_first;
  }
};

// Exact squared Euclidean distance transform (Felzenszwalb) to the nearest
// cell outside the region; used when no cuts are present.
std::vector<double> edt_sq(const CellSet& region) {
  const GridSpec& g = region.grid;
  const double INF = 1e18;
  std::vector<double> f(size_t(g.n) * g.n);
  for (size_t i = 0; i < f.size(); ++i) f[i] = region.mask[i] ? INF : 0.0;

  auto dt1d = [](std::vector<double>& row) {
    int n = int(row.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1), d(n);
    int k = 0;
    v[0] = 0;
    z[0] = -1e18;
    z[1] = 1e18;
    for (int q = 1; q < n; ++q) {
      double s;
      while (true) {
        s = ((row[q] + q * q) - (row[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        if (s <= z[k])
          --k;
        else
          break;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = 1e18;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      d[q] = double(q - v[k]) * (q - v[k]) + row[v[k]];
    }
    row = d;
  };

  std::vector<double> tmp(g.n);
  for (int iy = 0; iy < g.n; ++iy) {
    for (int ix = 0; ix < g.n; ++ix) tmp[ix] = f[g.idx(ix, iy)];
    dt1d(tmp);
    for (int ix = 0; ix < g.n; ++ix) f[g.idx(ix, iy)] = tmp[ix];
  }
  for (int ix = 0; ix < g.n; ++ix) {
    for (int iy = 0; iy < g.n; ++iy) tmp[iy] = f[g.idx(ix, iy)];
    dt1d(tmp);
    for (int iy = 0; iy < g.n; ++iy) f[g.idx(ix, iy)] = tmp[iy];
  }
  return f;
}

// distance to the effective boundary (complement plus cut edges) in cell
// units; chamfer BFS when cuts are present, exact EDT otherwise
std::vector<double> boundary_distance(const CellSet& region, const EdgeCuts* cuts) {
  const GridSpec& g = region.grid;
  if (!cuts) {
    std::vector<double> d = edt_sq(region);
    for (auto& v : d) v = std::max(0.5, std::sqrt(v) - 0.5);
    return d;
  }
  MoveGuard guard{cuts};
  const double INF = 1e18;
  std::vector<double> dist(size_t(g.n) * g.n, INF);
  using Node = std::pair<double, int>;
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> pq;
  auto blocked_or_out = [&](int x, int y, int dx, int dy) {
    int nx = x + dx, ny = y + dy;
    if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n) return true;
    if (!region.mask[g.idx(nx, ny)]) return true;
    if (dx == 0 || dy == 0) return !guard.ok(x, y, dx, dy);
    return false;
  };
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int i = g.idx(ix, iy);
      if (!region.mask[i]) continue;
      bool at_boundary = blocked_or_out(ix, iy, -1, 0) || blocked_or_out(ix, iy, 1, 0) ||
                         blocked_or_out(ix, iy, 0, -1) || blocked_or_out(ix, iy, 0, 1);
      if (at_boundary) {
        dist[i] = 0.5;
        pq.emplace(0.5, i);
      }
    }
  const double sqrt2 = std::sqrt(2.0);
  while (!pq.empty()) {
    auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[i]) continue;
    int x = i % g.n, y = i / g.n;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n) continue;
        int ni = g.idx(nx, ny);
        if (!region.mask[ni] || !guard.ok(x, y, dx, dy)) continue;
        double nd = d + ((dx != 0 && dy != 0) ? sqrt2 : 1.0);
        if (nd < dist[ni] - 1e-12) {
          dist[ni] = nd;
          pq.emplace(nd, ni);
        }
      }
  }
  for (auto& v : dist)
    if (v >= INF) v = 0.5;  // isolated pockets: treat as boundary scale
  return dist;
}

struct SlackSearch {
  std::vector<double> slack;
  std::vector<int> parent;
  int worst = -1;  // most binding cell (smallest slack)
  bool feasible = true;
};

// Max-slack Dijkstra from the center: slack(v) = max over paths center->v of
// min(slack(u) - |uv|, rho * d(v)). A cell is rho-reachable iff slack >= 0.
SlackSearch max_slack(const CellSet& region, const std::vector<double>& dist, double rho, int cx, int cy,
                      const EdgeCuts* cuts) {
  const GridSpec& g = region.grid;
  MoveGuard guard{cuts};
  SlackSearch out;
  out.slack.assign(size_t(g.n) * g.n, -std::numeric_limits<double>::infinity());
  out.parent.assign(size_t(g.n) * g.n, -1);
  using Node = std::pair<double, int>;
  std::priority_queue<Node> pq;
  int c = g.idx(cx, cy);
  out.slack[c] = rho * dist[c];
  pq.emplace(out.slack[c], c);
  const double sqrt2 = std::sqrt(2.0);
  size_t reached = 0;
  int first_negative = -1;
  while (!pq.empty()) {
    auto [s, i] = pq.top();
    pq.pop();
    if (s < out.slack[i]) continue;
    if (s < 0.0) {
      // all remaining cells are at most this slack: infeasible
      first_negative = i;
      break;
    }
    ++reached;
    int x = i % g.n, y = i / g.n;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n) continue;
        int ni = g.idx(nx, ny);
        if (!region.mask[ni] || !guard.ok(x, y, dx, dy)) continue;
        double w = (dx != 0 && dy != 0) ? sqrt2 : 1.0;
        double ns = std::min(s - w, rho * dist[ni]);
        if (ns > out.slack[ni] + 1e-15) {
          out.slack[ni] = ns;
          out.parent[ni] = i;
          pq.emplace(ns, ni);
        }
      }
  }
  if (first_negative >= 0) {
    out.feasible = false;
    out.worst = first_negative;
    return out;
  }
  double worst_val = std::numeric_limits<double>::infinity();
  for (int iy = region.wy0(); iy <= region.wy1(); ++iy)
    for (int ix = region.wx0(); ix <= region.wx1(); ++ix) {
      int i = g.idx(ix, iy);
      if (!region.mask[i]) continue;
      if (out.slack[i] < 0 || !std::isfinite(out.slack[i])) out.feasible = false;
      if (out.slack[i] < worst_val) {
        worst_val = out.slack[i];
        out.worst = i;
      }
    }
  (void)reached;
  return out;
}

std::pair<int, int> best_center(const CellSet& region, const std::vector<double>& dist) {
  const GridSpec& g = region.grid;
  int bx = -1, by = -1;
  double best = -1;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int i = g.idx(ix, iy);
      if (!region.mask[i]) continue;
      if (dist[i] > best) {
        best = dist[i];
        bx = ix;
        by = iy;
      }
    }
  return {bx, by};
}

}  // namespace

bool john_feasible(const CellSet& region, double rho, const EdgeCuts* cuts, Vec2* worst_cell) {
  if (region.count() == 0) throw std::invalid_argument("john_feasible: empty region");
  std::vector<double> dist = boundary_distance(region, cuts);
  auto [cx, cy] = best_center(region, dist);
  SlackSearch s = max_slack(region, dist, rho, cx, cy, cuts);
  if (worst_cell && s.worst >= 0)
    *worst_cell = region.grid.cell_center(s.worst % region.grid.n, s.worst / region.grid.n);
  return s.feasible;
}

JohnEstimate john_constant(const CellSet& region, const EdgeCuts* cuts) {
  const GridSpec& g = region.grid;
  size_t cells = region.count();
  if (cells == 0) throw std::invalid_argument("john_constant: empty region");
  {
    Components comps = label_components(region, 4);
    if (comps.count != 1) throw std::invalid_argument("john_constant: region must be connected");
  }
  std::vector<double> dist = boundary_distance(region, cuts);
  auto [cx, cy] = best_center(region, dist);

  JohnEstimate out;
  out.center = g.cell_center(cx, cy);
  out.area = region.area();
  // diameter via extreme cells in 16 directions (exact for convex regions)
  {
    std::vector<Vec2> extremes;
    for (int k = 0; k < 16; ++k) {
      double ang = M_PI * k / 16.0;
      Vec2 dir{std::cos(ang), std::sin(ang)};
      Vec2 lo_p, hi_p;
      double lo = 1e300, hi = -1e300;
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
          if (!region.test(ix, iy)) continue;
          Vec2 c = g.cell_center(ix, iy);
          double t = c.dot(dir);
          if (t < lo) {
            lo = t;
            lo_p = c;
          }
          if (t > hi) {
            hi = t;
            hi_p = c;
          }
        }
      extremes.push_back(lo_p);
      extremes.push_back(hi_p);
    }
    double d = 0.0;
    for (size_t a = 0; a < extremes.size(); ++a)
      for (size_t b = a + 1; b < extremes.size(); ++b) d = std::max(d, (extremes[a] - extremes[b]).norm());
    out.diameter = d + g.h();
  }

  double lo = 1.0, hi = 2.0;
  double max_hi = 8.0 * out.diameter / g.h() + 8.0;
  while (hi < max_hi && !max_slack(region, dist, hi, cx, cy, cuts).feasible) hi *= 2.0;
  for (int it = 0; it < 30 && (hi - lo) > 1e-3 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (max_slack(region, dist, mid, cx, cy, cuts).feasible)
      hi = mid;
    else
      lo = mid;
  }
  out.rho = hi;

  SlackSearch fin = max_slack(region, dist, hi, cx, cy, cuts);
  int w = fin.worst;
  while (w >= 0) {
    out.witness_worst_path.push_back(g.cell_center(w % g.n, w / g.n));
    w = fin.parent[w];
  }
  return out;
}

JohnRefineResult john_refine(const AuxPartition& aux, double rho_target, double eps_area) {
  if (rho_target < 2.0) throw std::invalid_argument("john_refine: rho_target must be >= 2");
  if (eps_area <= 0.0) throw std::invalid_argument("john_refine: eps_area must be positive");
  const GridSpec& g = aux.grid;
  const EdgeCuts* cuts = &aux.cuts;
  JohnRefineResult out;
  out.labels.assign(size_t(g.n) * g.n, -1);
  out.rest = CellSet(g);

  struct Work {
    CellSet cells;
  };
  std::deque<Work> queue;
  for (int k = 0; k < aux.piece_count; ++k) {
    CellSet pm(g);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix)
        if (aux.labels[g.idx(ix, iy)] == k) pm.set(ix, iy);
    if (pm.count() > 0) queue.push_back({std::move(pm)});
  }

  double h = g.h();
  while (!queue.empty()) {
    Work w = std::move(queue.front());
    queue.pop_front();
    Components comps = label_components(w.cells, 4);
    if (comps.count > 1) {
      for (int c = 0; c < comps.count; ++c) {
        Work sub;
        sub.cells = CellSet(g);
        for (int iy = 0; iy < g.n; ++iy)
          for (int ix = 0; ix < g.n; ++ix)
            if (comps.labels[g.idx(ix, iy)] == c) sub.cells.set(ix, iy);
        queue.push_back(std::move(sub));
      }
      continue;
    }
    size_t cells = w.cells.count();
    if (cells == 0) continue;
    std::vector<double> dist = boundary_distance(w.cells, cuts);
    auto [cx, cy] = best_center(w.cells, dist);
    SlackSearch s = max_slack(w.cells, dist, rho_target, cx, cy, cuts);
    if (s.feasible || cells <= 4) {
      int id = out.piece_count++;
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
          if (w.cells.test(ix, iy)) out.labels[g.idx(ix, iy)] = id;
      continue;
    }
    if (w.cells.area() < eps_area) {
      out.rest |= w.cells;
      continue;
    }
    // bottleneck = the vertex where the slack constraint binds along the
    // worst witness path: argmin over the path of rho*d(w) - arc(w -> worst)
    int wx = s.worst % g.n, wy = s.worst / g.n;
    {
      std::vector<int> path;
      for (int v = s.worst; v >= 0; v = s.parent[v]) path.push_back(v);
      double arc = 0.0;
      double best_bind = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < path.size(); ++k) {
        if (k > 0) {
          int a = path[k - 1], b = path[k];
          int dx = std::abs(a % g.n - b % g.n), dy = std::abs(a / g.n - b / g.n);
          arc += (dx && dy) ? std::sqrt(2.0) : 1.0;
        }
        double bind = rho_target * dist[path[k]] - arc;
        if (bind < best_bind) {
          best_bind = bind;
          wx = path[k] % g.n;
          wy = path[k] / g.n;
        }
      }
    }
    auto try_cut = [&](bool cut_vertical, CellSet& a, CellSet& b) {
      a = CellSet(g);
      b = CellSet(g);
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
          if (!w.cells.test(ix, iy)) continue;
          bool side = cut_vertical ? (ix <= wx) : (iy <= wy);
          (side ? a : b).set(ix, iy);
        }
      return a.count() > 0 && b.count() > 0;
    };
    int row_len = 0, col_len = 0;
    for (int ix = 0; ix < g.n; ++ix) row_len += w.cells.test(ix, wy);
    for (int iy = 0; iy < g.n; ++iy) col_len += w.cells.test(wx, iy);
    bool cut_vertical = (col_len <= row_len);
    CellSet a(g), b(g);
    bool ok = try_cut(cut_vertical, a, b) || try_cut(!cut_vertical, a, b);
    if (!ok) {
      // degenerate bottleneck at the region edge: bisect the bounding box
      Components cc = label_components(w.cells, 4);
      Box bb = cc.bboxes[0];
      bool vert = bb.width() >= bb.height();
      double mid = vert ? 0.5 * (bb.x0 + bb.x1) : 0.5 * (bb.y0 + bb.y1);
      a = CellSet(g);
      b = CellSet(g);
      for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
          if (!w.cells.test(ix, iy)) continue;
          Vec2 c = g.cell_center(ix, iy);
          ((vert ? c.x : c.y) <= mid ? a : b).set(ix, iy);
        }
      ok = a.count() > 0 && b.count() > 0;
      cut_vertical = vert;
    }
    if (!ok) {
      out.rest |= w.cells;
      continue;
    }
    out.added_boundary += (cut_vertical ? col_len : row_len) * h;
    out.splits++;
    queue.push_back({std::move(a)});
    queue.push_back({std::move(b)});
  }
  return out;
}

}  // namespace korn
