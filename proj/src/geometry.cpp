#include "korn/geometry.hpp"

#include <algorithm>
#include <cstring>
#include <deque>

namespace korn {

EnlargedSquare enlarge(const Square& sq, double factor) {
  if (factor != 1.5 && factor != 3.0 && factor != 5.0)
    throw std::invalid_argument("enlarge: factor must be one of 3/2, 3, 5");
  return EnlargedSquare{sq, factor};
}

Segment::Segment(Vec2 a_, Vec2 b_) : a(a_), b(b_) {
  if ((b - a).norm() <= 0.0) throw geometry_error("degenerate segment (zero length)");
}

double SegmentSet::total_length() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.length();
  return t;
}

DyadicLayout::DyadicLayout(double mu_, double theta_) : mu(mu_), theta(theta_) {
  if (mu <= 0) throw std::invalid_argument("domain halfside must be positive");
  // theta restricted to {1/2, 1/4, 1/8, 1/16}
  bool ok = theta == 0.5 || theta == 0.25 || theta == 0.125 || theta == 0.0625;
  if (!ok) throw std::invalid_argument("theta must be one of 1/2, 1/4, 1/8, 1/16");
}

int DyadicLayout::per_side(int gen) const {
  double inv = 1.0 / theta;
  double m = std::pow(inv, gen);
  return int(std::llround(m));
}

Square DyadicLayout::square(int gen, int ix, int iy) const {
  double s = halfside(gen);
  Square q;
  q.halfside = s;
  q.gen = gen;
  q.ix = ix;
  q.iy = iy;
  q.center = {-mu + (2 * ix + 1) * s, -mu + (2 * iy + 1) * s};
  return q;
}

Square DyadicLayout::square_at(int gen, const Vec2& p) const {
  double s = halfside(gen);
  int m = per_side(gen);
  int ix = std::clamp(int(std::floor((p.x + mu) / (2 * s))), 0, m - 1);
  int iy = std::clamp(int(std::floor((p.y + mu) / (2 * s))), 0, m - 1);
  return square(gen, ix, iy);
}

std::vector<Square> dyadic_children(const Square& sq, double theta) {
  bool ok = theta == 0.5 || theta == 0.25 || theta == 0.125 || theta == 0.0625;
  if (!ok) throw std::invalid_argument("dyadic_children: theta must be a negative power of two in {1/2..1/16}");
  int m = int(std::llround(1.0 / theta));
  double hs = sq.halfside * theta;
  std::vector<Square> out;
  out.reserve(size_t(m) * m);
  double x0 = sq.center.x - sq.halfside;
  double y0 = sq.center.y - sq.halfside;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      Square c;
      c.halfside = hs;
      c.gen = sq.gen + 1;
      c.ix = (sq.ix >= 0) ? sq.ix * m + i : -1;
      c.iy = (sq.iy >= 0) ? sq.iy * m + j : -1;
      c.center = {x0 + (2 * i + 1) * hs, y0 + (2 * j + 1) * hs};
      out.push_back(c);
    }
  return out;
}

bool clip_segment(const Segment& s, const Box& box, Vec2& out_a, Vec2& out_b) {
  // Liang-Barsky parametric clipping.
  double t0 = 0.0, t1 = 1.0;
  double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
  auto clip = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;
    double r = q / p;
    if (p < 0) {
      if (r > t1) return false;
      if (r > t0) t0 = r;
    } else {
      if (r < t0) return false;
      if (r < t1) t1 = r;
    }
    return true;
  };
  if (!clip(-dx, s.a.x - box.x0)) return false;
  if (!clip(dx, box.x1 - s.a.x)) return false;
  if (!clip(-dy, s.a.y - box.y0)) return false;
  if (!clip(dy, box.y1 - s.a.y)) return false;
  if (t1 < t0) return false;
  out_a = {s.a.x + t0 * dx, s.a.y + t0 * dy};
  out_b = {s.a.x + t1 * dx, s.a.y + t1 * dy};
  return true;
}

double segment_measure_in(const Box& box, const SegmentSet& segs) {
  double total = 0.0;
  Vec2 a, b;
  for (const auto& s : segs.segments)
    if (clip_segment(s, box, a, b)) total += (b - a).norm();
  return total;
}

double segment_measure_in(const Square& sq, const SegmentSet& segs) { return segment_measure_in(sq.box(), segs); }
double segment_measure_in(const EnlargedSquare& esq, const SegmentSet& segs) { return segment_measure_in(esq.box(), segs); }

namespace {
inline int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  double v = (b - a).cross(c - a);
  double scale = std::abs(b.x - a.x) + std::abs(b.y - a.y) + std::abs(c.x - a.x) + std::abs(c.y - a.y);
  double eps = 1e-14 * scale * scale;
  if (v > eps) return 1;
  if (v < -eps) return -1;
  return 0;
}
inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x, b.x) - 1e-14 <= p.x && p.x <= std::max(a.x, b.x) + 1e-14 &&
         std::min(a.y, b.y) - 1e-14 <= p.y && p.y <= std::max(a.y, b.y) + 1e-14;
}
}  // namespace

bool segments_intersect(const Segment& s1, const Segment& s2) {
  int d1 = orient(s2.a, s2.b, s1.a);
  int d2 = orient(s2.a, s2.b, s1.b);
  int d3 = orient(s1.a, s1.b, s2.a);
  int d4 = orient(s1.a, s1.b, s2.b);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(s2.a, s2.b, s1.a)) return true;
  if (d2 == 0 && on_segment(s2.a, s2.b, s1.b)) return true;
  if (d3 == 0 && on_segment(s1.a, s1.b, s2.a)) return true;
  if (d4 == 0 && on_segment(s1.a, s1.b, s2.b)) return true;
  return false;
}

double point_segment_distance(const Vec2& p, const Segment& s) {
  Vec2 d = s.b - s.a;
  double t = (p - s.a).dot(d) / d.norm2();
  t = std::clamp(t, 0.0, 1.0);
  return (p - (s.a + t * d)).norm();
}

double segment_segment_distance(const Segment& a, const Segment& b) {
  if (segments_intersect(a, b)) return 0.0;
  double d = point_segment_distance(a.a, b);
  d = std::min(d, point_segment_distance(a.b, b));
  d = std::min(d, point_segment_distance(b.a, a));
  d = std::min(d, point_segment_distance(b.b, a));
  return d;
}

size_t CellSet::count() const {
  size_t c = 0;
  for (uint8_t v : mask) c += v;
  return c;
}

CellSet& CellSet::operator|=(const CellSet& o) {
  for (size_t i = 0; i < mask.size(); ++i) mask[i] |= o.mask[i];
  bx0 = std::min(bx0, o.bx0);
  bx1 = std::max(bx1, o.bx1);
  by0 = std::min(by0, o.by0);
  by1 = std::max(by1, o.by1);
  return *this;
}

CellSet& CellSet::operator&=(const CellSet& o) {
  for (size_t i = 0; i < mask.size(); ++i) mask[i] &= o.mask[i];
  return *this;
}

CellSet CellSet::complement() const {
  CellSet out(grid);
  for (size_t i = 0; i < mask.size(); ++i) out.mask[i] = mask[i] ? 0 : 1;
  out.bx0 = out.by0 = 0;
  out.bx1 = out.by1 = grid.n - 1;
  return out;
}

CellSet rasterize(const GridSpec& g, const Box& box) {
  CellSet out(g);
  double hh = g.h();
  int ix0 = std::max(0, int(std::floor((box.x0 + g.mu) / hh - 0.5)));
  int ix1 = std::min(g.n - 1, int(std::ceil((box.x1 + g.mu) / hh)));
  int iy0 = std::max(0, int(std::floor((box.y0 + g.mu) / hh - 0.5)));
  int iy1 = std::min(g.n - 1, int(std::ceil((box.y1 + g.mu) / hh)));
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix)
      if (box.contains(g.cell_center(ix, iy))) out.set(ix, iy);
  return out;
}

CellSet rasterize(const GridSpec& g, const Square& sq) { return rasterize(g, sq.box()); }
CellSet rasterize(const GridSpec& g, const EnlargedSquare& esq) { return rasterize(g, esq.box()); }

CellSet saturate(const CellSet& region) {
  const GridSpec& g = region.grid;
  // Flood the complement from the frame; anything in the complement not
  // reached is a hole and gets filled.
  std::vector<uint8_t> reached(size_t(g.n) * g.n, 0);
  std::deque<std::pair<int, int>> q;
  auto push = [&](int x, int y) {
    int i = g.idx(x, y);
    if (!reached[i] && !region.mask[i]) {
      reached[i] = 1;
      q.emplace_back(x, y);
    }
  };
  for (int x = 0; x < g.n; ++x) {
    push(x, 0);
    push(x, g.n - 1);
  }
  for (int y = 0; y < g.n; ++y) {
    push(0, y);
    push(g.n - 1, y);
  }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    if (x > 0) push(x - 1, y);
    if (x + 1 < g.n) push(x + 1, y);
    if (y > 0) push(x, y - 1);
    if (y + 1 < g.n) push(x, y + 1);
  }
  CellSet out(g);
  for (size_t i = 0; i < out.mask.size(); ++i) out.mask[i] = (region.mask[i] || !reached[i]) ? 1 : 0;
  return out;
}

Components label_components(const CellSet& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw std::invalid_argument("connectivity must be 4 or 8");
  const GridSpec& g = mask.grid;
  Components out;
  out.labels.assign(size_t(g.n) * g.n, -1);
  std::deque<std::pair<int, int>> q;
  for (int sy = 0; sy < g.n; ++sy)
    for (int sx = 0; sx < g.n; ++sx) {
      int si = g.idx(sx, sy);
      if (!mask.mask[si] || out.labels[si] >= 0) continue;
      int id = out.count++;
      out.sizes.push_back(0);
      Box bb = g.cell_box(sx, sy);
      out.labels[si] = id;
      q.emplace_back(sx, sy);
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        out.sizes[id]++;
        Box cb = g.cell_box(x, y);
        bb.x0 = std::min(bb.x0, cb.x0);
        bb.y0 = std::min(bb.y0, cb.y0);
        bb.x1 = std::max(bb.x1, cb.x1);
        bb.y1 = std::max(bb.y1, cb.y1);
        auto visit = [&](int nx, int ny) {
          if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n) return;
          int ni = g.idx(nx, ny);
          if (mask.mask[ni] && out.labels[ni] < 0) {
            out.labels[ni] = id;
            q.emplace_back(nx, ny);
          }
        };
        visit(x - 1, y);
        visit(x + 1, y);
        visit(x, y - 1);
        visit(x, y + 1);
        if (connectivity == 8) {
          visit(x - 1, y - 1);
          visit(x + 1, y - 1);
          visit(x - 1, y + 1);
          visit(x + 1, y + 1);
        }
      }
      out.bboxes.push_back(bb);
    }
  return out;
}

void EdgeCuts::add_segments(const SegmentSet& segs) {
  const GridSpec& g = grid;
  double hh = g.h();
  for (const auto& s : segs.segments) {
    Box bb{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y), std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y)};
    int ix0 = std::max(0, int(std::floor((bb.x0 + g.mu) / hh)) - 1);
    int ix1 = std::min(g.n - 1, int(std::floor((bb.x1 + g.mu) / hh)) + 1);
    int iy0 = std::max(0, int(std::floor((bb.y0 + g.mu) / hh)) - 1);
    int iy1 = std::min(g.n - 1, int(std::floor((bb.y1 + g.mu) / hh)) + 1);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        Vec2 c = g.cell_center(ix, iy);
        if (ix + 1 <= ix1 && ix + 1 < g.n && !hcut_at(ix, iy)) {
          Segment dual{c, g.cell_center(ix + 1, iy)};
          if (segments_intersect(dual, s)) set_hcut(ix, iy);
        }
        if (iy + 1 <= iy1 && iy + 1 < g.n && !vcut_at(ix, iy)) {
          Segment dual{c, g.cell_center(ix, iy + 1)};
          if (segments_intersect(dual, s)) set_vcut(ix, iy);
        }
      }
  }
}

size_t EdgeCuts::cut_count() const {
  size_t c = 0;
  for (uint8_t v : hcut) c += v;
  for (uint8_t v : vcut) c += v;
  return c;
}

Components label_components_cut(const CellSet& mask, const EdgeCuts& cuts) {
  const GridSpec& g = mask.grid;
  Components out;
  out.labels.assign(size_t(g.n) * g.n, -1);
  std::deque<std::pair<int, int>> q;
  for (int sy = 0; sy < g.n; ++sy)
    for (int sx = 0; sx < g.n; ++sx) {
      int si = g.idx(sx, sy);
      if (!mask.mask[si] || out.labels[si] >= 0) continue;
      int id = out.count++;
      out.sizes.push_back(0);
      Box bb = g.cell_box(sx, sy);
      out.labels[si] = id;
      q.emplace_back(sx, sy);
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        out.sizes[id]++;
        Box cb = g.cell_box(x, y);
        bb.x0 = std::min(bb.x0, cb.x0);
        bb.y0 = std::min(bb.y0, cb.y0);
        bb.x1 = std::max(bb.x1, cb.x1);
        bb.y1 = std::max(bb.y1, cb.y1);
        auto visit = [&](int nx, int ny) {
          int ni = g.idx(nx, ny);
          if (mask.mask[ni] && out.labels[ni] < 0) {
            out.labels[ni] = id;
            q.emplace_back(nx, ny);
          }
        };
        if (x > 0 && !cuts.hcut_at(x - 1, y)) visit(x - 1, y);
        if (x + 1 < g.n && !cuts.hcut_at(x, y)) visit(x + 1, y);
        if (y > 0 && !cuts.vcut_at(x, y - 1)) visit(x, y - 1);
        if (y + 1 < g.n && !cuts.vcut_at(x, y)) visit(x, y + 1);
      }
      out.bboxes.push_back(bb);
    }
  return out;
}

SegmentIndex::SegmentIndex(const GridSpec& g, const SegmentSet& s) : grid(g), segs(&s) {
  buckets.assign(size_t(g.n) * g.n, {});
  double hh = g.h();
  for (int si = 0; si < int(s.segments.size()); ++si) {
    const Segment& sg = s.segments[si];
    Box bb{std::min(sg.a.x, sg.b.x), std::min(sg.a.y, sg.b.y), std::max(sg.a.x, sg.b.x), std::max(sg.a.y, sg.b.y)};
    int ix0 = std::max(0, int(std::floor((bb.x0 + g.mu) / hh)) - 1);
    int ix1 = std::min(g.n - 1, int(std::floor((bb.x1 + g.mu) / hh)) + 1);
    int iy0 = std::max(0, int(std::floor((bb.y0 + g.mu) / hh)) - 1);
    int iy1 = std::min(g.n - 1, int(std::floor((bb.y1 + g.mu) / hh)) + 1);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        // only buckets whose padded box the segment actually meets
        Box cb = g.cell_box(ix, iy);
        cb.x0 -= hh;
        cb.y0 -= hh;
        cb.x1 += hh;
        cb.y1 += hh;
        Vec2 ca, cbp;
        if (clip_segment(sg, cb, ca, cbp)) buckets[g.idx(ix, iy)].push_back(si);
      }
  }
}

void SegmentIndex::query(const Box& box, std::vector<int>& out) const {
  out.clear();
  const GridSpec& g = grid;
  double hh = g.h();
  int ix0 = std::max(0, int(std::floor((box.x0 + g.mu) / hh)));
  int ix1 = std::min(g.n - 1, int(std::floor((box.x1 + g.mu) / hh)));
  int iy0 = std::max(0, int(std::floor((box.y0 + g.mu) / hh)));
  int iy1 = std::min(g.n - 1, int(std::floor((box.y1 + g.mu) / hh)));
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix)
      for (int si : buckets[g.idx(ix, iy)]) out.push_back(si);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

bool SegmentIndex::any_intersecting(const Segment& probe) const {
  // scan buckets directly; duplicate candidates are harmless here
  const GridSpec& g = grid;
  double hh = g.h();
  int ix0 = std::max(0, int(std::floor((std::min(probe.a.x, probe.b.x) + g.mu) / hh)));
  int ix1 = std::min(g.n - 1, int(std::floor((std::max(probe.a.x, probe.b.x) + g.mu) / hh)));
  int iy0 = std::max(0, int(std::floor((std::min(probe.a.y, probe.b.y) + g.mu) / hh)));
  int iy1 = std::min(g.n - 1, int(std::floor((std::max(probe.a.y, probe.b.y) + g.mu) / hh)));
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix)
      for (int si : buckets[g.idx(ix, iy)])
        if (segments_intersect(probe, segs->segments[si])) return true;
  return false;
}

}  // namespace korn
