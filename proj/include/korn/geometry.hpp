#pragma once

// Dyadic squares, segments, grid cell sets and the exact measure
// computations the covering constructions are built on.

#include <cmath>
#include <cstdint>
#include <climits>
#include <stdexcept>
#include <string>
#include <vector>

namespace korn {

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // x0 <= x1, y0 <= y1
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(const Vec2& p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
  bool contains_closed(const Vec2& p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  bool intersects(const Box& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  bool contains_box(const Box& o) const { return o.x0 >= x0 && o.x1 <= x1 && o.y0 >= y0 && o.y1 <= y1; }
};

// Dyadic square: center, halfside, generation index. halfside = mu * theta^gen
// for grid-aligned squares; ix/iy are lattice coordinates when aligned.
struct Square {
  Vec2 center;
  double halfside = 0.0;
  int gen = 0;
  int ix = -1, iy = -1;
  Box box() const { return {center.x - halfside, center.y - halfside, center.x + halfside, center.y + halfside}; }
  double diam() const { return 2.0 * std::sqrt(2.0) * halfside; }
};

enum class EnlargeFactor { ThreeHalves, Three, Five };

struct EnlargedSquare {
  Square base;
  double factor = 1.5;  // one of 1.5, 3, 5
  Box box() const {
    double hs = base.halfside * factor;
    return {base.center.x - hs, base.center.y - hs, base.center.x + hs, base.center.y + hs};
  }
};

EnlargedSquare enlarge(const Square& sq, double factor);
inline EnlargedSquare enlarged_q1(const Square& sq) { return enlarge(sq, 1.5); }  // Q'
inline EnlargedSquare enlarged_q2(const Square& sq) { return enlarge(sq, 3.0); }  // Q''
inline EnlargedSquare enlarged_q3(const Square& sq) { return enlarge(sq, 5.0); }  // Q'''

struct Segment {
  Vec2 a, b;
  Segment() = default;
  Segment(Vec2 a_, Vec2 b_);
  double length() const { return (b - a).norm(); }
};

struct SegmentSet {
  std::vector<Segment> segments;
  double total_length() const;
  bool empty() const { return segments.empty(); }
  void add(const Segment& s) { segments.push_back(s); }
  void add(const SegmentSet& o) { segments.insert(segments.end(), o.segments.begin(), o.segments.end()); }
};

// Dyadic layout of the domain square Q_mu = (-mu, mu)^2. Generation g squares
// have halfside mu*theta^g and tile the domain on an integer lattice; each
// square is half-open [p-s, p+s)^2 for tiling, closed for measures.
struct DyadicLayout {
  double mu = 1.0;
  double theta = 0.25;
  DyadicLayout() = default;
  DyadicLayout(double mu_, double theta_);
  int per_side(int gen) const;                 // theta^-gen
  double halfside(int gen) const { return mu * std::pow(theta, gen); }
  Square square(int gen, int ix, int iy) const;
  // Grid-aligned square containing point p at generation gen (clamped to domain).
  Square square_at(int gen, const Vec2& p) const;
};

std::vector<Square> dyadic_children(const Square& sq, double theta);

// Exact 1D Hausdorff measure of segs clipped to a box / (enlarged) square.
double segment_measure_in(const Box& box, const SegmentSet& segs);
double segment_measure_in(const Square& sq, const SegmentSet& segs);
double segment_measure_in(const EnlargedSquare& esq, const SegmentSet& segs);

// Clip one segment to a box; returns false if the intersection is empty.
bool clip_segment(const Segment& s, const Box& box, Vec2& out_a, Vec2& out_b);

// Segment-segment intersection, inclusive of endpoints (ties count as crossing).
bool segments_intersect(const Segment& a, const Segment& b);

double point_segment_distance(const Vec2& p, const Segment& s);
double segment_segment_distance(const Segment& a, const Segment& b);

// ---- grid cells ------------------------------------------------------------

struct GridSpec {
  int n = 0;
  double mu = 1.0;
  GridSpec() = default;
  GridSpec(int n_, double mu_) : n(n_), mu(mu_) {}
  double h() const { return 2.0 * mu / n; }
  Vec2 cell_center(int ix, int iy) const {
    double hh = h();
    return {-mu + (ix + 0.5) * hh, -mu + (iy + 0.5) * hh};
  }
  Box cell_box(int ix, int iy) const {
    double hh = h();
    return {-mu + ix * hh, -mu + iy * hh, -mu + (ix + 1) * hh, -mu + (iy + 1) * hh};
  }
  bool valid(int ix, int iy) const { return ix >= 0 && ix < n && iy >= 0 && iy < n; }
  int idx(int ix, int iy) const { return iy * n + ix; }
  bool operator==(const GridSpec& o) const { return n == o.n && mu == o.mu; }
};

struct CellSet {
  GridSpec grid;
  std::vector<uint8_t> mask;
  // grow-only bounding window (superset of the occupied cells)
  int bx0 = INT32_MAX, bx1 = -1, by0 = INT32_MAX, by1 = -1;
  CellSet() = default;
  explicit CellSet(const GridSpec& g, bool fill = false) : grid(g), mask(size_t(g.n) * g.n, fill ? 1 : 0) {
    if (fill) {
      bx0 = by0 = 0;
      bx1 = by1 = g.n - 1;
    }
  }
  bool test(int ix, int iy) const { return mask[grid.idx(ix, iy)] != 0; }
  void set(int ix, int iy, bool v = true) {
    mask[grid.idx(ix, iy)] = v ? 1 : 0;
    if (v) {
      bx0 = std::min(bx0, ix);
      bx1 = std::max(bx1, ix);
      by0 = std::min(by0, iy);
      by1 = std::max(by1, iy);
    }
  }
  // iteration window (clamped); empty sets yield an empty window
  int wx0() const { return std::max(0, bx0); }
  int wx1() const { return std::min(grid.n - 1, bx1); }
  int wy0() const { return std::max(0, by0); }
  int wy1() const { return std::min(grid.n - 1, by1); }
  size_t count() const;
  double area() const { return double(count()) * grid.h() * grid.h(); }
  bool empty() const { return count() == 0; }
  CellSet& operator|=(const CellSet& o);
  CellSet& operator&=(const CellSet& o);
  CellSet complement() const;
};

// Cells whose center lies in the half-open box.
CellSet rasterize(const GridSpec& g, const Box& box);
CellSet rasterize(const GridSpec& g, const Square& sq);
CellSet rasterize(const GridSpec& g, const EnlargedSquare& esq);

// Region plus all bounded connected components of its complement
// (4-connectivity for the complement).
CellSet saturate(const CellSet& region);

// Connected component labeling. labels: -1 outside mask, else component id.
struct Components {
  int count = 0;
  std::vector<int> labels;
  std::vector<int> sizes;
  std::vector<Box> bboxes;  // in domain units
};
Components label_components(const CellSet& mask, int connectivity);

// Dual-edge cut structure: a segment set cuts the 4-neighbor links between
// cells it crosses. Used for jump-aware connectivity and partitions.
struct EdgeCuts {
  GridSpec grid;
  std::vector<uint8_t> hcut;  // (n-1) x n, edge (ix,iy)-(ix+1,iy)
  std::vector<uint8_t> vcut;  // n x (n-1), edge (ix,iy)-(ix,iy+1)
  EdgeCuts() = default;
  explicit EdgeCuts(const GridSpec& g)
      : grid(g), hcut(size_t(g.n - 1) * g.n, 0), vcut(size_t(g.n) * (g.n - 1), 0) {}
  bool hcut_at(int ix, int iy) const { return hcut[size_t(iy) * (grid.n - 1) + ix] != 0; }
  bool vcut_at(int ix, int iy) const { return vcut[size_t(iy) * grid.n + ix] != 0; }
  void set_hcut(int ix, int iy) { hcut[size_t(iy) * (grid.n - 1) + ix] = 1; }
  void set_vcut(int ix, int iy) { vcut[size_t(iy) * grid.n + ix] = 1; }
  void add_segments(const SegmentSet& segs);
  size_t cut_count() const;
};

// Label components of `mask` under 4-connectivity respecting cut edges.
Components label_components_cut(const CellSet& mask, const EdgeCuts& cuts);

// Spatial index over segments for local queries (bucket grid).
struct SegmentIndex {
  GridSpec grid;
  std::vector<std::vector<int>> buckets;
  const SegmentSet* segs = nullptr;
  SegmentIndex() = default;
  SegmentIndex(const GridSpec& g, const SegmentSet& s);
  // Segment ids whose bbox (padded by one cell) meets the given box.
  void query(const Box& box, std::vector<int>& out) const;
  bool any_intersecting(const Segment& probe) const;
};

struct geometry_error : std::runtime_error {
  explicit geometry_error(const std::string& w) : std::runtime_error(w) {}
};

}  // namespace korn
