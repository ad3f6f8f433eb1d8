#include "korn/fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace korn {
namespace fixtures {

namespace {

Vec2 rigid_eval(double w, Vec2 b, Vec2 x) { return {b.x - w * x.y, b.y + w * x.x}; }

}  // namespace

DisplacementField rigid(int n, double mu, double omega, Vec2 b) {
  return sample_analytic([&](Vec2 x) { return rigid_eval(omega, b, x); }, SegmentSet{}, n, mu);
}

DisplacementField ramp(int n, double mu) {
  return sample_analytic([&](Vec2 x) { return Vec2{x.x, 0.0}; }, SegmentSet{}, n, mu);
}

DisplacementField linear(int n, double mu, Mat2 G) {
  return sample_analytic([&](Vec2 x) { return Vec2{G.a11 * x.x + G.a12 * x.y, G.a21 * x.x + G.a22 * x.y}; },
                         SegmentSet{}, n, mu);
}

DisplacementField piecewise_rigid(int n, double mu, int k, unsigned long long seed) {
  if (k < 1 || k > 6) throw std::invalid_argument("piecewise_rigid: k in 1..6");
  std::mt19937_64 rng(seed * 7919 + 13);
  std::uniform_real_distribution<double> U(-1.0, 1.0);

  // k-1 chords, all roughly vertical and mutually disjoint, so the domain
  // splits into exactly k strips
  SegmentSet J;
  std::vector<double> used;
  bool vertical = (seed % 2 == 0);
  for (int c = 0; c < k - 1; ++c) {
    double off = 0.0;
    for (int tries = 0; tries < 128; ++tries) {
      off = 0.72 * mu * U(rng);
      bool ok = true;
      for (double o : used)
        if (std::abs(o - off) < 0.24 * mu) ok = false;
      if (ok) break;
    }
    used.push_back(off);
    double tilt = 0.05 * mu * U(rng);
    Segment s = vertical ? Segment{{off - tilt, -mu}, {off + tilt, mu}} : Segment{{-mu, off - tilt}, {mu, off + tilt}};
    J.add(s);
  }

  // labels via flood fill off the chords, then a rigid motion per label with
  // pairwise-separated parameters
  GridSpec g(n, mu);
  EdgeCuts cuts(g);
  cuts.add_segments(J);
  CellSet full(g, true);
  Components comps = label_components_cut(full, cuts);

  std::vector<double> omegas;
  std::vector<Vec2> bs;
  for (int c = 0; c < comps.count; ++c) {
    double w = 0.0;
    Vec2 b{0, 0};
    for (int tries = 0; tries < 256; ++tries) {
      double mag = 0.3 + 0.7 * std::abs(U(rng));
      w = (U(rng) >= 0 ? mag : -mag);
      b = {0.5 * U(rng), 0.5 * U(rng)};
      bool ok = true;
      for (size_t j = 0; j < omegas.size(); ++j)
        if (std::abs(omegas[j] - w) < 0.1 && (bs[j] - b).norm() < 0.1) ok = false;
      if (ok) break;
    }
    omegas.push_back(w);
    bs.push_back(b);
  }

  DisplacementField out(g);
  out.jumps = J;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      int lab = comps.labels[g.idx(ix, iy)];
      out.at(ix, iy) = rigid_eval(omegas[lab], bs[lab], g.cell_center(ix, iy));
    }
  return out;
}

DisplacementField rotating_balls(int n, double mu, int k) {
  if (k < 1 || k > 6) throw std::invalid_argument("rotating_balls: k in 1..6");
  // disjoint polygon "balls" on a fixed layout inside Q_mu
  const int NV = 64;
  struct Ball {
    Vec2 c;
    double r;
  };
  std::vector<Ball> balls = {{{-0.52 * mu, 0.30 * mu}, 0.24 * mu}, {{0.45 * mu, 0.42 * mu}, 0.19 * mu},
                             {{0.05 * mu, -0.45 * mu}, 0.16 * mu}, {{-0.55 * mu, -0.52 * mu}, 0.13 * mu},
                             {{0.62 * mu, -0.30 * mu}, 0.11 * mu},  {{-0.05 * mu, 0.62 * mu}, 0.095 * mu}};
  balls.resize(k);

  SegmentSet J;
  std::vector<std::vector<Vec2>> polys;
  for (const auto& b : balls) {
    std::vector<Vec2> poly;
    for (int v = 0; v < NV; ++v) {
      double a = 2.0 * M_PI * v / NV;
      poly.push_back({b.c.x + b.r * std::cos(a), b.c.y + b.r * std::sin(a)});
    }
    for (int v = 0; v < NV; ++v) J.add(Segment{poly[v], poly[(v + 1) % NV]});
    polys.push_back(std::move(poly));
  }

  auto inside = [&](const std::vector<Vec2>& poly, Vec2 p) {
    bool in = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      if (((poly[i].y > p.y) != (poly[j].y > p.y)) &&
          (p.x < (poly[j].x - poly[i].x) * (p.y - poly[i].y) / (poly[j].y - poly[i].y) + poly[i].x))
        in = !in;
    }
    return in;
  };

  return sample_analytic(
      [&](Vec2 x) -> Vec2 {
        for (int b = 0; b < k; ++b)
          if (inside(polys[b], x)) {
            double w = (b % 2 == 0 ? 1.0 : -1.0) / balls[b].r;  // opposing, magnitude 1/r
            Vec2 rel = x - balls[b].c;
            return {-w * rel.y, w * rel.x};
          }
        return {0.0, 0.0};
      },
      J, n, mu);
}

DisplacementField crack_forest(int n, double mu, unsigned long long seed) {
  std::mt19937_64 rng(seed * 2654435761ull + 99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int count = 1 + int(U(rng) * 49.0);
  SegmentSet J;
  struct Slip {
    Segment s;
    double amp;
    double width;
  };
  std::vector<Slip> slips;
  for (int c = 0; c < count; ++c) {
    double len = mu / 50.0 + (mu / 2.0 - mu / 50.0) * U(rng);
    double ang = 2.0 * M_PI * U(rng);
    Vec2 mid{(2.0 * U(rng) - 1.0) * 0.85 * mu, (2.0 * U(rng) - 1.0) * 0.85 * mu};
    Vec2 d{std::cos(ang) * len / 2, std::sin(ang) * len / 2};
    Vec2 a = mid - d, b = mid + d;
    a.x = std::clamp(a.x, -mu, mu);
    a.y = std::clamp(a.y, -mu, mu);
    b.x = std::clamp(b.x, -mu, mu);
    b.y = std::clamp(b.y, -mu, mu);
    if ((b - a).norm() < mu / 100.0) continue;
    Segment s{a, b};
    J.add(s);
    if (s.length() > 0.15 * mu && U(rng) > 0.5) slips.push_back({s, 0.05 * (2.0 * U(rng) - 1.0), 0.03 * mu});
  }
  double amp = 0.3;
  return sample_analytic(
      [&](Vec2 x) -> Vec2 {
        // smooth strained background
        Vec2 v{amp * std::sin(x.x / mu) * std::cos(0.7 * x.y / mu), amp * 0.5 * x.x * x.y / (mu * mu)};
        // tangential slip around long cracks, vanishing at the crack ends
        for (const auto& sl : slips) {
          Vec2 d = sl.s.b - sl.s.a;
          double L = d.norm();
          Vec2 t{d.x / L, d.y / L};
          Vec2 nrm{-t.y, t.x};
          Vec2 rel = x - sl.s.a;
          double along = rel.dot(t), perp = rel.dot(nrm);
          double margin = 0.15 * L;
          if (along > margin && along < L - margin && std::abs(perp) < sl.width && std::abs(perp) > 1e-12) {
            double taper = std::min(1.0, std::min(along - margin, L - margin - along) / margin);
            double w = (1.0 - std::abs(perp) / sl.width) * taper;
            double sgn = perp > 0 ? 1.0 : -1.0;
            v.x += sgn * sl.amp * w * t.x;
            v.y += sgn * sl.amp * w * t.y;
          }
        }
        return v;
      },
      J, n, mu);
}

DisplacementField detached_corner(int n, double mu, double crack_len, unsigned long long seed) {
  std::mt19937_64 rng(seed * 31337 + 7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  // chord cutting off the upper-right corner
  double c = std::clamp(crack_len / std::sqrt(2.0), 0.02 * mu, 0.9 * mu);
  Segment chord{{mu - c, mu}, {mu, mu - c}};
  SegmentSet J;
  J.add(chord);
  double wild_w = 2.0 + std::abs(U(rng));
  Vec2 wild_b{0.8 * U(rng), 0.8 * U(rng)};
  double eps = 0.05;
  return sample_analytic(
      [&](Vec2 x) -> Vec2 {
        bool corner = (x.x + x.y > 2.0 * mu - c);
        Vec2 base{eps * x.x * x.x / mu, 0.0};  // small smooth strain everywhere
        if (corner) {
          Vec2 w = rigid_eval(wild_w, wild_b, x);
          return {base.x + w.x, base.y + w.y};
        }
        return base;
      },
      J, n, mu);
}

DisplacementField dense_cluster(int n, double mu, double theta, int gen, int ix, int iy) {
  DyadicLayout layout(mu, theta);
  Square q = layout.square(gen, ix, iy);
  SegmentSet J;
  // zigzag of total length ~100 d(Q) inside the square
  double s = q.halfside;
  int lines = int(std::ceil(100.0 * q.diam() / (2 * 0.9 * s)));
  lines = std::min(lines, 4 * n);
  for (int k = 0; k < lines; ++k) {
    double y = q.center.y - 0.9 * s + 1.8 * s * double(k) / std::max(1, lines - 1);
    J.add(Segment{{q.center.x - 0.9 * s, y}, {q.center.x + 0.9 * s, y}});
  }
  return sample_analytic([&](Vec2 x) { return Vec2{0.1 * x.x, 0.0}; }, J, n, mu);
}

std::vector<int> true_labels(const DisplacementField& u, int* count) {
  EdgeCuts cuts(u.grid);
  cuts.add_segments(u.jumps);
  CellSet full(u.grid, true);
  Components comps = label_components_cut(full, cuts);
  if (count) *count = comps.count;
  return comps.labels;
}

}  // namespace fixtures
}  // namespace korn
