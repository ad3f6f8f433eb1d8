#include "korn/field.hpp"

#include <algorithm>
#include <cmath>

namespace korn {

size_t StrainField::masked_count() const {
  size_t c = 0;
  for (uint8_t v : valid) c += (v == 0);
  return c;
}

CellSet StrainField::valid_mask() const {
  CellSet out(grid);
  for (size_t i = 0; i < valid.size(); ++i) out.mask[i] = valid[i];
  return out;
}

DisplacementField sample_analytic(const std::function<Vec2(Vec2)>& f, const SegmentSet& jumps, int n, double mu,
                                  Vec2 y_offset) {
  if (n < 8) throw std::invalid_argument("sample_analytic: n must be >= 8");
  GridSpec g(n, mu);
  for (const auto& s : jumps.segments) {
    Box dom{-mu, -mu, mu, mu};
    if (!dom.contains_closed(s.a) || !dom.contains_closed(s.b))
      throw std::invalid_argument("sample_analytic: jump segment outside the closed domain square");
  }
  DisplacementField out(g);
  out.jumps = jumps;
  double h = g.h();
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Vec2 p{-mu + (ix + y_offset.x) * h, -mu + (iy + y_offset.y) * h};
      Vec2 v = f(p);
      if (!std::isfinite(v.x) || !std::isfinite(v.y))
        throw std::invalid_argument("sample_analytic: non-finite sample");
      out.at(ix, iy) = v;
    }
  return out;
}

namespace {

// Does the straight stencil segment between two cell centers cross a jump?
// Endpoint ties count as crossing.
inline bool stencil_blocked(const SegmentIndex& idx, const Vec2& a, const Vec2& b) {
  return idx.any_intersecting(Segment{a, b});
}

}  // namespace

StrainField strain(const DisplacementField& u) {
  const GridSpec& g = u.grid;
  StrainField out(g);
  double h = g.h();
  SegmentIndex idx(g, u.jumps);
  bool no_jumps = u.jumps.empty();

  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      Vec2 c = g.cell_center(ix, iy);
      // x-direction derivative of both components
      double dux1 = 0, dux2 = 0, duy1 = 0, duy2 = 0;
      bool ok_x = false, ok_y = false;

      auto try_diff = [&](int ax, int ay, int bx, int by, double span, double& d1, double& d2) {
        if (!g.valid(ax, ay) || !g.valid(bx, by)) return false;
        if (!no_jumps && stencil_blocked(idx, g.cell_center(ax, ay), g.cell_center(bx, by))) return false;
        const Vec2& ua = u.at(ax, ay);
        const Vec2& ub = u.at(bx, by);
        d1 = (ub.x - ua.x) / span;
        d2 = (ub.y - ua.y) / span;
        return true;
      };
      (void)c;

      // central, then one-sided forward, then backward
      ok_x = try_diff(ix - 1, iy, ix + 1, iy, 2 * h, dux1, dux2) || try_diff(ix, iy, ix + 1, iy, h, dux1, dux2) ||
             try_diff(ix - 1, iy, ix, iy, h, dux1, dux2);
      ok_y = try_diff(ix, iy - 1, ix, iy + 1, 2 * h, duy1, duy2) || try_diff(ix, iy, ix, iy + 1, h, duy1, duy2) ||
             try_diff(ix, iy - 1, ix, iy, h, duy1, duy2);

      int i = g.idx(ix, iy);
      if (ok_x && ok_y) {
        Mat2 grad{dux1, duy1, dux2, duy2};  // grad[i][j] = d u_i / d x_j
        out.grad[i] = grad;
        out.strain[i] = Mat2{grad.a11, 0.5 * (grad.a12 + grad.a21), 0.5 * (grad.a12 + grad.a21), grad.a22};
        out.valid[i] = 1;
      }
    }
  return out;
}

namespace {

template <typename NormOf>
LpResult lp_generic(size_t count, const GridSpec& g, double p, const CellSet* region, NormOf&& f) {
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  LpResult r;
  double h2 = g.h() * g.h();
  size_t used = 0;
  if (std::isinf(p)) {
    double m = 0.0;
    for (size_t i = 0; i < count; ++i) {
      if (region && !region->mask[i]) continue;
      ++used;
      m = std::max(m, f(i));
    }
    r.value = m;
  } else {
    double acc = 0.0;
    for (size_t i = 0; i < count; ++i) {
      if (region && !region->mask[i]) continue;
      ++used;
      acc += std::pow(f(i), p) * h2;
    }
    r.value = std::pow(acc, 1.0 / p);
  }
  r.empty_region = (used == 0);
  if (r.empty_region) r.value = 0.0;
  return r;
}

}  // namespace

LpResult lp_norm_vec(const std::vector<Vec2>& values, const GridSpec& g, double p, const CellSet* region) {
  return lp_generic(values.size(), g, p, region, [&](size_t i) { return values[i].norm(); });
}

LpResult lp_norm_grad(const StrainField& s, double p, const CellSet* region, bool symmetric_part) {
  const auto& m = symmetric_part ? s.strain : s.grad;
  CellSet combined = s.valid_mask();
  if (region) combined &= *region;
  return lp_generic(m.size(), s.grid, p, &combined, [&](size_t i) { return m[i].frobenius(); });
}

LpResult lp_norm_scalar(const std::vector<double>& values, const GridSpec& g, double p, const CellSet* region) {
  return lp_generic(values.size(), g, p, region, [&](size_t i) { return std::abs(values[i]); });
}

double max_discrete_gradient(const StrainField& s) {
  double m = 0.0;
  for (size_t i = 0; i < s.grad.size(); ++i)
    if (s.valid[i]) m = std::max(m, s.grad[i].frobenius());
  return m;
}

}  // namespace korn
