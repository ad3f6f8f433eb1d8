#pragma once

// Discrete displacement fields on Q_mu = (-mu,mu)^2, jump-aware differential
// operators and norms.

#include <functional>
#include <optional>

#include "korn/geometry.hpp"

namespace korn {

struct DisplacementField {
  GridSpec grid;
  std::vector<Vec2> u;  // row-major, n*n
  SegmentSet jumps;

  DisplacementField() = default;
  explicit DisplacementField(const GridSpec& g) : grid(g), u(size_t(g.n) * g.n) {}
  const Vec2& at(int ix, int iy) const { return u[grid.idx(ix, iy)]; }
  Vec2& at(int ix, int iy) { return u[grid.idx(ix, iy)]; }
  double jump_length() const { return jumps.total_length(); }
};

struct Mat2 {
  double a11 = 0, a12 = 0, a21 = 0, a22 = 0;
  double frobenius() const { return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22); }
};

struct StrainField {
  GridSpec grid;
  std::vector<Mat2> grad;    // full gradient intermediate
  std::vector<Mat2> strain;  // symmetric part
  std::vector<uint8_t> valid;
  StrainField() = default;
  explicit StrainField(const GridSpec& g)
      : grid(g), grad(size_t(g.n) * g.n), strain(size_t(g.n) * g.n), valid(size_t(g.n) * g.n, 0) {}
  size_t masked_count() const;
  double masked_area() const { return double(masked_count()) * grid.h() * grid.h(); }
  CellSet valid_mask() const;
};

// Samples f at cell centers offset by y in [0,1)^2 (default (1/2,1/2)) and
// attaches the jump set. Rejects non-finite samples and jumps outside Q_mu.
DisplacementField sample_analytic(const std::function<Vec2(Vec2)>& f, const SegmentSet& jumps, int n, double mu,
                                  Vec2 y_offset = {0.5, 0.5});

// Central differences; stencils crossing a jump fall back to the one-sided
// stencil on the same side, cells with no valid stencil are masked.
StrainField strain(const DisplacementField& u);

struct LpResult {
  double value = 0.0;
  bool empty_region = false;
};

// (sum |v|^p h^2)^(1/p) over masked cells, sup-norm for p = inf.
LpResult lp_norm_vec(const std::vector<Vec2>& values, const GridSpec& g, double p, const CellSet* region = nullptr);
LpResult lp_norm_grad(const StrainField& s, double p, const CellSet* region = nullptr, bool symmetric_part = false);
LpResult lp_norm_scalar(const std::vector<double>& values, const GridSpec& g, double p, const CellSet* region = nullptr);

double max_discrete_gradient(const StrainField& s);

}  // namespace korn
