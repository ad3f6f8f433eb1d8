#pragma once

// Infinitesimal rigid motions a(x) = A x + b with A = [[0,-w],[w,0]],
// least-squares and trimmed fits, and empirical constants for the
// motion-vs-norm inequalities.

#include "korn/field.hpp"
#include "korn/geometry.hpp"

namespace korn {

struct RigidMotion {
  double omega = 0.0;
  Vec2 b{0.0, 0.0};
  Vec2 eval(const Vec2& x) const { return {b.x - omega * x.y, b.y + omega * x.x}; }
  // Frobenius norm of the induced skew matrix: |A|_F = sqrt(2)|omega|.
  double a_frobenius() const { return std::sqrt(2.0) * std::abs(omega); }
  RigidMotion operator+(const RigidMotion& o) const { return {omega + o.omega, {b.x + o.b.x, b.y + o.b.y}}; }
  RigidMotion operator-(const RigidMotion& o) const { return {omega - o.omega, {b.x - o.b.x, b.y - o.b.y}}; }
};

struct FitResult {
  RigidMotion motion;
  double residual_l2 = 0.0;  // L2(region) norm of u - a
  double condition = 0.0;    // condition estimate of the 3x3 normal system
  size_t cells = 0;
};

struct TrimmedFit {
  RigidMotion motion;
  CellSet inliers;
  double residual_lp = 0.0;
  double trimmed_area = 0.0;
  int sweeps = 0;
};

// Unique least-squares minimizer of ||u - (Ax+b)||_L2(region) via the 3x3
// normal equations; throws on regions smaller than 3 cells or rank-deficient.
FitResult fit_rigid(const DisplacementField& u, const CellSet& region);

// Same fit over all cells whose center lies in `window` (no mask allocation).
// Returns false when fewer than 3 cells or rank-deficient.
bool fit_rigid_window(const DisplacementField& u, const Box& window, FitResult& out);

// Iteratively discards worst-residual cells (10% of the remaining budget per
// sweep) until the budget is exhausted or the residual stagnates (<1%).
TrimmedFit fit_rigid_trimmed(const DisplacementField& u, const CellSet& region, double area_budget, double p = 2.0);

struct BoundCheck {
  double lhs = 0.0;       // |A|_F
  double rhs_core = 0.0;  // |E|^(-1/2-1/q) ||a||_Lq(E)
  double ratio = 0.0;     // empirical constant
};

// |A| <= c |E|^(-1/2-1/q) ||a||_Lq(E): returns both sides and their ratio.
BoundCheck bound_check_A(const RigidMotion& a, const CellSet& region, double q);

// ||a||_Lq(Q) <= c (R^2/|E|)^(1/2+1/q) ||a||_Lq(E): empirical constant.
double extend_bound_check(const RigidMotion& a, const CellSet& small_region, const Square& big_square, double q);

}  // namespace korn
