#pragma once

// Per-square trimmed rigid fits, the partition of unity subordinate to the
// covering, and the piecewise smooth approximation.

#include "korn/partition.hpp"
#include "korn/rigid.hpp"

namespace korn {

struct PartitionOfUnity {
  GridSpec grid;
  // per covering square: sparse weights over the cells of its Q'
  struct SquareWeights {
    int square = 0;
    int x0 = 0, y0 = 0, w = 0, h = 0;   // cell window
    std::vector<double> phi;            // w*h row-major
  };
  std::vector<SquareWeights> weights;
  CellSet covered;               // cells with positive total weight
  double max_grad_times_d = 0.0; // sup over squares of ||∇φ_Q||_inf * d(Q)
  double sum_error = 0.0;        // max |Σφ - 1| over covered cells
};

PartitionOfUnity build_pou(const WhitneyCovering& cov);

struct SquareFits {
  // motion per covering square (index-aligned with cov.squares)
  std::vector<RigidMotion> motions;
  std::vector<uint8_t> fitted;       // square got a direct fit
  std::vector<double> residuals;     // trimmed-fit residuals (L2)
  CellSet exceptional;               // union of per-square exceptional sets E_Q
  // one motion per Z component, from the boundary square with least residual
  std::vector<RigidMotion> z_motions;
  double budget_total = 0.0;
};

struct FitOptions {
  double p = 2.0;
  bool linf_guard = false;  // clamp a_Q to 0 when ||e(u)||_{L2(Q')} > ||u||_inf
};

SquareFits fit_per_square(const DisplacementField& u, const WhitneyCovering& cov, const FitOptions& opts = {});

struct SmoothApprox {
  DisplacementField ubar;   // no jumps attached
  CellSet exceptional;      // F = ∪ E_Q ∪ Z ∪ uncovered
  double f_area = 0.0;
  // ratio ledger (computed against the input field)
  double e_ubar_lp = 0.0;
  double e_u_l2 = 0.0;
  double grad_diff_lp = 0.0;  // ||∇ubar − ∇u||_Lp off F
  double val_diff_lp = 0.0;   // ||ubar − u||_Lp off F
};

SmoothApprox assemble_ubar(const DisplacementField& u, const WhitneyCovering& cov, const PartitionOfUnity& pou,
                           const SquareFits& fits, double p);

struct TraceCompare {
  double edge_integral = 0.0;    // ∫ |u-a1|^2 + |u-a2|^2 over the shared edge off Γ
  double gamma_excluded = 0.0;   // length of the excluded Γ part
  double motion_gap_sq = 0.0;    // edge integral of |a1-a2|^2 off Γ
  double edge_length = 0.0;
};

// Q1, Q2 must share an edge; integrates along the shared edge skipping cells
// within one cell of a jump segment.
TraceCompare trace_compare(const DisplacementField& u, const Square& q1, const Square& q2, const RigidMotion& a1,
                           const RigidMotion& a2);

}  // namespace korn
