#pragma once

// Bad-square classification over the dyadic hierarchy, component analysis,
// union-boundary bounds and jump-density regularization.

#include "korn/field.hpp"
#include "korn/geometry.hpp"

namespace korn {

// Generation window used by the pipeline. The construction wants J0 at
// generation 7 and bad squares from generation 8 on; on a finite grid those
// scales may sit below the cell size, so the window is capped at the finest
// generation whose squares still span >= 2x2 cells and the caps are flagged.
struct GenerationWindow {
  int j0 = 1;      // generation of the auxiliary grid J0
  int i_min = 2;   // first bad-square generation (j0 + 1)
  int I = 2;       // final construction generation (<= I_fill)
  int I_fill = 2;  // finest generation with >= 2x2 cells per square
  bool valid = false;
  bool truncated = false;
};

GenerationWindow compute_window(const GridSpec& grid, double theta);

// J* = J united with the boundaries of all generation-j0 squares in Q_mu.
// The grid lines are emitted as full chords (2(m+1) segments).
SegmentSet auxiliary_jump(const SegmentSet& J, double mu, double theta, int j0_gen = 7);

struct BadSquareIndex {
  DyadicLayout layout;
  GenerationWindow window;
  SegmentSet jstar;
  double r = 1.0 / 48.0;  // isolated-component exponent
  // bad[i - window.i_min] is a lattice mask over generation-i squares
  std::vector<CellSet> bad;

  const CellSet& bad_mask(int gen) const { return bad.at(size_t(gen - window.i_min)); }
  bool is_bad(int gen, int ix, int iy) const { return bad_mask(gen).test(ix, iy); }
  GridSpec lattice(int gen) const { return GridSpec(layout.per_side(gen), layout.mu); }
};

// Threshold test H1(J* ∩ Q') >= theta^3 s_i per square per generation.
BadSquareIndex classify_bad(const SegmentSet& jstar, const DyadicLayout& layout, const GenerationWindow& window,
                            double r = 1.0 / 48.0);
bool is_bad_square(const Square& sq, const SegmentSet& jstar, double theta);

struct ComponentInfo {
  double diameter = 0.0;  // bbox diagonal, domain units
  double boundary_length = 0.0;
  bool isolated = false;
  Box bbox;
  int cells = 0;
};

struct ComponentSet {
  GridSpec lattice;  // generation-i lattice
  Components raw;    // labels over B^i = union of enlarged (5x) bad squares
  std::vector<ComponentInfo> info;
  CellSet bmask;     // B^i rasterized
};

// Connected components of B^i (8-connectivity), diameters, isolated flags.
ComponentSet components(const BadSquareIndex& index, int gen);

struct UnionBoundaryResult {
  double boundary_length = 0.0;  // H1 of the boundary of R = union of Q'''
  double jump_in_union = 0.0;    // H1(J* ∩ R)
  double ratio = 0.0;
  SegmentSet gamma;              // Γ_R from the greedy subfamily
  int components = 0;
  bool gamma_connected_per_component = true;
};

// selected[k] = {gen, squares at that generation}; generations ascending.
struct SelectedSquares {
  int gen = 0;
  std::vector<std::pair<int, int>> squares;
};
UnionBoundaryResult union_boundary_bound(const DyadicLayout& layout, const std::vector<SelectedSquares>& selected,
                                         const SegmentSet& jstar);

// ---- jump-density regularization -------------------------------------------

struct RemovedStage {
  int gen = 0;                                // generation of the removed squares
  std::vector<std::pair<int, int>> squares;   // lattice coords
  CellSet cells;                              // footprint on the field grid
  double boundary_length = 0.0;               // H1(∂R_j ∩ Q_mu)
};

struct RegularizeResult {
  bool violated = false;        // input failed the per-square density bound
  double theta = 0.25;
  int start_gen = 0;            // generation of R_0
  std::vector<RemovedStage> stages;  // stage 0 = R_0
  SegmentSet gamma_final;       // jump set of the final modified field
  double jump_length = 0.0;     // H1(J_u)
  double boundary_ledger = 0.0; // sum of H1(∂R_j)
  double ledger_ratio = 0.0;    // boundary_ledger / H1(J_u)
  // density check after regularization: worst H1(J ∩ Q) / (theta^-1 d(Q))
  double post_density_worst = 0.0;
  int post_density_violations = 0;
};

// Bottom-up sweep removing squares where the running jump+boundary set
// exceeds 16·t per square; returns the removal stages and the ledger.
RegularizeResult regularize_jump_density(const DisplacementField& u, double theta);

// Field at stage j: u zeroed on the closure of all removed squares up to j.
DisplacementField regularized_field(const DisplacementField& u, const RegularizeResult& reg, int stage);

// H1(J ∩ Q) <= theta^-1 d(Q) for every dyadic square, exhaustively over the
// generations resolvable on the grid. Returns worst ratio and violation count.
struct DensityCheck {
  double worst_ratio = 0.0;
  int violations = 0;
};
DensityCheck check_density_bound(const SegmentSet& J, const GridSpec& grid, double theta);

}  // namespace korn
