#pragma once

// Auxiliary simply connected partition, Whitney-type covering with isolated
// Z components, and John-constant controlled refinement.

#include <memory>

#include "korn/covering.hpp"

namespace korn {

struct PieceInfo {
  int id = 0;
  int cells = 0;
  double area = 0.0;
  Box bbox;
  bool simply_connected_strict = false;  // saturate(P) == P
  bool simply_connected = false;         // holes fully fenced by cuts count as fixed
};

struct AuxInternals;  // construction state shared with build_whitney

struct AuxPartition {
  GridSpec grid;
  DyadicLayout layout;
  std::vector<int> labels;  // piece id per cell
  int piece_count = 0;
  std::vector<PieceInfo> pieces;
  SegmentSet boundary_segments;  // the family S of cuts
  EdgeCuts cuts;
  // ledger
  double boundary_length = 0.0;  // H1 of S clipped to the domain
  double jump_length = 0.0;      // H1(J)
  double boundary_ratio = 0.0;   // boundary_length / H1(J)
  double connector_length = 0.0; // total length of added connecting segments
  std::shared_ptr<AuxInternals> internals;
};

struct AuxOptions {
  bool include_j0 = true;  // test mode: false drops the J0 grid from J*
};

AuxPartition build_aux_partition(const BadSquareIndex& index, const SegmentSet& J, const GridSpec& grid,
                                 const AuxOptions& opts = {});

// ---- Whitney covering -------------------------------------------------------

struct WhitneyChecks {
  bool coverage_ok = true;        // uncovered cells are only floor/jump-tube artifacts
  double uncovered_area = 0.0;
  int neighbor_violations = 0;    // generation gap > 1 between overlapping enlargements
  int overlap_violations = 0;     // some cell covered by more than 12 enlargements
  int max_overlap = 0;
  int jump_smallness_violations = 0;  // H1(J ∩ Q') > theta^2 s_i off Z
  int neighbor_jump_violations = 0;   // same bound near generation steps
  int fine_jump_violations = 0;       // fill squares meeting J
  bool z_structure_ok = true;         // X diam + Q' ∩ Z ⊂ X for boundary squares
  double z_area = 0.0;
};

struct ZComponent {
  int gen = 0;
  int id = 0;
  CellSet cells;         // on the field grid
  Box bbox;
  double diameter = 0.0;
  std::vector<int> boundary_squares;  // indices into WhitneyCovering::squares
};

struct WhitneyCovering {
  GridSpec grid;
  DyadicLayout layout;
  GenerationWindow window;
  std::vector<Square> squares;       // pairwise disjoint, tile the covered region
  std::vector<ZComponent> zcomps;
  CellSet zmask;                     // union of Z on the field grid
  CellSet uncovered;                 // grid-floor remainder (routed to exceptional)
  std::vector<int> cell_owner;       // covering square id per cell, -1 uncovered
  WhitneyChecks checks;
};

WhitneyCovering build_whitney(const AuxPartition& aux, const BadSquareIndex& index);

// ---- John domains -----------------------------------------------------------

struct JohnEstimate {
  Vec2 center;
  double rho = 0.0;
  std::vector<Vec2> witness_worst_path;  // cell centers along the worst path
  double diameter = 0.0;
  double area = 0.0;
};

// Distance-transform center plus a feasibility search for the smallest rho
// such that every cell connects to the center with arclength <= rho * dist
// to the boundary along the way. `cuts` (jump/partition cuts) count as
// boundary and block paths.
JohnEstimate john_constant(const CellSet& region, const EdgeCuts* cuts = nullptr);

// Single feasibility test at fixed rho (cheaper than the full estimate).
bool john_feasible(const CellSet& region, double rho, const EdgeCuts* cuts = nullptr, Vec2* worst_cell = nullptr);

struct JohnRefineResult {
  std::vector<int> labels;  // refined piece id per cell (-1 = rest set)
  int piece_count = 0;
  CellSet rest;             // pieces that failed to meet the target
  double added_boundary = 0.0;
  int splits = 0;
};

// Recursively bisect pieces whose John constant exceeds rho_target along the
// axis-aligned chord through the worst bottleneck; small failing pieces go to
// the rest set.
JohnRefineResult john_refine(const AuxPartition& aux, double rho_target, double eps_area);

}  // namespace korn
