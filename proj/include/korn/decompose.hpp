#pragma once

// Top-level pipelines: per-square decomposition, the mesoscale iteration
// producing the piecewise decomposition, the coarea-based piecewise Poincare
// split, and the small-jump Korn-Poincare truncation.

#include <optional>

#include "korn/smoothing.hpp"

namespace korn {

struct pipeline_error : std::runtime_error {
  std::string ledger;
  pipeline_error(const std::string& w, std::string led) : std::runtime_error(w), ledger(std::move(led)) {}
};

struct PipelineConfig {
  double theta = 0.25;
  double p = 1.5;
  double q_kp = 4.0;             // Korn-Poincare exponent (2d/(d-1) for d=2)
  double energy_exponent = 2.0;  // energy norm exponent; != 2 switches r
  std::optional<double> r_override;
  double epsilon_rel = 1e-3;     // relative to |Q_mu|
  int max_iters = 12;
  double rho = 0.0;              // poincare rho; 0 = H1(J) + H1(∂Q)
  unsigned long long seed = 0;
  bool linf_guard = false;
  double john_rho_target = 8.0;
  double john_eps_area_rel = 4e-3;

  double r() const {
    if (r_override) return *r_override;
    double q = energy_exponent;
    if (q != 2.0) return (q - p) / (6.0 * q * q);
    return (2.0 - p) / 24.0;
  }
  double p_prime() const { return 1.0 + p / 2.0; }
  double lambda() const { return (1.0 - r()) * (2.0 - p) / (3.0 * p + 2.0); }
};

// ---- per-square decomposition -------------------------------------------------

struct SquareDecomposition {
  bool type1 = false;
  GridSpec grid;  // local grid of the square
  // type 2 data
  RigidMotion motion;
  double fit_residual = 0.0;
  double trace_gamma_len = 0.0;
  bool jump_free = false;
  // type 1 data
  std::vector<int> labels;  // per local cell
  int piece_count = 0;
  std::vector<RigidMotion> piece_motions;
  std::vector<uint8_t> piece_is_z;
  std::vector<Square> covering;  // local coordinates
  std::vector<double> covering_residuals;
  CellSet exceptional;  // E_u, local
  CellSet rest;         // R_u, local
  CellSet uncovered;    // grid-floor remainder, local
  double s_u_len = 0.0;
  double boundary_len = 0.0;
  double jump_len = 0.0;
  GenerationWindow window;
  bool truncated = false;
};

SquareDecomposition decompose_square(const DisplacementField& u, const PipelineConfig& cfg);

// ---- piecewise decomposition ---------------------------------------------------

struct PiecewiseDecomposition {
  GridSpec grid;
  std::vector<int> labels;
  struct Piece {
    RigidMotion motion;
    int cells = 0;
    double area = 0.0;
    bool is_z = false;
    bool is_rest = false;
    bool absorbed = false;
  };
  std::vector<Piece> pieces;
  std::vector<Vec2> v;  // u - a_label, cell-exact

  // ledger
  double jump_length = 0.0;
  double boundary_length = 0.0;  // sum of H1(∂*P_j) incl. the domain boundary
  double boundary_ratio = 0.0;   // vs H1(J) + H1(∂Q)
  double v_linf = 0.0;
  double grad_v_lp = 0.0;
  double grad_v_lp_prime = 0.0;
  double e_u_l2 = 0.0;
  double korn_ratio = 0.0;
  double exceptional_area = 0.0;
  double rest_area = 0.0;
  int iterations = 0;
  std::vector<double> e_area_history;
  bool truncated_generations = false;
  int main_piece_count = 0;  // pieces with area >= 4 h^2
  double poincare_rho = 0.0;
  double poincare_M = 0.0;
  double epsilon = 0.0;
  int merged_pieces = 0;
  GenerationWindow window;     // root generation window
  CellSet exceptional_cells;   // exceptional set at the final iteration
};

PiecewiseDecomposition iterate(const DisplacementField& u, const PipelineConfig& cfg);

// regularize (when needed) + iterate per removed stage, merged into one result
PiecewiseDecomposition decompose_pipeline(const DisplacementField& u, const PipelineConfig& cfg,
                                          RegularizeResult* reg_out = nullptr);

// ---- piecewise Poincare (coarea) ----------------------------------------------

struct CoareaComponent {
  double M = 0.0;
  double tv = 0.0;               // anisotropic discrete total variation off J
  double added_perimeter = 0.0;  // Σ H1((∂*E_i) \ J)
  std::vector<double> levels;    // strictly increasing chosen levels t_i
  int band_lo = 0;               // band index of levels.front()
};

struct CoareaPartition {
  GridSpec grid;
  int m = 0;  // number of scalar components
  std::vector<CoareaComponent> comps;
  std::vector<int> labels;  // piece id per cell (band combination)
  int piece_count = 0;
  std::vector<std::vector<double>> translations;  // per piece, m values
  double v_linf = 0.0;
  bool single_piece = false;  // zero-gradient input
  bool budget_ok = true;      // added perimeter <= 2 rho per component
  bool v_bound_ok = true;     // |v| <= 2M per component
};

CoareaPartition poincare_split(const DisplacementField& u, double rho);
CoareaPartition poincare_split_scalar(const std::vector<double>& values, const GridSpec& grid,
                                      const SegmentSet& jumps, double rho);

// ---- Korn-Poincare truncation ---------------------------------------------------

struct TruncationResult {
  RigidMotion motion;
  CellSet E;
  double M = 0.0;
  std::vector<double> levels;  // t_i in (M, 2M) per component
  double u_minus_a_lq = 0.0;   // over Q \ E
  double u_minus_a_linf = 0.0;
  double e_area = 0.0;
  double e_perimeter = 0.0;  // H1(∂*E ∩ Q)
  double jump_length = 0.0;
  double e_u_l2 = 0.0;
  bool degenerate = false;   // H1(J) = 0
  bool truncation_identity_ok = true;  // v' = v on Q \ E
};

TruncationResult korn_poincare_small_jump(const DisplacementField& u, double q_exponent = 4.0);

// discrete anisotropic L1 gradient norm off the jump set (edge TV)
double edge_tv(const std::vector<double>& values, const GridSpec& grid, const EdgeCuts& cuts);

// Lp norm of the label-aware gradient of v = u - piecewise motion (stencils
// masked across jumps and piece boundaries)
double decomposition_gradient_norm(const DisplacementField& u, const PiecewiseDecomposition& d, double p);

}  // namespace korn
