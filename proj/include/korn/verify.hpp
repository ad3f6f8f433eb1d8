#pragma once

// Independent oracles and the inequality/invariant harness.

#include <map>
#include <string>

#include "korn/fixtures.hpp"

namespace korn {

struct LedgerEntry {
  double lhs = 0.0;
  double rhs_core = 0.0;
  double constant = 0.0;  // lhs / rhs_core
  double max_c = 0.0;
  double p95_c = 0.0;
  int samples = 0;
  std::vector<double> history;
  void record(double lhs_v, double rhs_v);
};

struct ConstantLedger {
  std::map<std::string, LedgerEntry> entries;
  void record(const std::string& id, double lhs, double rhs_core);
  void finalize();
};

// ---- oracles (independent implementations) -----------------------------------

// Closed-form least squares rigid fit via centered moments; independent of the
// normal-equation path in fit_rigid.
RigidMotion oracle_fit_quadrature(const DisplacementField& u, const CellSet& region);

struct TwoPieceOracle {
  std::vector<RigidMotion> motions;  // per label
  double residual = 0.0;             // combined L2 residual
};
TwoPieceOracle oracle_two_piece_fit(const DisplacementField& u, const std::vector<int>& labels, int label_count);

// Perimeter of {values > t} excluding jump-crossing edges (edge count * h).
double oracle_level_perimeter(const std::vector<double>& values, const GridSpec& grid, const SegmentSet& jumps,
                              double t);

// Monte Carlo estimate of H1(segs ∩ box) by 1D sampling along each segment.
double oracle_segment_measure_mc(const Box& box, const SegmentSet& segs, int samples_per_segment,
                                 unsigned long long seed);

// ---- suite --------------------------------------------------------------------

struct SuiteConfig {
  int n = 128;
  double mu = 1.0;
  PipelineConfig pipeline;
  int crack_fixtures = 8;
  unsigned long long seed = 0;
  double alarm_factor = 10.0;  // alarm if a constant exceeds this multiple of the median
};

struct SuiteResult {
  bool pass = true;
  int fixtures_run = 0;
  std::vector<std::string> failures;
  std::vector<std::string> alarms;
  ConstantLedger ledger;
};

SuiteResult run_suite(const SuiteConfig& cfg);

}  // namespace korn
