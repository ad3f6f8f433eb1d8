#include "korn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace korn {

void LedgerEntry::record(double lhs_v, double rhs_v) {
  lhs = lhs_v;
  rhs_core = rhs_v;
  double c = rhs_v > 0 ? lhs_v / rhs_v : 0.0;
  constant = c;
  history.push_back(c);
  samples = int(history.size());
}

void ConstantLedger::record(const std::string& id, double lhs, double rhs_core) {
  entries[id].record(lhs, rhs_core);
}

void ConstantLedger::finalize() {
  for (auto& [id, e] : entries) {
    if (e.history.empty()) continue;
    std::vector<double> h = e.history;
    std::sort(h.begin(), h.end());
    e.max_c = h.back();
    e.p95_c = h[size_t(std::floor(0.95 * double(h.size() - 1)))];
  }
}

RigidMotion oracle_fit_quadrature(const DisplacementField& u, const CellSet& region) {
  const GridSpec& g = u.grid;
  long double Sx = 0, Sy = 0, Su1 = 0, Su2 = 0, S = 0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!region.test(ix, iy)) continue;
      Vec2 p = g.cell_center(ix, iy);
      const Vec2& v = u.at(ix, iy);
      S += 1;
      Sx += p.x;
      Sy += p.y;
      Su1 += v.x;
      Su2 += v.y;
    }
  long double xb = Sx / S, yb = Sy / S, u1b = Su1 / S, u2b = Su2 / S;
  long double num = 0, den = 0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      if (!region.test(ix, iy)) continue;
      Vec2 p = g.cell_center(ix, iy);
      const Vec2& v = u.at(ix, iy);
      long double xh = p.x - xb, yh = p.y - yb;
      num += xh * (v.y - u2b) - yh * (v.x - u1b);
      den += xh * xh + yh * yh;
    }
  RigidMotion m;
  m.omega = den > 0 ? double(num / den) : 0.0;
  m.b = {double(u1b + m.omega * yb), double(u2b - m.omega * xb)};
  return m;
}

TwoPieceOracle oracle_two_piece_fit(const DisplacementField& u, const std::vector<int>& labels, int label_count) {
  const GridSpec& g = u.grid;
  TwoPieceOracle out;
  out.motions.resize(label_count);
  for (int k = 0; k < label_count; ++k) {
    CellSet region(g);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix)
        if (labels[g.idx(ix, iy)] == k) region.set(ix, iy);
    if (region.count() >= 3) out.motions[k] = oracle_fit_quadrature(u, region);
  }
  double acc = 0.0, h2 = g.h() * g.h();
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      int k = labels[g.idx(ix, iy)];
      Vec2 r = u.at(ix, iy) - out.motions[k].eval(g.cell_center(ix, iy));
      acc += r.norm2() * h2;
    }
  out.residual = std::sqrt(acc);
  return out;
}

double oracle_level_perimeter(const std::vector<double>& values, const GridSpec& grid, const SegmentSet& jumps,
                              double t) {
  EdgeCuts cuts(grid);
  cuts.add_segments(jumps);
  double h = grid.h();
  double per = 0.0;
  for (int iy = 0; iy < grid.n; ++iy)
    for (int ix = 0; ix < grid.n; ++ix) {
      bool a = values[grid.idx(ix, iy)] > t;
      if (ix + 1 < grid.n && !cuts.hcut_at(ix, iy) && a != (values[grid.idx(ix + 1, iy)] > t)) per += h;
      if (iy + 1 < grid.n && !cuts.vcut_at(ix, iy) && a != (values[grid.idx(ix, iy + 1)] > t)) per += h;
    }
  return per;
}

double oracle_segment_measure_mc(const Box& box, const SegmentSet& segs, int samples_per_segment,
                                 unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double total = 0.0;
  for (const auto& s : segs.segments) {
    int inside = 0;
    for (int k = 0; k < samples_per_segment; ++k) {
      double t = U(rng);
      Vec2 p = s.a + (s.b - s.a) * t;
      if (p.x >= box.x0 && p.x <= box.x1 && p.y >= box.y0 && p.y <= box.y1) ++inside;
    }
    total += s.length() * double(inside) / double(samples_per_segment);
  }
  return total;
}

SuiteResult run_suite(const SuiteConfig& cfg) {
  SuiteResult out;
  auto fail = [&](const std::string& what) {
    out.pass = false;
    out.failures.push_back(what);
  };

  PipelineConfig pl = cfg.pipeline;
  int n = cfg.n;
  double mu = cfg.mu;
  double h = 2.0 * mu / n;

  auto run_decomposition = [&](const DisplacementField& u, const std::string& name) {
    PiecewiseDecomposition d = decompose_pipeline(u, pl);
    out.fixtures_run++;
    if (d.e_u_l2 > 1e-10) {
      out.ledger.record("korn_gradient_ratio_p", d.grad_v_lp, d.e_u_l2);
      out.ledger.record("korn_gradient_ratio_p_prime", d.grad_v_lp_prime, d.e_u_l2);
    }
    out.ledger.record("partition_boundary_vs_jump", d.boundary_length, d.jump_length + 8.0 * mu);
    out.ledger.record("exceptional_area_vs_jump", d.exceptional_area, mu * pl.theta * pl.theta * std::max(d.jump_length, 1e-12));
    // exact invariants
    for (int iy = 0; iy < u.grid.n; ++iy)
      for (int ix = 0; ix < u.grid.n; ++ix) {
        int i = u.grid.idx(ix, iy);
        Vec2 rec = d.pieces[d.labels[i]].motion.eval(u.grid.cell_center(ix, iy));
        Vec2 sum{rec.x + d.v[i].x, rec.y + d.v[i].y};
        if (std::abs(sum.x - u.u[i].x) > 1e-12 + 1e-9 * std::abs(u.u[i].x) ||
            std::abs(sum.y - u.u[i].y) > 1e-12 + 1e-9 * std::abs(u.u[i].y)) {
          fail(name + ": reconstruction identity violated");
          return d;
        }
      }
    return d;
  };

  // rigid fixtures: all constants zero, piecewise rigidity exact
  for (int k = 0; k < 2; ++k) {
    DisplacementField u = fixtures::rigid(n, mu, k == 0 ? 1.0 : -0.4, {0.3, -0.2});
    PiecewiseDecomposition d = run_decomposition(u, "rigid");
    StrainField su = strain(u);
    double mg = max_discrete_gradient(su);
    if (d.v_linf > 10.0 * h * mg + 1e-9) fail("rigid: |v| exceeds the discretization floor");
    if (d.main_piece_count != 1) fail("rigid: expected a single main piece");
  }

  // piecewise rigid fixtures
  for (int k = 2; k <= 4; ++k) {
    DisplacementField u = fixtures::piecewise_rigid(n, mu, k, cfg.seed + k);
    int true_count = 0;
    std::vector<int> tl = fixtures::true_labels(u, &true_count);
    PiecewiseDecomposition d = run_decomposition(u, "piecewise_rigid");
    StrainField su = strain(u);
    double mg = max_discrete_gradient(su);
    if (d.v_linf > 10.0 * h * mg) fail("piecewise_rigid: |v| exceeds the discretization floor");
    if (d.main_piece_count != true_count) {
      std::ostringstream os;
      os << "piecewise_rigid k=" << k << ": got " << d.main_piece_count << " main pieces, expected " << true_count;
      fail(os.str());
    }
    TwoPieceOracle orc = oracle_two_piece_fit(u, tl, true_count);
    out.ledger.record("piecewise_rigidity_floor", d.v_linf, h * std::max(mg, 1e-12));
    (void)orc;
  }

  // linear strains: the translation bands may split the square, but the
  // remainder stays within the certified Poincare bound
  for (int k = 0; k < 2; ++k) {
    Mat2 G = k == 0 ? Mat2{1, 0, 0, 0} : Mat2{0.3, 0.8, -0.2, -0.5};
    DisplacementField u = fixtures::linear(n, mu, G);
    PiecewiseDecomposition d = run_decomposition(u, "linear");
    if (d.main_piece_count < 1) fail("linear: no main piece");
    if (d.poincare_M > 0 && d.v_linf > 4.0 * d.poincare_M + 1e-9)
      fail("linear: |v| exceeded the band bound");
  }

  // crack forests
  for (int k = 0; k < cfg.crack_fixtures; ++k) {
    DisplacementField u = fixtures::crack_forest(n, mu, cfg.seed + 100 + k);
    run_decomposition(u, "crack_forest");
  }

  // coarea budget on the ramp and on random smooth fields
  {
    DisplacementField u = fixtures::ramp(n, mu);
    CoareaPartition cp = poincare_split(u, 2.0);
    if (!cp.budget_ok) fail("coarea: ramp budget violated");
    if (!cp.v_bound_ok) fail("coarea: ramp |v| bound violated");
    out.ledger.record("coarea_added_perimeter", cp.comps[0].added_perimeter, 2.0 * 2.0);
  }
  for (int k = 0; k < 4; ++k) {
    DisplacementField u = fixtures::crack_forest(n, mu, cfg.seed + 200 + k);
    double rho = 0.5 + 0.7 * k;
    CoareaPartition cp = poincare_split(u, rho);
    if (!cp.budget_ok) fail("coarea: budget violated on a crack forest");
    if (!cp.v_bound_ok) fail("coarea: |v| bound violated on a crack forest");
    for (const auto& c : cp.comps)
      if (c.tv > 0) out.ledger.record("coarea_added_perimeter", c.added_perimeter, 2.0 * rho);
  }

  // korn-poincare truncation on detached corners
  for (int k = 0; k < 4; ++k) {
    DisplacementField u = fixtures::detached_corner(n, mu, 0.1 * mu + 0.05 * mu * k, cfg.seed + 300 + k);
    TruncationResult tr = korn_poincare_small_jump(u, pl.q_kp);
    if (!tr.truncation_identity_ok) fail("kornpoincare: truncation identity violated");
    double jl = tr.jump_length;
    out.ledger.record("kp_exceptional_area", tr.e_area, jl * jl);
    out.ledger.record("kp_exceptional_perimeter", tr.e_perimeter, std::sqrt(jl));
    if (tr.e_u_l2 > 0)
      out.ledger.record("kp_linf_estimate", tr.u_minus_a_linf, std::pow(jl, -0.5) * tr.e_u_l2);
  }

  // fit oracle equivalence
  {
    DisplacementField u = fixtures::crack_forest(n, mu, cfg.seed + 777);
    CellSet all(u.grid, true);
    RigidMotion a = fit_rigid(u, all).motion;
    RigidMotion b = oracle_fit_quadrature(u, all);
    double uscale = 0.0;
    for (const auto& vv : u.u) uscale = std::max(uscale, vv.norm());
    double scale = std::max(std::abs(a.omega) + a.b.norm(), uscale / mu) + 1e-12;
    if (std::abs(a.omega - b.omega) + (a.b - b.b).norm() > 1e-10 * scale)
      fail("fit_rigid disagrees with the quadrature oracle");
  }

  out.ledger.finalize();
  // alarms: constants exceeding alarm_factor x median within an entry
  for (auto& [id, e] : out.ledger.entries) {
    if (e.history.size() < 4) continue;
    std::vector<double> hist = e.history;
    std::sort(hist.begin(), hist.end());
    double med = hist[hist.size() / 2];
    if (med > 0 && e.max_c > cfg.alarm_factor * med)
      out.alarms.push_back(id + ": max constant exceeds the alarm threshold");
  }
  return out;
}

}  // namespace korn
