// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "korn/decompose.hpp"
#include "korn/fixtures.hpp"
#include "korn/partition.hpp"
#include "korn/verify.hpp"

using namespace korn;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %d. %s — %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---- 1. piecewise rigidity ---------------------------------------------------

void criterion_piecewise_rigidity() {
  const int n = 256;
  const double mu = 1.0;
  PipelineConfig cfg;
  cfg.theta = 0.25;
  cfg.p = 1.5;
  bool pass = true;
  double worst_time = 0.0, worst_v_ratio = 0.0;
  std::string first_fail;
  for (unsigned long long seed = 0; seed < 20; ++seed) {
    int k = 2 + int(seed % 5);
    auto t0 = Clock::now();
    DisplacementField u = fixtures::piecewise_rigid(n, mu, k, seed);
    int expected = 0;
    fixtures::true_labels(u, &expected);
    PiecewiseDecomposition d = decompose_pipeline(u, cfg);
    double dt = elapsed(t0);
    worst_time = std::max(worst_time, dt);
    StrainField su = strain(u);
    double bound = 10.0 * u.grid.h() * max_discrete_gradient(su);
    worst_v_ratio = std::max(worst_v_ratio, d.v_linf / bound);
    bool ok = d.main_piece_count == expected && d.v_linf <= bound && dt <= 30.0;
    if (!ok && first_fail.empty())
      first_fail = fmt("seed %llu: pieces %d/%d, |v|=%.2e vs %.2e, %.1fs", seed, d.main_piece_count, expected,
                       d.v_linf, bound, dt);
    pass = pass && ok;
  }
  report(1, "piecewise rigidity (20 fixtures, k<=6, n=256)", pass,
         pass ? fmt("all piece counts exact; worst |v|/bound %.2e; slowest fixture %.1fs", worst_v_ratio, worst_time)
              : first_fail);
}

// ---- 2. whitney covering exact invariants --------------------------------------

void criterion_whitney_invariants() {
  bool pass = true;
  int coverings = 0, max_overlap = 0;
  std::string detail;
  auto check_one = [&](const SegmentSet& J, int n, double theta) {
    GridSpec grid(n, 1.0);
    DyadicLayout layout(1.0, theta);
    GenerationWindow win = compute_window(grid, theta);
    if (!win.valid) return;
    SegmentSet jstar = auxiliary_jump(J, 1.0, theta, win.j0);
    BadSquareIndex index = classify_bad(jstar, layout, win);
    AuxPartition aux = build_aux_partition(index, J, grid);
    try {
      WhitneyCovering cov = build_whitney(aux, index);
      ++coverings;
      max_overlap = std::max(max_overlap, cov.checks.max_overlap);
      if (cov.checks.neighbor_violations != 0 || cov.checks.overlap_violations != 0) {
        pass = false;
        detail = fmt("violations: neighbor %d, overlap %d", cov.checks.neighbor_violations,
                     cov.checks.overlap_violations);
      }
    } catch (const std::exception& e) {
      pass = false;
      detail = e.what();
    }
  };
  for (unsigned long long seed = 0; seed < 4; ++seed) {
    DisplacementField u = fixtures::piecewise_rigid(256, 1.0, 2 + int(seed % 5), seed);
    check_one(u.jumps, 256, 0.25);
  }
  for (unsigned long long seed = 0; seed < 4; ++seed) {
    DisplacementField u = fixtures::crack_forest(256, 1.0, seed);
    check_one(u.jumps, 256, 0.25);
    check_one(u.jumps, 256, 0.5);
  }
  {
    DisplacementField u = fixtures::rotating_balls(256, 1.0, 4);
    check_one(u.jumps, 256, 0.25);
  }
  report(2, "whitney covering invariants (gap<=1, overlap<=12, exhaustive)", pass,
         pass ? fmt("%d coverings, zero violations, max overlap %d", coverings, max_overlap) : detail);
}

// ---- 3. coarea budget ----------------------------------------------------------

void criterion_coarea_budget() {
  bool pass = true;
  std::string detail;
  // the ramp fixture with the exemplar numbers: one interior cut of length 1
  {
    DisplacementField u = sample_analytic([](Vec2 x) { return Vec2{x.x + 0.26, 0.0}; }, {}, 128, 0.5);
    CoareaPartition cp = poincare_split(u, 2.0);
    bool ok = cp.budget_ok && cp.v_bound_ok && cp.piece_count == 2 &&
              std::abs(cp.comps[0].added_perimeter / 2.0 - 1.0) < 1e-9 && cp.v_linf <= 1.0;
    if (!ok) {
      pass = false;
      detail = fmt("ramp: pieces %d, interface %.3f, |v| %.3f", cp.piece_count, cp.comps[0].added_perimeter / 2.0,
                   cp.v_linf);
    }
  }
  int checked = 0;
  for (unsigned long long seed = 0; seed < 8 && pass; ++seed) {
    DisplacementField u = seed % 2 ? fixtures::crack_forest(128, 1.0, seed)
                                   : fixtures::piecewise_rigid(128, 1.0, 2 + int(seed % 5), seed);
    double rho = 0.5 + 0.45 * double(seed);
    CoareaPartition cp = poincare_split(u, rho);
    ++checked;
    for (const auto& c : cp.comps)
      if (c.tv > 0 && c.added_perimeter > 2.0 * rho + 1e-9) {
        pass = false;
        detail = fmt("seed %llu: added %.4f > 2rho %.4f", seed, c.added_perimeter, 2.0 * rho);
      }
    if (!cp.v_bound_ok) {
      pass = false;
      detail = fmt("seed %llu: |v| bound violated", seed);
    }
  }
  report(3, "coarea budget (perimeter <= 2 rho, |v| <= 2M, exact)", pass,
         pass ? fmt("ramp exemplar exact; %d random fields certified", checked) : detail);
}

// ---- 4. korn-poincare shapes ----------------------------------------------------

void criterion_kornpoincare_shapes() {
  bool pass = true;
  std::string detail;
  std::vector<double> c_area_by_n, c_linf_by_n;
  for (int n : {128, 256, 512}) {
    double c_area = 0.0, c_linf = 0.0;
    for (int f = 0; f < 4; ++f) {
      double len = (0.1 + 0.05 * f) * 1.0;
      DisplacementField u = fixtures::detached_corner(n, 1.0, len, 100 + f);
      TruncationResult tr = korn_poincare_small_jump(u, 4.0);
      if (tr.jump_length <= 0 || tr.e_u_l2 <= 0) continue;
      c_area = std::max(c_area, tr.e_area / (tr.jump_length * tr.jump_length));
      c_linf = std::max(c_linf, tr.u_minus_a_linf * std::sqrt(tr.jump_length) / tr.e_u_l2);
      if (!tr.truncation_identity_ok) pass = false;
    }
    c_area_by_n.push_back(c_area);
    c_linf_by_n.push_back(c_linf);
  }
  auto stable = [](const std::vector<double>& v) {
    double lo = *std::min_element(v.begin(), v.end());
    double hi = *std::max_element(v.begin(), v.end());
    return lo > 0 ? hi / lo : 1.0;
  };
  double drift_area = stable(c_area_by_n), drift_linf = stable(c_linf_by_n);
  if (drift_area > 2.0 || drift_linf > 2.0) pass = false;
  report(4, "korn-poincare shapes (corner corpus, n in {128,256,512})", pass,
         fmt("C_area {%.3f, %.3f, %.3f} drift %.2fx; C_linf {%.2f, %.2f, %.2f} drift %.2fx", c_area_by_n[0],
             c_area_by_n[1], c_area_by_n[2], drift_area, c_linf_by_n[0], c_linf_by_n[1], c_linf_by_n[2], drift_linf) +
             (detail.empty() ? "" : "; " + detail));
}

// ---- 5. korn ratio stability ------------------------------------------------------

void criterion_korn_ratio_stability() {
  const int n = 256;
  PipelineConfig cfg;
  cfg.theta = 0.25;
  cfg.p = 1.5;
  std::vector<double> r1, r15, bratio;
  bool pass = true;
  std::string detail;
  for (unsigned long long seed = 0; seed < 50; ++seed) {
    DisplacementField u = fixtures::crack_forest(n, 1.0, seed);
    PiecewiseDecomposition d = decompose_pipeline(u, cfg);
    if (d.e_u_l2 <= 1e-12) continue;
    double g1 = decomposition_gradient_norm(u, d, 1.0);
    r1.push_back(g1 / d.e_u_l2);
    r15.push_back(d.grad_v_lp / d.e_u_l2);
    bratio.push_back(d.boundary_ratio);
  }
  auto check_family = [&](std::vector<double> v, const char* name, double& med_out, double& max_out) {
    std::sort(v.begin(), v.end());
    double med = v[v.size() / 2];
    double mx = v.back();
    med_out = med;
    max_out = mx;
    if (med > 0 && mx > 10.0 * med) {
      pass = false;
      detail += fmt("%s: max %.3f > 10x median %.3f; ", name, mx, med);
    }
  };
  double m1, x1, m15, x15, mb, xb;
  check_family(r1, "p=1", m1, x1);
  check_family(r15, "p=1.5", m15, x15);
  check_family(bratio, "boundary", mb, xb);
  report(5, "korn ratio stability (50 crack forests, p in {1,1.5})", pass,
         pass ? fmt("p=1: med %.2f max %.2f; p=1.5: med %.2f max %.2f; boundary: med %.2f max %.2f", m1, x1, m15,
                    x15, mb, xb)
              : detail);
}

// ---- 6. rotating balls embedding failure -------------------------------------------

void criterion_rotating_balls() {
  const int n = 512;
  PipelineConfig cfg;
  cfg.theta = 0.25;
  cfg.p = 1.5;
  std::vector<double> grad_u, grad_v;
  bool pass = true;
  std::string detail;
  for (int k : {2, 4, 6}) {
    DisplacementField u = fixtures::rotating_balls(n, 1.0, k);
    StrainField su = strain(u);
    LpResult gu = lp_norm_grad(su, 1.5, nullptr, false);
    PiecewiseDecomposition d = decompose_pipeline(u, cfg);
    grad_u.push_back(gu.value);
    grad_v.push_back(d.grad_v_lp);
    if (d.main_piece_count != k + 1) {
      pass = false;
      detail += fmt("k=%d: %d pieces; ", k, d.main_piece_count);
    }
  }
  if (!(grad_u[0] < grad_u[1] && grad_u[1] < grad_u[2])) {
    pass = false;
    detail += "grad(u) not monotone; ";
  }
  double floor_ref = std::max(grad_v[0], 1e-12);
  if (grad_v[1] > 2.0 * floor_ref + 1e-12 || grad_v[2] > 2.0 * floor_ref + 1e-12) {
    pass = false;
    detail += fmt("grad(v) grew: {%.2e, %.2e, %.2e}; ", grad_v[0], grad_v[1], grad_v[2]);
  }
  report(6, "rotating balls (grad u grows, grad v stays flat, n=512)", pass,
         pass ? fmt("grad u {%.3f, %.3f, %.3f}; grad v {%.1e, %.1e, %.1e}", grad_u[0], grad_u[1], grad_u[2],
                    grad_v[0], grad_v[1], grad_v[2])
              : detail);
}

// ---- 7. oracle equivalence ------------------------------------------------------------

void criterion_oracle_equivalence() {
  bool pass = true;
  std::string detail;
  PipelineConfig cfg;
  cfg.theta = 0.25;
  double worst_motion = 0.0, worst_fit = 0.0;
  for (unsigned long long seed : {2ull, 12ull, 31ull}) {
    DisplacementField u = fixtures::piecewise_rigid(256, 1.0, 2 + int(seed % 4), seed);
    int count = 0;
    std::vector<int> labels = fixtures::true_labels(u, &count);
    TwoPieceOracle orc = oracle_two_piece_fit(u, labels, count);
    PiecewiseDecomposition d = decompose_pipeline(u, cfg);
    int matched = 0;
    for (const auto& pc : d.pieces) {
      if (pc.area < 0.05) continue;
      double best = 1e18;
      for (const auto& om : orc.motions)
        best = std::min(best, std::abs(om.omega - pc.motion.omega) + (om.b - pc.motion.b).norm());
      double scale = std::abs(pc.motion.omega) + pc.motion.b.norm() + 1e-12;
      worst_motion = std::max(worst_motion, best / scale);
      if (best / scale > 1e-6) pass = false;
      ++matched;
    }
    if (matched != count) {
      pass = false;
      detail += fmt("seed %llu: matched %d of %d; ", seed, matched, count);
    }
  }
  for (unsigned long long seed : {4ull, 23ull}) {
    DisplacementField u = fixtures::crack_forest(192, 1.0, seed);
    CellSet all(u.grid, true);
    RigidMotion a = fit_rigid(u, all).motion;
    RigidMotion b = oracle_fit_quadrature(u, all);
    double uscale = 0.0;
    for (const auto& vv : u.u) uscale = std::max(uscale, vv.norm());
    double scale = std::max(std::abs(a.omega) + a.b.norm(), uscale) + 1e-12;
    double diff = (std::abs(a.omega - b.omega) + (a.b - b.b).norm()) / scale;
    worst_fit = std::max(worst_fit, diff);
    if (diff > 1e-10) {
      pass = false;
      detail += fmt("fit oracle gap %.2e; ", diff);
    }
  }
  report(7, "oracle equivalence (motions 1e-6, fits 1e-10)", pass,
         pass ? fmt("worst motion gap %.1e, worst fit gap %.1e", worst_motion, worst_fit) : detail);
}

// ---- 8. regularization postcondition ----------------------------------------------------

void criterion_regularization_postcondition() {
  bool pass = true;
  int regularized = 0, violations = 0;
  double worst = 0.0;
  std::string detail;
  // density violators: dense clusters at several scales plus aggressive theta
  std::vector<DisplacementField> corpus;
  corpus.push_back(fixtures::dense_cluster(256, 1.0, 0.25, 2, 3, 4));
  corpus.push_back(fixtures::dense_cluster(256, 1.0, 0.25, 1, 1, 2));
  for (unsigned long long seed = 0; seed < 6; ++seed) corpus.push_back(fixtures::piecewise_rigid(256, 1.0, 6, seed));
  for (unsigned long long seed = 0; seed < 6; ++seed) corpus.push_back(fixtures::crack_forest(256, 1.0, seed));
  for (auto& u : corpus) {
    for (double theta : {0.25, 0.5}) {
      RegularizeResult reg = regularize_jump_density(u, theta);
      if (!reg.violated) {
        DensityCheck dc = check_density_bound(u.jumps, u.grid, theta);
        worst = std::max(worst, dc.worst_ratio);
        if (dc.violations != 0) {
          pass = false;
          violations += dc.violations;
        }
        continue;
      }
      ++regularized;
      worst = std::max(worst, reg.post_density_worst);
      if (reg.post_density_violations != 0) {
        pass = false;
        violations += reg.post_density_violations;
        detail = fmt("%d residual violations, worst ratio %.3f", reg.post_density_violations,
                     reg.post_density_worst);
      }
    }
  }
  report(8, "regularization postcondition (density bound, exhaustive)", pass,
         pass ? fmt("%d fields regularized, zero violations, worst ratio %.3f", regularized, worst) : detail);
}

}  // namespace

int main() {
  auto t0 = Clock::now();
  std::printf("korn2d acceptance suite\n");
  criterion_piecewise_rigidity();
  criterion_whitney_invariants();
  criterion_coarea_budget();
  criterion_kornpoincare_shapes();
  criterion_korn_ratio_stability();
  criterion_rotating_balls();
  criterion_oracle_equivalence();
  criterion_regularization_postcondition();
  std::printf("%s (%d failed, %.0f s total)\n", failures == 0 ? "ALL CRITERIA PASSED" : "CRITERIA FAILED", failures,
              elapsed(t0));
  return failures == 0 ? 0 : 1;
}
