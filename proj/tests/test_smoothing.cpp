#include <doctest.h>

#include "korn/fixtures.hpp"
#include "korn/smoothing.hpp"
#include "korn/verify.hpp"

using namespace korn;

namespace {

struct Setup {
  BadSquareIndex index;
  AuxPartition aux;
  WhitneyCovering cov;
};

Setup setup_for(const SegmentSet& J, int n, double theta, bool include_j0) {
  GridSpec grid(n, 1.0);
  DyadicLayout layout(1.0, theta);
  GenerationWindow win = compute_window(grid, theta);
  REQUIRE(win.valid);
  SegmentSet jstar = include_j0 ? auxiliary_jump(J, 1.0, theta, win.j0) : J;
  BadSquareIndex index = classify_bad(jstar, layout, win);
  AuxOptions opts;
  opts.include_j0 = include_j0;
  AuxPartition aux = build_aux_partition(index, J, grid, opts);
  WhitneyCovering cov = build_whitney(aux, index);
  return {std::move(index), std::move(aux), std::move(cov)};
}

}  // namespace

TEST_CASE("partition of unity sums to one with bounded gradients") {
  SegmentSet J;
  J.add(Segment{{0.01, -1.0}, {0.01, 1.0}});
  Setup s = setup_for(J, 128, 0.25, true);
  PartitionOfUnity pou = build_pou(s.cov);
  CHECK(pou.sum_error <= 1e-10);
  CHECK(pou.max_grad_times_d < 40.0);  // ||grad phi|| * d(Q) uniformly bounded
}

TEST_CASE("single-generation covering gives weight one on the interior") {
  SegmentSet none;
  Setup s = setup_for(none, 128, 0.25, false);
  PartitionOfUnity pou = build_pou(s.cov);
  CHECK(pou.sum_error <= 1e-12);
  // weights from one square alone are exactly one after renormalization
  const GridSpec& g = s.cov.grid;
  std::vector<double> total(size_t(g.n) * g.n, 0.0);
  for (const auto& sw : pou.weights)
    for (int dy = 0; dy < sw.h; ++dy)
      for (int dx = 0; dx < sw.w; ++dx) total[g.idx(sw.x0 + dx, sw.y0 + dy)] += sw.phi[size_t(dy) * sw.w + dx];
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (pou.covered.test(ix, iy)) CHECK(total[g.idx(ix, iy)] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("per-square fits on a globally rigid field all agree") {
  DisplacementField u = fixtures::rigid(128, 1.0, 0.9, {0.2, -0.4});
  Setup s = setup_for(u.jumps, 128, 0.25, false);
  SquareFits fits = fit_per_square(u, s.cov);
  CHECK(fits.exceptional.count() == 0);
  for (size_t k = 0; k < fits.motions.size(); ++k) {
    if (!fits.fitted[k]) continue;
    CHECK(fits.motions[k].omega == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(fits.motions[k].b.x == doctest::Approx(0.2).epsilon(1e-9));
  }
}

TEST_CASE("two rigid motions split by a chord fit side by side") {
  RigidMotion left{0.5, {0.0, 0.3}}, right{-0.7, {0.4, -0.1}};
  SegmentSet J;
  J.add(Segment{{0.015, -1.0}, {0.015, 1.0}});
  DisplacementField u =
      sample_analytic([&](Vec2 x) { return (x.x < 0.015 ? left : right).eval(x); }, J, 128, 1.0);
  Setup s = setup_for(J, 128, 0.25, true);
  SquareFits fits = fit_per_square(u, s.cov);
  int tested = 0;
  for (size_t k = 0; k < s.cov.squares.size(); ++k) {
    if (!fits.fitted[k]) continue;
    Box q1 = enlarged_q1(s.cov.squares[k]).box();
    if (q1.x1 < 0.0) {
      CHECK(fits.motions[k].omega == doctest::Approx(left.omega).epsilon(1e-7));
      ++tested;
    } else if (q1.x0 > 0.03) {
      CHECK(fits.motions[k].omega == doctest::Approx(right.omega).epsilon(1e-7));
      ++tested;
    }
  }
  CHECK(tested > 10);
}

TEST_CASE("smooth approximation reproduces a global rigid motion") {
  DisplacementField u = fixtures::rigid(128, 1.0, -0.35, {0.1, 0.6});
  Setup s = setup_for(u.jumps, 128, 0.25, false);
  PartitionOfUnity pou = build_pou(s.cov);
  SquareFits fits = fit_per_square(u, s.cov);
  SmoothApprox smooth = assemble_ubar(u, s.cov, pou, fits, 1.5);
  for (size_t i = 0; i < u.u.size(); ++i) {
    CHECK(smooth.ubar.u[i].x == doctest::Approx(u.u[i].x).epsilon(1e-10));
    CHECK(smooth.ubar.u[i].y == doctest::Approx(u.u[i].y).epsilon(1e-10));
  }
  // only the grid-floor frame strip can be exceptional for a rigid field
  const GridSpec& g = u.grid;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix)
      if (smooth.exceptional.test(ix, iy)) {
        int d = std::min(std::min(ix, g.n - 1 - ix), std::min(iy, g.n - 1 - iy));
        CHECK(d <= 8);
      }
}

TEST_CASE("approximation heals the crack for two rigid motions") {
  RigidMotion left{0.4, {0.0, 0.0}}, right{-0.4, {0.3, 0.0}};
  SegmentSet J;
  J.add(Segment{{0.015, -1.0}, {0.015, 1.0}});
  DisplacementField u = sample_analytic([&](Vec2 x) { return (x.x < 0.015 ? left : right).eval(x); }, J, 128, 1.0);
  Setup s = setup_for(J, 128, 0.25, true);
  PartitionOfUnity pou = build_pou(s.cov);
  SquareFits fits = fit_per_square(u, s.cov);
  SmoothApprox smooth = assemble_ubar(u, s.cov, pou, fits, 1.5);
  // exceptional set area controlled against mu theta^5-style scale (measured)
  CHECK(smooth.f_area < 1.0);
  // off F the gradients agree up to discretization
  CHECK(smooth.grad_diff_lp < 1e-6);
  CHECK(smooth.val_diff_lp < 1e-6);
  // ubar is finite and jump-free: its discrete gradient exists everywhere the
  // covering reaches (no masked cells off the uncovered region)
  StrainField sb = strain(smooth.ubar);
  for (int iy = 2; iy < 126; ++iy)
    for (int ix = 2; ix < 126; ++ix)
      if (!s.cov.uncovered.test(ix, iy)) CHECK(sb.valid[u.grid.idx(ix, iy)]);
}

TEST_CASE("trace comparison along a shared edge") {
  DisplacementField u = fixtures::rigid(128, 1.0, 0.8, {-0.2, 0.1});
  CellSet all(u.grid, true);
  RigidMotion fit = fit_rigid(u, all).motion;
  Square q1, q2;
  q1.center = {-0.25, 0.0};
  q1.halfside = 0.25;
  q2.center = {0.25, 0.0};
  q2.halfside = 0.25;
  TraceCompare tc = trace_compare(u, q1, q2, fit, fit);
  CHECK(tc.edge_integral == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(tc.edge_length == doctest::Approx(0.5));

  // constant offsets: closed form |gap|^2 * length
  DisplacementField zero = fixtures::rigid(128, 1.0, 0.0, {0, 0});
  RigidMotion a1{0.0, {0.3, 0.0}}, a2{0.0, {0.0, 0.0}};
  TraceCompare tc2 = trace_compare(zero, q1, q2, a1, a2);
  CHECK(tc2.edge_integral == doctest::Approx(0.09 * 0.5).epsilon(1e-9));
  CHECK(tc2.motion_gap_sq == doctest::Approx(0.09 * 0.5).epsilon(1e-9));

  Square far;
  far.center = {0.9, 0.9};
  far.halfside = 0.05;
  CHECK_THROWS_AS(trace_compare(u, q1, far, fit, fit), std::invalid_argument);
}

TEST_CASE("chained edges control the rotation gap") {
  // chain of 4 squares across the domain; gaps measured via trace_compare
  DisplacementField u = sample_analytic([](Vec2 x) { return Vec2{0.05 * x.x * x.x, 0.02 * x.y}; }, {}, 128, 1.0);
  double hs = 0.25;
  std::vector<Square> chain;
  for (int k = 0; k < 4; ++k) {
    Square q;
    q.center = {-0.75 + 0.5 * k, 0.0};
    q.halfside = hs;
    chain.push_back(q);
  }
  std::vector<RigidMotion> fits;
  for (const auto& q : chain) fits.push_back(fit_rigid(u, rasterize(u.grid, q)).motion);
  double chain_gap = 0.0;
  for (int k = 0; k + 1 < 4; ++k) {
    TraceCompare tc = trace_compare(u, chain[k], chain[k + 1], fits[k], fits[k + 1]);
    chain_gap += std::sqrt(tc.motion_gap_sq / std::max(tc.edge_length - tc.gamma_excluded, 1e-12));
  }
  double direct = std::abs(fits[0].omega - fits[3].omega);
  // the chained edge discrepancies dominate the end-to-end rotation gap scale
  CHECK(direct * 2.0 * hs <= 10.0 * (chain_gap + 1e-12));
}
