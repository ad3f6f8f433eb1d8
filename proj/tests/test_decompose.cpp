#include <doctest.h>

#include "korn/decompose.hpp"
#include "korn/fixtures.hpp"
#include "korn/verify.hpp"

using namespace korn;

TEST_CASE("decompose_square: tiny jump goes type 2 with the global fit") {
  SegmentSet J;
  J.add(Segment{{-0.01, 0.0}, {0.01, 0.0}});
  RigidMotion m{0.8, {0.1, -0.3}};
  DisplacementField u = sample_analytic([&](Vec2 x) { return m.eval(x); }, J, 128, 1.0);
  PipelineConfig cfg;
  cfg.theta = 0.25;
  SquareDecomposition d = decompose_square(u, cfg);
  CHECK(!d.type1);
  CHECK(d.motion.omega == doctest::Approx(m.omega).epsilon(1e-9));
  CHECK(d.motion.b.x == doctest::Approx(m.b.x).epsilon(1e-9));
  CHECK(d.fit_residual <= 1e-9);
  CHECK(d.exceptional.area() <= 0.01);
}

TEST_CASE("decompose_square: chord split goes type 1 with per-side motions") {
  RigidMotion left{0.5, {0.0, 0.3}}, right{-0.7, {0.4, -0.1}};
  SegmentSet J;
  J.add(Segment{{0.015, -1.0}, {0.015, 1.0}});
  DisplacementField u = sample_analytic([&](Vec2 x) { return (x.x < 0.015 ? left : right).eval(x); }, J, 128, 1.0);
  PipelineConfig cfg;
  cfg.theta = 0.25;
  SquareDecomposition d = decompose_square(u, cfg);
  REQUIRE(d.type1);
  // against the per-side oracle: each big piece's motion matches one side
  int true_count = 0;
  std::vector<int> tl = fixtures::true_labels(u, &true_count);
  TwoPieceOracle orc = oracle_two_piece_fit(u, tl, true_count);
  const GridSpec& g = u.grid;
  std::vector<int> piece_cells(d.piece_count, 0);
  for (int i = 0; i < g.n * g.n; ++i) piece_cells[d.labels[i]]++;
  int matched = 0;
  for (int k = 0; k < d.piece_count; ++k) {
    if (piece_cells[k] * g.h() * g.h() < 0.4) continue;
    double best = 1e9;
    for (const auto& om : orc.motions)
      best = std::min(best, std::abs(om.omega - d.piece_motions[k].omega));
    CHECK(best <= 1e-6);
    ++matched;
  }
  CHECK(matched == 2);
  // exceptional area against the mu theta^2 H1 scale (measured, loose factor)
  CHECK(d.exceptional.area() <= 10.0 * 1.0 * cfg.theta * cfg.theta * d.jump_len + 0.3);
}

TEST_CASE("iterate: piecewise rigidity is exact") {
  DisplacementField u = fixtures::piecewise_rigid(128, 1.0, 3, 23);
  PipelineConfig cfg;
  cfg.theta = 0.25;
  PiecewiseDecomposition d = iterate(u, cfg);
  int expected = 0;
  fixtures::true_labels(u, &expected);
  CHECK(d.main_piece_count == expected);
  StrainField su = strain(u);
  CHECK(d.v_linf <= 10.0 * u.grid.h() * max_discrete_gradient(su));
  // reconstruction is cell-exact
  for (int iy = 0; iy < u.grid.n; ++iy)
    for (int ix = 0; ix < u.grid.n; ++ix) {
      int i = u.grid.idx(ix, iy);
      Vec2 rec = d.pieces[d.labels[i]].motion.eval(u.grid.cell_center(ix, iy));
      CHECK(rec.x + d.v[i].x == doctest::Approx(u.u[i].x).epsilon(1e-12));
    }
}

TEST_CASE("iterate: rigid field gives one piece with zero remainder") {
  DisplacementField u = fixtures::rigid(128, 1.0, 0.45, {-0.2, 0.3});
  PipelineConfig cfg;
  cfg.theta = 0.25;
  PiecewiseDecomposition d = iterate(u, cfg);
  CHECK(d.main_piece_count == 1);
  CHECK(d.v_linf <= 1e-10);
}

TEST_CASE("iterate is equivariant under adding a global rigid motion") {
  DisplacementField u = fixtures::piecewise_rigid(128, 1.0, 2, 31);
  RigidMotion a0{0.25, {0.4, -0.6}};
  DisplacementField shifted = u;
  for (int iy = 0; iy < u.grid.n; ++iy)
    for (int ix = 0; ix < u.grid.n; ++ix) {
      Vec2 av = a0.eval(u.grid.cell_center(ix, iy));
      shifted.at(ix, iy).x += av.x;
      shifted.at(ix, iy).y += av.y;
    }
  PipelineConfig cfg;
  cfg.theta = 0.25;
  PiecewiseDecomposition d1 = iterate(u, cfg);
  PiecewiseDecomposition d2 = iterate(shifted, cfg);
  CHECK(d1.main_piece_count == d2.main_piece_count);
  CHECK(d2.v_linf <= d1.v_linf + 1e-9);
}

TEST_CASE("coarea split of the offset ramp matches the closed form") {
  // values span just under 2M with slack at both band ends: two strips, one
  // cut of length exactly 2*mu, |v| <= 2M
  DisplacementField u = sample_analytic([](Vec2 x) { return Vec2{x.x + 0.26, 0.0}; }, {}, 128, 0.5);
  CoareaPartition cp = poincare_split(u, 2.0);
  CHECK(cp.piece_count == 2);
  CHECK(cp.comps[0].added_perimeter == doctest::Approx(2.0));  // both-sides convention
  CHECK(cp.comps[0].added_perimeter / 2.0 == doctest::Approx(1.0));
  CHECK(cp.budget_ok);
  CHECK(cp.v_bound_ok);
  CHECK(cp.v_linf <= 2.0 * cp.comps[0].M + 1e-12);
  CHECK(cp.v_linf <= 1.0);
}

TEST_CASE("coarea split: constant field is a single piece") {
  DisplacementField u = fixtures::rigid(64, 1.0, 0.0, {0.7, -0.2});
  CoareaPartition cp = poincare_split(u, 1.0);
  CHECK(cp.piece_count == 1);
  CHECK(cp.v_linf <= 1e-12);
}

TEST_CASE("coarea budget holds exactly on arbitrary inputs") {
  for (unsigned long long seed = 0; seed < 5; ++seed) {
    DisplacementField u = fixtures::crack_forest(96, 1.0, seed);
    double rho = 0.4 + 0.5 * double(seed);
    CoareaPartition cp = poincare_split(u, rho);
    CHECK(cp.budget_ok);
    CHECK(cp.v_bound_ok);
    for (const auto& c : cp.comps)
      if (c.tv > 0) CHECK(c.added_perimeter <= 2.0 * rho + 1e-9);
  }
}

TEST_CASE("korn-poincare truncation arithmetic and shapes") {
  // H1(J) = 0.04 and ||e(u)||_2 = 0.2 give M = 1.0
  SegmentSet J;
  J.add(Segment{{-0.02, 0.0}, {0.02, 0.0}});
  double alpha = 0.1;  // e11 = alpha over area 4 -> ||e||_2 = 2 alpha = 0.2
  DisplacementField u = sample_analytic([&](Vec2 x) { return Vec2{alpha * x.x, 0.0}; }, J, 128, 1.0);
  TruncationResult tr = korn_poincare_small_jump(u, 4.0);
  CHECK(tr.jump_length == doctest::Approx(0.04));
  CHECK(tr.e_u_l2 == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(tr.M == doctest::Approx(1.0).epsilon(1e-6));
  for (double t : tr.levels) {
    CHECK(t > tr.M);
    CHECK(t < 2.0 * tr.M);
  }
  CHECK(tr.truncation_identity_ok);

  // rigid: E empty, norms zero
  DisplacementField r = fixtures::rigid(64, 1.0, 0.5, {0.1, 0.1});
  SegmentSet smallJ;
  smallJ.add(Segment{{-0.05, 0.3}, {0.05, 0.3}});
  DisplacementField r2 = sample_analytic([](Vec2 x) { return RigidMotion{0.5, {0.1, 0.1}}.eval(x); }, smallJ, 64, 1.0);
  TruncationResult tr2 = korn_poincare_small_jump(r2, 4.0);
  CHECK(tr2.e_area == doctest::Approx(0.0));
  CHECK(tr2.u_minus_a_linf <= 1e-9);

  // a detached corner with a wild motion lands in E
  DisplacementField c = fixtures::detached_corner(128, 1.0, 0.2, 3);
  TruncationResult tr3 = korn_poincare_small_jump(c, 4.0);
  CHECK(tr3.e_area > 0.0);
  CHECK(tr3.e_area <= 20.0 * tr3.jump_length * tr3.jump_length);
  // the corner region is covered by E
  const GridSpec& g = c.grid;
  int corner_cells = 0, covered = 0;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      Vec2 p = g.cell_center(ix, iy);
      if (p.x + p.y > 2.0 - 0.2 / std::sqrt(2.0)) {
        ++corner_cells;
        if (tr3.E.test(ix, iy)) ++covered;
      }
    }
  REQUIRE(corner_cells > 0);
  CHECK(double(covered) / corner_cells > 0.8);
}

TEST_CASE("regularized pipeline recovers pieces on dense inputs") {
  DisplacementField u = fixtures::piecewise_rigid(256, 1.0, 5, 16);
  PipelineConfig cfg;
  cfg.theta = 0.5;  // aggressive theta forces the density sweep on some seeds
  RegularizeResult reg;
  PiecewiseDecomposition d = decompose_pipeline(u, cfg, &reg);
  int expected = 0;
  fixtures::true_labels(u, &expected);
  CHECK(d.main_piece_count == expected);
  StrainField su = strain(u);
  CHECK(d.v_linf <= 10.0 * u.grid.h() * max_discrete_gradient(su));
}

TEST_CASE("monotone exceptional set history") {
  DisplacementField u = fixtures::piecewise_rigid(128, 1.0, 4, 8);
  PipelineConfig cfg;
  cfg.theta = 0.25;
  PiecewiseDecomposition d = iterate(u, cfg);
  for (size_t k = 1; k < d.e_area_history.size(); ++k) CHECK(d.e_area_history[k] <= d.e_area_history[k - 1] + 1e-12);
}
