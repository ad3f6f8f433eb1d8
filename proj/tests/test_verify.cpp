#include <doctest.h>

#include "korn/verify.hpp"

using namespace korn;

TEST_CASE("two-piece oracle: exact on two rigid halves, linear in a strain sweep") {
  RigidMotion left{0.3, {0.0, 0.1}}, right{-0.5, {0.2, 0.0}};
  SegmentSet J;
  J.add(Segment{{0.0, -1.0}, {0.0, 1.0}});
  auto make = [&](double eps) {
    return sample_analytic(
        [&](Vec2 x) {
          Vec2 v = (x.x < 0 ? left : right).eval(x);
          if (x.x < 0) v.x += eps * x.x;  // strain perturbation on one half
          return v;
        },
        J, 96, 1.0);
  };
  DisplacementField clean = make(0.0);
  int count = 0;
  std::vector<int> labels = fixtures::true_labels(clean, &count);
  REQUIRE(count == 2);
  TwoPieceOracle clean_fit = oracle_two_piece_fit(clean, labels, count);
  CHECK(clean_fit.residual == doctest::Approx(0.0).epsilon(1e-10));

  double r_prev = 0.0;
  std::vector<double> ratios;
  for (double eps : {1e-3, 1e-2, 1e-1}) {
    TwoPieceOracle f = oracle_two_piece_fit(make(eps), labels, count);
    CHECK(f.residual > r_prev);
    ratios.push_back(f.residual / eps);
    r_prev = f.residual;
  }
  CHECK(ratios[0] == doctest::Approx(ratios[2]).epsilon(0.05));  // residual scales linearly
}

TEST_CASE("iterate motions match the two-piece oracle on clean fixtures") {
  DisplacementField u = fixtures::piecewise_rigid(128, 1.0, 2, 3);
  int count = 0;
  std::vector<int> labels = fixtures::true_labels(u, &count);
  TwoPieceOracle orc = oracle_two_piece_fit(u, labels, count);
  PipelineConfig cfg;
  cfg.theta = 0.25;
  PiecewiseDecomposition d = decompose_pipeline(u, cfg);
  int matched = 0;
  for (const auto& pc : d.pieces) {
    if (pc.area < 0.1) continue;
    double best = 1e18;
    for (const auto& om : orc.motions)
      best = std::min(best, std::abs(om.omega - pc.motion.omega) + (om.b - pc.motion.b).norm());
    double scale = std::abs(pc.motion.omega) + pc.motion.b.norm() + 1e-12;
    CHECK(best / scale <= 1e-6);
    ++matched;
  }
  CHECK(matched == count);
}

TEST_CASE("level perimeter oracle") {
  GridSpec g(128, 0.5);  // unit square
  std::vector<double> vals(size_t(g.n) * g.n);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) vals[g.idx(ix, iy)] = g.cell_center(ix, iy).x + 0.5;  // ramp 0..1
  SegmentSet none;
  CHECK(oracle_level_perimeter(vals, g, none, 0.5) == doctest::Approx(1.0));
  CHECK(oracle_level_perimeter(vals, g, none, 2.0) == doctest::Approx(0.0));
}

TEST_CASE("discrete coarea identity for a smooth field") {
  GridSpec g(256, 1.0);
  std::vector<double> vals(size_t(g.n) * g.n);
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      Vec2 c = g.cell_center(ix, iy);
      vals[g.idx(ix, iy)] = c.x * c.x;
    }
  EdgeCuts cuts(g);
  SegmentSet none;
  double tv = 0.0;
  {
    // Riemann sum over levels of the level perimeter
    int K = 400;
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < K; ++k) {
      double t = lo + (hi - lo) * (k + 0.5) / K;
      tv += oracle_level_perimeter(vals, g, none, t) * (hi - lo) / K;
    }
  }
  double edge = 0.0;
  {
    EdgeCuts c2(g);
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix + 1 < g.n; ++ix) edge += std::abs(vals[g.idx(ix + 1, iy)] - vals[g.idx(ix, iy)]) * g.h();
  }
  CHECK(tv == doctest::Approx(edge).epsilon(0.05));
}

TEST_CASE("fit oracle equivalence at 1e-10") {
  for (unsigned long long seed : {1ull, 9ull}) {
    DisplacementField u = fixtures::crack_forest(96, 1.0, seed);
    CellSet all(u.grid, true);
    RigidMotion a = fit_rigid(u, all).motion;
    RigidMotion b = oracle_fit_quadrature(u, all);
    double uscale = 0.0;
    for (const auto& vv : u.u) uscale = std::max(uscale, vv.norm());
    double scale = std::max(std::abs(a.omega) + a.b.norm(), uscale) + 1e-12;
    CHECK((std::abs(a.omega - b.omega) + (a.b - b.b).norm()) / scale <= 1e-10);
  }
}

TEST_CASE("suite smoke run") {
  SuiteConfig sc;
  sc.n = 64;
  sc.pipeline.theta = 0.25;
  sc.crack_fixtures = 2;
  SuiteResult sr = run_suite(sc);
  for (const auto& f : sr.failures) MESSAGE(f);
  CHECK(sr.pass);
  CHECK(sr.fixtures_run > 0);
  CHECK(!sr.ledger.entries.empty());
}
