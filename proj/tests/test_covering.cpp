#include <doctest.h>

#include <random>

#include "korn/covering.hpp"
#include "korn/fixtures.hpp"

using namespace korn;

TEST_CASE("auxiliary jump set: grid length and union growth") {
  // theta = 1/2, mu = 1, generation 7: 2^7 squares per side, full chords
  SegmentSet none;
  SegmentSet j0 = auxiliary_jump(none, 1.0, 0.5, 7);
  int m = 128;
  // combinatorial count: (m+1) lines per direction, each of length 2
  double expect = 2.0 * (m + 1) * 2.0;
  CHECK(j0.total_length() == doctest::Approx(expect));

  SegmentSet some;
  some.add(Segment{{-0.3, 0.1}, {0.4, 0.2}});
  SegmentSet jstar = auxiliary_jump(some, 1.0, 0.5, 3);
  CHECK(jstar.total_length() >= some.total_length());
  CHECK(jstar.total_length() == doctest::Approx(some.total_length() + 2.0 * 9 * 2.0));
}

TEST_CASE("bad square threshold") {
  // halfside 1, theta = 1/2: threshold = theta^3 * s = 0.125
  Square sq;
  sq.center = {0, 0};
  sq.halfside = 1.0;
  SegmentSet jump;
  jump.add(Segment{{-0.1, 0.0}, {0.1, 0.0}});  // length 0.2 inside Q'
  CHECK(is_bad_square(sq, jump, 0.5));
  SegmentSet empty;
  CHECK(!is_bad_square(sq, empty, 0.5));
  SegmentSet tiny;
  tiny.add(Segment{{-0.05, 0.0}, {0.05, 0.0}});  // length 0.1 < 0.125
  CHECK(!is_bad_square(sq, tiny, 0.5));
}

TEST_CASE("classification is monotone in the jump set") {
  GridSpec grid(128, 1.0);
  DyadicLayout layout(1.0, 0.5);
  GenerationWindow win = compute_window(grid, 0.5);
  REQUIRE(win.valid);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-0.9, 0.9);
  SegmentSet a;
  for (int i = 0; i < 6; ++i) a.add(Segment{{U(rng), U(rng)}, {U(rng), U(rng)}});
  SegmentSet b = a;
  for (int i = 0; i < 4; ++i) b.add(Segment{{U(rng), U(rng)}, {U(rng), U(rng)}});
  BadSquareIndex ia = classify_bad(a, layout, win);
  BadSquareIndex ib = classify_bad(b, layout, win);
  for (int gen = win.i_min; gen <= win.I_fill; ++gen) {
    const CellSet& ma = ia.bad_mask(gen);
    const CellSet& mb = ib.bad_mask(gen);
    for (size_t i = 0; i < ma.mask.size(); ++i)
      if (ma.mask[i]) CHECK(mb.mask[i]);
  }
}

namespace {

BadSquareIndex index_for(const SegmentSet& jstar, double theta, int n) {
  GridSpec grid(n, 1.0);
  DyadicLayout layout(1.0, theta);
  GenerationWindow win = compute_window(grid, theta);
  REQUIRE(win.valid);
  return classify_bad(jstar, layout, win);
}

}  // namespace

TEST_CASE("components of the enlarged bad set") {
  // craft a jump sitting inside exactly one square's Q' at the finest bad gen
  double theta = 0.5;
  GridSpec grid(256, 1.0);
  GenerationWindow win = compute_window(grid, theta);
  DyadicLayout layout(1.0, theta);
  int gen = win.I;
  Square target = layout.square(gen, layout.per_side(gen) / 2, layout.per_side(gen) / 2);
  double s = target.halfside;
  SegmentSet jump;
  jump.add(Segment{{target.center.x - 0.4 * s, target.center.y}, {target.center.x + 0.4 * s, target.center.y}});
  BadSquareIndex idx = classify_bad(jump, layout, win);
  ComponentSet cs = components(idx, gen);
  REQUIRE(cs.raw.count >= 1);
  // the largest component contains the 5x dilation of a small cluster of
  // bad squares around the target; its diameter is within the Q''' scale
  double dmax = 0;
  for (const auto& ci : cs.info) dmax = std::max(dmax, ci.diameter);
  CHECK(dmax >= target.diam());           // at least the base square
  CHECK(dmax <= 4.0 * 5.0 * target.diam());  // a few enlarged squares across

  // two far-apart jumps give two components
  Square t2 = layout.square(gen, 2, 2);
  SegmentSet jump2 = jump;
  jump2.add(Segment{{t2.center.x - 0.4 * s, t2.center.y}, {t2.center.x + 0.4 * s, t2.center.y}});
  ComponentSet cs2 = components(index_for(jump2, theta, 256), gen);
  CHECK(cs2.raw.count >= 2);

  // a long chord is never isolated
  SegmentSet chord;
  chord.add(Segment{{-0.95, 0.0}, {0.95, 0.0}});
  ComponentSet cs3 = components(index_for(chord, theta, 256), gen);
  bool any_big_isolated = false;
  for (const auto& ci : cs3.info)
    if (ci.isolated && ci.diameter > 0.5) any_big_isolated = true;
  CHECK(!any_big_isolated);
}

TEST_CASE("union boundary bound") {
  DyadicLayout layout(1.0, 0.5);
  int gen = 4;
  double s = layout.halfside(gen);
  SegmentSet jstar;
  Square q = layout.square(gen, 5, 5);
  jstar.add(Segment{{q.center.x - 0.45 * s, q.center.y}, {q.center.x + 0.45 * s, q.center.y}});
  std::vector<SelectedSquares> sel(1);
  sel[0].gen = gen;
  sel[0].squares = {{5, 5}};
  UnionBoundaryResult r = union_boundary_bound(layout, sel, jstar);
  // a single enlarged square Q''' has boundary 40 s
  CHECK(r.boundary_length == doctest::Approx(40.0 * s));
  CHECK(r.jump_in_union == doctest::Approx(0.9 * s).epsilon(1e-9));
  CHECK(r.ratio == doctest::Approx(40.0 * s / (0.9 * s)).epsilon(1e-9));
  CHECK(r.gamma_connected_per_component);

  // nested squares at two generations: the greedy subfamily drops the
  // covered square, so gamma has only one ring
  std::vector<SelectedSquares> sel2(2);
  sel2[0].gen = gen;
  sel2[0].squares = {{5, 5}};
  sel2[1].gen = gen + 1;
  sel2[1].squares = {{10, 10}};  // child inside the same region
  UnionBoundaryResult r2 = union_boundary_bound(layout, sel2, jstar);
  CHECK(r2.gamma.segments.size() == 4);  // one Q''' ring only
}

TEST_CASE("density regularization leaves clean inputs unchanged") {
  DisplacementField u = fixtures::piecewise_rigid(128, 1.0, 3, 17);
  RegularizeResult reg = regularize_jump_density(u, 0.25);
  CHECK(!reg.violated);
  CHECK(reg.stages.empty());
  CHECK(reg.post_density_worst <= 1.0 + 1e-9);
}

TEST_CASE("dense cluster is removed at its own scale") {
  double theta = 0.25;
  DisplacementField u = fixtures::dense_cluster(256, 1.0, theta, 2, 5, 9);
  RegularizeResult reg = regularize_jump_density(u, theta);
  REQUIRE(reg.violated);
  // the final modified field satisfies the density bound exhaustively
  CHECK(reg.post_density_violations == 0);
  // some stage at generation >= 2 contains the cluster square's footprint
  DyadicLayout layout(1.0, theta);
  Square cluster = layout.square(2, 5, 9);
  bool covered = false;
  for (const auto& st : reg.stages)
    for (auto [ix, iy] : st.squares) {
      Box b = layout.square(st.gen, ix, iy).box();
      if (st.gen >= 2 && b.intersects(cluster.box())) covered = true;
    }
  CHECK(covered);
  // no generation-0/1 ancestor was removed wholesale
  for (const auto& st : reg.stages) CHECK(st.gen >= 2);
  // boundary ledger is finite relative to the jump mass
  CHECK(reg.ledger_ratio < 20.0);
}

TEST_CASE("regularization ledger is stable over random crack corpora") {
  for (unsigned long long seed = 0; seed < 4; ++seed) {
    DisplacementField u = fixtures::crack_forest(128, 1.0, seed + 40);
    RegularizeResult reg = regularize_jump_density(u, 0.25);
    if (reg.violated) {
      CHECK(reg.post_density_violations == 0);
      CHECK(reg.ledger_ratio < 30.0);
    }
  }
}
