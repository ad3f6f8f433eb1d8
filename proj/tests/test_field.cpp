#include <doctest.h>

#include "korn/field.hpp"
#include "korn/fixtures.hpp"

using namespace korn;

TEST_CASE("strain of a rigid motion vanishes") {
  DisplacementField u = fixtures::rigid(32, 1.0, 1.0, {0, 0});
  StrainField s = strain(u);
  for (size_t i = 0; i < s.strain.size(); ++i) {
    REQUIRE(s.valid[i]);
    CHECK(s.strain[i].frobenius() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("strain of simple linear fields") {
  // u = (x2, 0): e = [[0, 1/2], [1/2, 0]]
  DisplacementField u = sample_analytic([](Vec2 x) { return Vec2{x.y, 0.0}; }, {}, 32, 1.0);
  StrainField s = strain(u);
  for (size_t i = 0; i < s.strain.size(); ++i) {
    CHECK(s.strain[i].a11 == doctest::Approx(0.0));
    CHECK(s.strain[i].a12 == doctest::Approx(0.5));
    CHECK(s.strain[i].a22 == doctest::Approx(0.0));
  }
  // u = (x1, 0): e11 = 1
  DisplacementField w = fixtures::linear(32, 1.0, Mat2{1, 0, 0, 0});
  StrainField sw = strain(w);
  for (size_t i = 0; i < sw.strain.size(); ++i) CHECK(sw.strain[i].a11 == doctest::Approx(1.0));
}

TEST_CASE("strain never differentiates across a crack") {
  // piecewise constant across a vertical crack
  SegmentSet J;
  J.add(Segment{{0.0, -1.0}, {0.0, 1.0}});
  DisplacementField u = sample_analytic([](Vec2 x) { return x.x < 0 ? Vec2{1.0, 0.0} : Vec2{-2.0, 0.5}; }, J, 64, 1.0);
  StrainField s = strain(u);
  for (size_t i = 0; i < s.strain.size(); ++i)
    if (s.valid[i]) CHECK(s.strain[i].frobenius() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("finite difference error of x1^2 is first order or better") {
  auto err_at = [](int n) {
    DisplacementField u = sample_analytic([](Vec2 x) { return Vec2{x.x * x.x, 0.0}; }, {}, n, 1.0);
    StrainField s = strain(u);
    double worst = 0.0;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        if (!s.valid[u.grid.idx(ix, iy)]) continue;
        double exact = 2.0 * u.grid.cell_center(ix, iy).x;
        worst = std::max(worst, std::abs(s.strain[u.grid.idx(ix, iy)].a11 - exact));
      }
    return worst;
  };
  double e1 = err_at(32), e2 = err_at(64);
  CHECK(e2 < e1);
  CHECK(e1 / e2 >= 1.8);  // measured order >= 1
}

TEST_CASE("lp norms") {
  GridSpec g(64, 0.5);  // unit-area domain
  std::vector<double> ones(size_t(g.n) * g.n, 1.0);
  CHECK(lp_norm_scalar(ones, g, 2.0, nullptr).value == doctest::Approx(1.0));
  std::vector<double> cs(size_t(g.n) * g.n, -3.5);
  CHECK(lp_norm_scalar(cs, g, std::numeric_limits<double>::infinity(), nullptr).value == doctest::Approx(3.5));

  // u = (x1, 0) on (-1,1)^2, p = 2: integral of x1^2 over the square = 4/3
  DisplacementField u = fixtures::linear(128, 1.0, Mat2{1, 0, 0, 0});
  double norm = lp_norm_vec(u.u, u.grid, 2.0).value;
  CHECK(norm == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(0.001));
  // and the rotation field (-x2, x1) integrates |x|^2 = 8/3
  DisplacementField rot = sample_analytic([](Vec2 x) { return Vec2{-x.y, x.x}; }, {}, 128, 1.0);
  CHECK(lp_norm_vec(rot.u, rot.grid, 2.0).value == doctest::Approx(std::sqrt(8.0 / 3.0)).epsilon(0.001));

  CellSet empty(g);
  LpResult r = lp_norm_scalar(ones, g, 2.0, &empty);
  CHECK(r.empty_region);
  CHECK(r.value == 0.0);
}

TEST_CASE("strain is linear on the common mask") {
  SegmentSet J;
  J.add(Segment{{-0.4, -0.3}, {0.5, 0.4}});
  auto f1 = [](Vec2 x) { return Vec2{x.x * x.y, 0.2 * x.y}; };
  auto f2 = [](Vec2 x) { return Vec2{0.3 * x.y, -x.x}; };
  DisplacementField u1 = sample_analytic(f1, J, 48, 1.0);
  DisplacementField u2 = sample_analytic(f2, J, 48, 1.0);
  DisplacementField usum = sample_analytic([&](Vec2 x) { return Vec2{f1(x).x + f2(x).x, f1(x).y + f2(x).y}; }, J, 48, 1.0);
  StrainField s1 = strain(u1), s2 = strain(u2), ss = strain(usum);
  for (size_t i = 0; i < ss.strain.size(); ++i) {
    if (!(s1.valid[i] && s2.valid[i] && ss.valid[i])) continue;
    CHECK(ss.strain[i].a11 == doctest::Approx(s1.strain[i].a11 + s2.strain[i].a11).epsilon(1e-10));
    CHECK(ss.strain[i].a12 == doctest::Approx(s1.strain[i].a12 + s2.strain[i].a12).epsilon(1e-10));
  }
}

TEST_CASE("sampling rejects bad input") {
  CHECK_THROWS_AS(sample_analytic([](Vec2) { return Vec2{0, 0}; }, {}, 4, 1.0), std::invalid_argument);
  SegmentSet outside;
  outside.add(Segment{{0, 0}, {2.0, 0}});
  CHECK_THROWS_AS(sample_analytic([](Vec2) { return Vec2{0, 0}; }, outside, 16, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(
      sample_analytic([](Vec2 x) { return Vec2{1.0 / (x.x - x.x), 0}; }, {}, 16, 1.0),
      std::invalid_argument);
}

TEST_CASE("sampling offset") {
  DisplacementField a = sample_analytic([](Vec2 x) { return Vec2{x.x, x.y}; }, {}, 16, 1.0, {0.5, 0.5});
  DisplacementField b = sample_analytic([](Vec2 x) { return Vec2{x.x, x.y}; }, {}, 16, 1.0, {0.25, 0.75});
  double h = a.grid.h();
  CHECK(b.at(3, 3).x - a.at(3, 3).x == doctest::Approx(-0.25 * h));
  CHECK(b.at(3, 3).y - a.at(3, 3).y == doctest::Approx(0.25 * h));
}
