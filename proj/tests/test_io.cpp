#include <doctest.h>

#include <cstdio>
#include <random>

#include "korn/fixtures.hpp"
#include "korn/io.hpp"

using namespace korn;

TEST_CASE("field roundtrip is bit exact") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    int n = 16 << trial;
    DisplacementField u{GridSpec(n, 0.5 + trial)};
    for (auto& v : u.u) v = {U(rng), U(rng)};
    for (int s = 0; s < trial * 3; ++s) {
      double m = u.grid.mu;
      Vec2 a{U(rng) * m, U(rng) * m}, b{U(rng) * m, U(rng) * m};
      if ((b - a).norm() > 1e-6) u.jumps.add(Segment{a, b});
    }
    std::string path = "/tmp/korn_io_test.field";
    write_field(path, u);
    DisplacementField r = read_field(path);
    REQUIRE(r.grid.n == u.grid.n);
    REQUIRE(r.grid.mu == u.grid.mu);
    REQUIRE(r.jumps.segments.size() == u.jumps.segments.size());
    for (size_t i = 0; i < u.u.size(); ++i) {
      CHECK(r.u[i].x == u.u[i].x);
      CHECK(r.u[i].y == u.u[i].y);
    }
    for (size_t i = 0; i < u.jumps.segments.size(); ++i) {
      CHECK(r.jumps.segments[i].a.x == u.jumps.segments[i].a.x);
      CHECK(r.jumps.segments[i].b.y == u.jumps.segments[i].b.y);
    }
  }
  std::remove("/tmp/korn_io_test.field");
}

TEST_CASE("reader rejects malformed files") {
  {
    FILE* f = std::fopen("/tmp/korn_bad.field", "wb");
    std::fwrite("XXXX", 1, 4, f);
    std::fclose(f);
    CHECK_THROWS_AS(read_field("/tmp/korn_bad.field"), io_error);
  }
  {
    DisplacementField u = fixtures::ramp(16, 1.0);
    write_field("/tmp/korn_trunc.field", u);
    FILE* f = std::fopen("/tmp/korn_trunc.field", "rb+");
    std::fseek(f, 0, SEEK_END);
    long sz = std::ftell(f);
    std::fclose(f);
    (void)sz;
    // truncate the file by rewriting a prefix
    std::vector<unsigned char> buf(size_t(sz / 2), 0);
    f = std::fopen("/tmp/korn_trunc.field", "rb");
    size_t got = std::fread(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    f = std::fopen("/tmp/korn_trunc.field", "wb");
    std::fwrite(buf.data(), 1, got, f);
    std::fclose(f);
    CHECK_THROWS_AS(read_field("/tmp/korn_trunc.field"), io_error);
  }
  CHECK_THROWS_AS(read_field("/tmp/no_such_file.field"), io_error);
  std::remove("/tmp/korn_bad.field");
  std::remove("/tmp/korn_trunc.field");
}
