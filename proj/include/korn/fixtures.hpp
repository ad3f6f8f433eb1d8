#pragma once

// Deterministic fixture fields used by the verification suite, the CLI
// `sample` command and the tests.

#include <random>

#include "korn/decompose.hpp"

namespace korn {
namespace fixtures {

// u = rigid motion everywhere, no jumps.
DisplacementField rigid(int n, double mu, double omega, Vec2 b);

// u = x1 ramp: u(x) = (x1 component ramp, 0). Used by the coarea examples.
DisplacementField ramp(int n, double mu);

// u = linear strain field u(x) = G x (no jumps).
DisplacementField linear(int n, double mu, Mat2 G);

// k pieces separated by chords; one rigid motion per piece, e(u) = 0.
// Motions have |omega| in [0.3, 1] and pairwise gaps bounded away from zero.
DisplacementField piecewise_rigid(int n, double mu, int k, unsigned long long seed);

// Opposing rotations on k polygonal balls (regular 64-gons), ambient zero.
DisplacementField rotating_balls(int n, double mu, int k);

// Random crack forest with a smooth strained background and tangential slip
// bumps along the longer segments.
DisplacementField crack_forest(int n, double mu, unsigned long long seed);

// Small corner detached by a short chord, wild motion inside, small smooth
// strain everywhere.
DisplacementField detached_corner(int n, double mu, double crack_len, unsigned long long seed);

// Dense crack cluster concentrated in one dyadic square (density violator).
DisplacementField dense_cluster(int n, double mu, double theta, int gen, int ix, int iy);

// ground-truth labels of the piecewise_rigid fixture (flood fill off cracks)
std::vector<int> true_labels(const DisplacementField& u, int* count = nullptr);

}  // namespace fixtures
}  // namespace korn
