#pragma once

// Field file format: magic "KDF1", little-endian u32 n, f64 mu, u32 segment
// count, segments as 4 x f64 (ax ay bx by), then n^2 pairs of f64 row-major.

#include <string>

#include "korn/field.hpp"

namespace korn {

struct io_error : std::runtime_error {
  explicit io_error(const std::string& w) : std::runtime_error(w) {}
};

void write_field(const std::string& path, const DisplacementField& u);
DisplacementField read_field(const std::string& path);

}  // namespace korn
