#pragma once

// SVG rendering of a decomposition: layered groups with stable ids.

#include <string>

#include "korn/decompose.hpp"
#include "korn/partition.hpp"

namespace korn {

struct SvgLayers {
  const DisplacementField* field = nullptr;             // jump segments (red)
  const PiecewiseDecomposition* decomposition = nullptr;  // piece boundaries (black)
  const WhitneyCovering* covering = nullptr;            // squares (gray by generation)
  const CellSet* exceptional = nullptr;                 // blue cells
};

void write_svg(const std::string& path, const SvgLayers& layers, double mu, int pixels = 800);

}  // namespace korn
