#pragma once

// Reference marching-cubes extractor (classic 256-case tables) used as an
// independent oracle for the dual-contouring extractor. Test support only.

#include "meshfit/field.hpp"
#include "meshfit/isosurface.hpp"

namespace meshfit::testutil {

Mesh marching_cubes_reference(const SdfGrid& grid, double iso = 0.0);

}  // namespace meshfit::testutil
