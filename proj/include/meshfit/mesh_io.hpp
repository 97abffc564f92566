#pragma once

#include "meshfit/isosurface.hpp"

#include <optional>
#include <string>

namespace meshfit {

/// ASCII OBJ with v/vn/f records (vn only when normals are present).
void save_obj(const Mesh& mesh, const std::string& path);
Mesh load_obj(const std::string& path);

/// Binary little-endian PLY; per-vertex 8-bit RGB when colors are given
/// (values in [0,1], quantized).
void save_ply(const Mesh& mesh, const std::string& path,
              const std::vector<Vec3>* colors = nullptr);
Mesh load_ply(const std::string& path, std::vector<Vec3>* colors = nullptr);

/// Dispatch on extension (.obj / .ply).
void save_mesh(const Mesh& mesh, const std::string& path,
               const std::vector<Vec3>* colors = nullptr);
Mesh load_mesh(const std::string& path);

}  // namespace meshfit
