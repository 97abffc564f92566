#pragma once

#include "meshfit/core.hpp"
#include "meshfit/field.hpp"

#include <array>
#include <cstdint>

namespace meshfit {

// ---------------------------------------------------------------------------
// Mesh
// ---------------------------------------------------------------------------

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> vertex_normals;  // unit; may be empty until computed

    size_t num_vertices() const { return vertices.size(); }
    size_t num_faces() const { return faces.size(); }
    bool empty() const { return vertices.empty(); }
};

// ---------------------------------------------------------------------------
// Cube topology.
//
// Corner k sits at offset (k&1, (k>>1)&1, (k>>2)&1); corners with value < iso
// are "inside" (values exactly at iso count as outside). The per-case table
// lists which of the 12 cube edges carry a sign change.
// ---------------------------------------------------------------------------

struct CubeTopology {
    // (corner_a, corner_b) per edge; edges 0-3 along x, 4-7 along y, 8-11 along z.
    static constexpr int kEdgeCorners[12][2] = {
        {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x
        {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y
        {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z
    };

    std::array<uint16_t, 256> crossed_edges;  // bit e set = edge e has a sign change
    std::array<uint8_t, 256> crossing_count;

    static const CubeTopology& instance();
};

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct EdgeCrossing {
    int edge_id;
    Vec3 point;
};

/// Linear zero crossings of iso on the 12 cube edges. Corners exactly at iso
/// classify as the positive side.
std::vector<EdgeCrossing> edge_crossings(const std::array<double, 8>& corner_values,
                                         const std::array<Vec3, 8>& corner_positions,
                                         double iso = 0.0);

/// Uniform-weight dual vertex: the arithmetic mean of the crossing points.
Vec3 dual_vertex(std::span<const EdgeCrossing> crossings);

struct ExtractResult {
    Mesh mesh;
    std::vector<Vec3i> vertex_cubes;  // owning cube (i,j,k) per dual vertex
    double iso = 0.0;
};

/// One dual vertex per surface-crossed cube, one quad (two triangles) per
/// sign-changing interior grid edge, wound toward positive SDF. Returns an
/// empty mesh when the grid has no sign change.
ExtractResult extract_mesh(const SdfGrid& grid, double iso = 0.0, int threads = 1);

/// Derivative of one dual vertex with respect to the 8 corner SDF values of
/// its owning cube. corner_node[k] is the flattened grid index; d[k] is zero
/// for corners not on a crossed edge.
struct VertexJacobian {
    std::array<int64_t, 8> corner_node;
    std::array<Vec3, 8> d;
};

VertexJacobian vertex_jacobian(const SdfGrid& grid, const ExtractResult& extraction,
                               int vertex_id);

/// Area-weighted vertex normals, normalized in place. Returns the number of
/// vertices that received a zero normal (isolated or fully degenerate).
int compute_vertex_normals(Mesh& mesh);

/// Reverse pass of compute_vertex_normals: scatters per-vertex unit-normal
/// adjoints into vertex-position adjoints.
void backprop_vertex_normals(const Mesh& mesh, const std::vector<Vec3>& normal_bar,
                             std::vector<Vec3>& position_bar);

}  // namespace meshfit
