#include "support/marching_cubes_ref.hpp"

namespace meshfit::testutil {

#include "support/marching_cubes_tables.inc"

Mesh marching_cubes_reference(const SdfGrid& grid, double iso) {
    Mesh mesh;
    const int nc = grid.resolution - 1;
    std::array<double, 8> v;
    std::array<Vec3, 8> p;
    for (int k = 0; k < nc; ++k) {
        for (int j = 0; j < nc; ++j) {
            for (int i = 0; i < nc; ++i) {
                int cube_case = 0;
                for (int c = 0; c < 8; ++c) {
                    const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
                    v[c] = grid.at(ci, cj, ck);
                    p[c] = grid.lattice_point(ci, cj, ck);
                    if (v[c] < iso) cube_case |= 1 << c;
                }
                const signed char* row = kMcTriTable[cube_case];
                for (int t = 0; row[t] >= 0; t += 3) {
                    const int base = static_cast<int>(mesh.vertices.size());
                    for (int e = 0; e < 3; ++e) {
                        const int edge = row[t + e];
                        const int a = CubeTopology::kEdgeCorners[edge][0];
                        const int b = CubeTopology::kEdgeCorners[edge][1];
                        const double tt = (iso - v[a]) / (v[b] - v[a]);
                        mesh.vertices.push_back(p[a] + tt * (p[b] - p[a]));
                    }
                    mesh.faces.push_back({base, base + 1, base + 2});
                }
            }
        }
    }
    return mesh;
}

}  // namespace meshfit::testutil
