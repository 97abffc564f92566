#include "meshfit/isosurface.hpp"

#include <algorithm>
#include <cmath>

namespace meshfit {

const CubeTopology& CubeTopology::instance() {
    static const CubeTopology topo = [] {
        CubeTopology t{};
        for (int c = 0; c < 256; ++c) {
            uint16_t mask = 0;
            int count = 0;
            for (int e = 0; e < 12; ++e) {
                bool ia = (c >> kEdgeCorners[e][0]) & 1;
                bool ib = (c >> kEdgeCorners[e][1]) & 1;
                if (ia != ib) {
                    mask |= static_cast<uint16_t>(1u << e);
                    ++count;
                }
            }
            t.crossed_edges[c] = mask;
            t.crossing_count[c] = static_cast<uint8_t>(count);
        }
        return t;
    }();
    return topo;
}

std::vector<EdgeCrossing> edge_crossings(const std::array<double, 8>& corner_values,
                                         const std::array<Vec3, 8>& corner_positions,
                                         double iso) {
    std::vector<EdgeCrossing> out;
    for (int e = 0; e < 12; ++e) {
        const int a = CubeTopology::kEdgeCorners[e][0];
        const int b = CubeTopology::kEdgeCorners[e][1];
        const bool inside_a = corner_values[a] < iso;
        const bool inside_b = corner_values[b] < iso;
        if (inside_a == inside_b) continue;
        const double t = (iso - corner_values[a]) / (corner_values[b] - corner_values[a]);
        out.push_back({e, corner_positions[a] + t * (corner_positions[b] - corner_positions[a])});
    }
    return out;
}

Vec3 dual_vertex(std::span<const EdgeCrossing> crossings) {
    if (crossings.empty()) throw InputError("dual_vertex: no crossings");
    Vec3 sum = Vec3::Zero();
    for (const auto& c : crossings) sum += c.point;
    return sum / static_cast<double>(crossings.size());
}

namespace {

inline int cube_case(const std::array<double, 8>& v, double iso) {
    int c = 0;
    for (int k = 0; k < 8; ++k)
        if (v[k] < iso) c |= 1 << k;
    return c;
}

inline void gather_cube(const SdfGrid& g, int i, int j, int k, std::array<double, 8>& v,
                        std::array<Vec3, 8>& p) {
    for (int c = 0; c < 8; ++c) {
        const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
        v[c] = g.at(ci, cj, ck);
        p[c] = g.lattice_point(ci, cj, ck);
    }
}

}  // namespace

ExtractResult extract_mesh(const SdfGrid& grid, double iso, int threads) {
    if (grid.resolution < 2) throw InputError("extract_mesh: grid resolution must be >= 2");
    ExtractResult res;
    res.iso = iso;
    const int nc = grid.resolution - 1;  // cubes per axis
    const auto& topo = CubeTopology::instance();

    // Vertex pass, parallel over k-slabs; slab outputs are merged in order so
    // the result is identical for any thread count.
    struct SlabOut {
        std::vector<Vec3> verts;
        std::vector<Vec3i> cubes;
    };
    std::vector<SlabOut> slabs(nc);
    parallel_chunks(nc, 1, threads, [&](int64_t kb, int64_t) {
        const int k = static_cast<int>(kb);
        SlabOut& out = slabs[k];
        std::array<double, 8> v;
        std::array<Vec3, 8> p;
        for (int j = 0; j < nc; ++j) {
            for (int i = 0; i < nc; ++i) {
                gather_cube(grid, i, j, k, v, p);
                const int c = cube_case(v, iso);
                if (topo.crossing_count[c] == 0) continue;
                auto crossings = edge_crossings(v, p, iso);
                out.verts.push_back(dual_vertex(crossings));
                out.cubes.push_back(Vec3i(i, j, k));
            }
        }
    });

    std::vector<int> cube_to_vertex(static_cast<size_t>(nc) * nc * nc, -1);
    auto cube_index = [nc](int i, int j, int k) {
        return static_cast<size_t>(i) + static_cast<size_t>(nc) * (j + static_cast<size_t>(nc) * k);
    };
    for (int k = 0; k < nc; ++k) {
        for (size_t s = 0; s < slabs[k].verts.size(); ++s) {
            const Vec3i& c = slabs[k].cubes[s];
            cube_to_vertex[cube_index(c.x(), c.y(), c.z())] =
                static_cast<int>(res.mesh.vertices.size());
            res.mesh.vertices.push_back(slabs[k].verts[s]);
            res.vertex_cubes.push_back(c);
        }
    }
    if (res.mesh.vertices.empty()) return res;

    // Face pass: one quad per interior grid edge with a sign change. The four
    // cubes around an edge along axis d are ordered counterclockwise as seen
    // from +d; that ring winds the quad toward the positive side when the
    // edge goes inside -> outside along +d.
    const int N = grid.resolution;
    static constexpr int kRing[4][2] = {{1, 1}, {0, 1}, {0, 0}, {1, 0}};
    auto emit_quad = [&](const std::array<int, 4>& q) {
        // Split along the diagonal with the smaller combined vertex index.
        if (q[0] + q[2] <= q[1] + q[3]) {
            res.mesh.faces.push_back({q[0], q[1], q[2]});
            res.mesh.faces.push_back({q[0], q[2], q[3]});
        } else {
            res.mesh.faces.push_back({q[1], q[2], q[3]});
            res.mesh.faces.push_back({q[1], q[3], q[0]});
        }
    };
    for (int d = 0; d < 3; ++d) {
        const int e1 = (d + 1) % 3, e2 = (d + 2) % 3;
        Vec3i n;
        for (n[2] = 0; n[2] < N; ++n[2]) {
            for (n[1] = 0; n[1] < N; ++n[1]) {
                for (n[0] = 0; n[0] < N; ++n[0]) {
                    if (n[d] >= N - 1) continue;
                    if (n[e1] < 1 || n[e1] > N - 2 || n[e2] < 1 || n[e2] > N - 2) continue;
                    const double va = grid.at(n[0], n[1], n[2]);
                    Vec3i nb = n;
                    nb[d] += 1;
                    const double vb = grid.at(nb[0], nb[1], nb[2]);
                    const bool ia = va < iso, ib = vb < iso;
                    if (ia == ib) continue;
                    std::array<int, 4> q;
                    bool ok = true;
                    for (int r = 0; r < 4; ++r) {
                        Vec3i o = n;
                        o[e1] -= kRing[r][0];
                        o[e2] -= kRing[r][1];
                        const int vid = cube_to_vertex[cube_index(o[0], o[1], o[2])];
                        if (vid < 0) {
                            ok = false;
                            break;
                        }
                        q[r] = vid;
                    }
                    if (!ok) continue;  // unreachable for valid grids; guards NaN input
                    if (!ia) std::reverse(q.begin(), q.end());
                    emit_quad(q);
                }
            }
        }
    }
    return res;
}

VertexJacobian vertex_jacobian(const SdfGrid& grid, const ExtractResult& extraction,
                               int vertex_id) {
    if (vertex_id < 0 || vertex_id >= static_cast<int>(extraction.vertex_cubes.size()))
        throw InputError("vertex_jacobian: unknown vertex id");
    const Vec3i cube = extraction.vertex_cubes[vertex_id];
    const double iso = extraction.iso;

    std::array<double, 8> v;
    std::array<Vec3, 8> p;
    gather_cube(grid, cube.x(), cube.y(), cube.z(), v, p);

    VertexJacobian jac;
    for (int c = 0; c < 8; ++c) {
        const int ci = cube.x() + (c & 1), cj = cube.y() + ((c >> 1) & 1),
                  ck = cube.z() + ((c >> 2) & 1);
        jac.corner_node[c] = static_cast<int64_t>(grid.index(ci, cj, ck));
        jac.d[c] = Vec3::Zero();
    }

    // v* = mean of crossings; each crossing x = p_a + t (p_b - p_a),
    // t = (iso - va)/(vb - va), so dx/dva = (p_b - p_a)(iso - vb)/(vb - va)^2
    // and dx/dvb = -(p_b - p_a)(iso - va)/(vb - va)^2.
    int crossing_count = 0;
    for (int e = 0; e < 12; ++e) {
        const int a = CubeTopology::kEdgeCorners[e][0];
        const int b = CubeTopology::kEdgeCorners[e][1];
        if ((v[a] < iso) == (v[b] < iso)) continue;
        ++crossing_count;
    }
    if (crossing_count == 0) throw InputError("vertex_jacobian: vertex cube has no crossings");
    const double inv_n = 1.0 / crossing_count;
    for (int e = 0; e < 12; ++e) {
        const int a = CubeTopology::kEdgeCorners[e][0];
        const int b = CubeTopology::kEdgeCorners[e][1];
        if ((v[a] < iso) == (v[b] < iso)) continue;
        const Vec3 dir = p[b] - p[a];
        const double denom = (v[b] - v[a]) * (v[b] - v[a]);
        jac.d[a] += inv_n * dir * (iso - v[b]) / denom;
        jac.d[b] -= inv_n * dir * (iso - v[a]) / denom;
    }
    return jac;
}

int compute_vertex_normals(Mesh& mesh) {
    mesh.vertex_normals.assign(mesh.vertices.size(), Vec3::Zero());
    for (const auto& f : mesh.faces) {
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        const Vec3 cn = e1.cross(e2);  // length = 2 * area
        for (int k = 0; k < 3; ++k) mesh.vertex_normals[f[k]] += cn;
    }
    int zero_count = 0;
    for (auto& n : mesh.vertex_normals) {
        const double len = n.norm();
        if (len < 1e-20) {
            n.setZero();
            ++zero_count;
        } else {
            n /= len;
        }
    }
    return zero_count;
}

void backprop_vertex_normals(const Mesh& mesh, const std::vector<Vec3>& normal_bar,
                             std::vector<Vec3>& position_bar) {
    if (normal_bar.size() != mesh.vertices.size())
        throw InputError("backprop_vertex_normals: adjoint size mismatch");
    position_bar.assign(mesh.vertices.size(), Vec3::Zero());

    // Recompute the unnormalized accumulations, then push adjoints through
    // normalize -> sum of face cross products -> vertex positions.
    std::vector<Vec3> pre(mesh.vertices.size(), Vec3::Zero());
    for (const auto& f : mesh.faces) {
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        const Vec3 cn = e1.cross(e2);
        for (int k = 0; k < 3; ++k) pre[f[k]] += cn;
    }
    std::vector<Vec3> pre_bar(mesh.vertices.size(), Vec3::Zero());
    for (size_t i = 0; i < pre.size(); ++i) {
        const double len = pre[i].norm();
        if (len < 1e-20) continue;
        const Vec3 n = pre[i] / len;
        pre_bar[i] = (normal_bar[i] - n * n.dot(normal_bar[i])) / len;
    }
    for (const auto& f : mesh.faces) {
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        const Vec3 cn_bar = pre_bar[f[0]] + pre_bar[f[1]] + pre_bar[f[2]];
        const Vec3 e1_bar = e2.cross(cn_bar);
        const Vec3 e2_bar = cn_bar.cross(e1);
        position_bar[f[1]] += e1_bar;
        position_bar[f[2]] += e2_bar;
        position_bar[f[0]] -= e1_bar + e2_bar;
    }
}

}  // namespace meshfit
