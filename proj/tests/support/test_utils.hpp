#pragma once

#include "meshfit/field.hpp"
#include "meshfit/isosurface.hpp"

#include <map>
#include <set>

namespace meshfit::testutil {

/// theta + t * direction, for finite-difference probes in parameter space.
inline TriplaneField field_axpy(const TriplaneField& f, const FieldGrads& d, double t) {
    TriplaneField out = f;
    for (int pl = 0; pl < 3; ++pl) out.planes[pl] += t * d.planes[pl];
    for (size_t l = 0; l < out.decoder.weights.size(); ++l) {
        out.decoder.weights[l] += t * d.weights[l];
        out.decoder.biases[l] += t * d.biases[l];
    }
    return out;
}

inline FieldGrads random_direction_like(const TriplaneField& f, uint64_t seed) {
    FieldGrads d;
    d.init_like(f);
    Rng rng(seed);
    for (int pl = 0; pl < 3; ++pl)
        for (int i = 0; i < d.planes[pl].size(); ++i) d.planes[pl].data()[i] = rng.normal();
    for (size_t l = 0; l < d.weights.size(); ++l) {
        for (int i = 0; i < d.weights[l].size(); ++i) d.weights[l].data()[i] = rng.normal();
        for (int i = 0; i < d.biases[l].size(); ++i) d.biases[l][i] = rng.normal();
    }
    return d;
}

/// Every edge of a closed extracted surface must be shared by exactly two
/// faces; returns true when that holds for all edges.
inline bool is_watertight(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& f : mesh.faces)
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_count[{a, b}];
        }
    for (const auto& [e, c] : edge_count)
        if (c != 2) return false;
    return !mesh.faces.empty();
}

inline int64_t unique_edge_count(const Mesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces)
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.insert({a, b});
        }
    return static_cast<int64_t>(edges.size());
}

}  // namespace meshfit::testutil
