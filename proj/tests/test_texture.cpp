#include "doctest.h"

#include "meshfit/mesh_io.hpp"
#include "meshfit/texture.hpp"

#include <cstdio>
#include <filesystem>

using namespace meshfit;

namespace {

Mesh facing_quad(double half = 1.0) {
    Mesh m;
    m.vertices = {Vec3(-half, -half, 0), Vec3(half, -half, 0), Vec3(half, half, 0),
                  Vec3(-half, half, 0)};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    m.vertex_normals.assign(4, Vec3(0, 0, 1));
    return m;
}

Camera head_on(int res, double fov_deg = 60) {
    return Camera::look_at(Vec3(0, 0, 2), Vec3::Zero(), Vec3(0, 1, 0), deg_to_rad(fov_deg), res,
                           res);
}

}  // namespace

TEST_SUITE_BEGIN("texture");

TEST_CASE("rasterize_coordinates: quad center, empty mesh, points on surface") {
    Image coord, mask;
    rasterize_coordinates(facing_quad(), head_on(33), coord, mask);
    CHECK(mask.at(16, 16) == 1.0);
    CHECK(coord.pixel3(16, 16).norm() < 1e-6);

    Image c2, m2;
    rasterize_coordinates(Mesh{}, head_on(16), c2, m2);
    for (double v : m2.data) CHECK(v == 0.0);

    // Covered coords lie on the quad plane z=0 within tolerance.
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x)
            if (mask.at(y, x) > 0.5) CHECK(std::abs(coord.pixel3(y, x).z()) < 1e-5);
}

TEST_CASE("query_texture: constant planes, background zeros, scalar oracle") {
    TriplaneField f = make_texture_field(8, 4, {8}, 3);
    for (int pl = 0; pl < 3; ++pl) f.planes[pl].setConstant(0.5);
    Image coord, mask;
    rasterize_coordinates(facing_quad(), head_on(17), coord, mask);
    const Image feat = query_texture(f, coord, mask);
    REQUIRE(feat.channels == 4);
    bool saw_fg = false, saw_bg = false;
    for (int y = 0; y < 17; ++y)
        for (int x = 0; x < 17; ++x) {
            if (mask.at(y, x) > 0.5) {
                saw_fg = true;
                for (int c = 0; c < 4; ++c)
                    CHECK(feat.at(y, x, c) == doctest::Approx(1.5).epsilon(1e-12));
            } else {
                saw_bg = true;
                for (int c = 0; c < 4; ++c) CHECK(feat.at(y, x, c) == 0.0);
            }
        }
    CHECK(saw_fg);
    CHECK(saw_bg);

    TriplaneField fr = make_texture_field(9, 5, {8}, 7);
    const Image featr = query_texture(fr, coord, mask);
    for (int y = 0; y < 17; y += 3)
        for (int x = 0; x < 17; x += 3)
            if (mask.at(y, x) > 0.5) {
                const VecX s = sample_triplane(fr, coord.pixel3(y, x));
                for (int c = 0; c < 5; ++c)
                    CHECK(featr.at(y, x, c) == doctest::Approx(s[c]).epsilon(1e-12));
            }
}

TEST_CASE("decode_rgb: sigmoid of zero is gray, saturation, width mismatch") {
    TriplaneField f = make_texture_field(8, 4, {8}, 11);
    for (auto& w : f.decoder.weights) w.setZero();
    for (auto& b : f.decoder.biases) b.setZero();
    Image coord, mask;
    rasterize_coordinates(facing_quad(), head_on(9), coord, mask);
    const Image feat = query_texture(f, coord, mask);
    const Image rgb = decode_rgb(f, feat, mask);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(rgb.at(y, x, c) ==
                      doctest::Approx(mask.at(y, x) > 0.5 ? 0.5 : 0.0).epsilon(1e-12));

    f.decoder.biases.back().setConstant(20.0);
    const Image sat = decode_rgb(f, feat, mask);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x)
            if (mask.at(y, x) > 0.5)
                for (int c = 0; c < 3; ++c) CHECK(sat.at(y, x, c) > 1.0 - 1e-3);

    Image bad_feat(9, 9, 2, 0.0);
    CHECK_THROWS_AS(decode_rgb(f, bad_feat, mask), InputError);
}

TEST_CASE("render_texture is view-independent: permuted G-buffer, same colors") {
    TriplaneField f = make_texture_field(12, 6, {16}, 13);
    GBuffer gb = rasterize_gbuffer(facing_quad(), head_on(21));
    GBuffer permuted = gb;
    // Reverse the pixel order: same surface points visited from a different
    // "view"; colors must match the originals exactly.
    const int n = 21 * 21;
    for (int i = 0; i < n; ++i) {
        const int j = n - 1 - i;
        for (int c = 0; c < 3; ++c) {
            permuted.coord.data[i * 3 + c] = gb.coord.data[j * 3 + c];
            permuted.normal.data[i * 3 + c] = gb.normal.data[j * 3 + c];
        }
        permuted.mask.data[i] = gb.mask.data[j];
    }
    const Image a = render_texture(f, gb);
    const Image b = render_texture(f, permuted);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c)
            CHECK(a.data[i * 3 + c] ==
                  doctest::Approx(b.data[(n - 1 - i) * 3 + c]).epsilon(1e-12));
}

TEST_CASE("background field values never influence foreground outputs") {
    TriplaneField f = make_texture_field(10, 4, {12}, 17);
    GBuffer gb = rasterize_gbuffer(facing_quad(0.6), head_on(19));
    const Image base = render_texture(f, gb);
    GBuffer scrambled = gb;
    Rng rng(19);
    for (int y = 0; y < 19; ++y)
        for (int x = 0; x < 19; ++x)
            if (!gb.covered(y, x)) scrambled.coord.set_pixel3(y, x, rng.normal3());
    const Image after = render_texture(f, scrambled);
    for (int y = 0; y < 19; ++y)
        for (int x = 0; x < 19; ++x)
            if (gb.covered(y, x))
                for (int c = 0; c < 3; ++c) CHECK(after.at(y, x, c) == base.at(y, x, c));
}

TEST_CASE("vertex colors: constant field, PLY round trip, 1x1 render spot-check") {
    TriplaneField f = make_texture_field(8, 4, {8}, 23);
    for (auto& w : f.decoder.weights) w.setZero();
    for (auto& b : f.decoder.biases) b.setZero();
    f.decoder.biases.back() << 2.0, 0.0, -2.0;

    const Mesh quad = facing_quad();
    const auto colors = vertex_colors(quad, f);
    REQUIRE(colors.size() == 4);
    for (const auto& c : colors) CHECK((c - colors[0]).norm() < 1e-12);

    const auto tmp = std::filesystem::temp_directory_path() / "meshfit_tex_roundtrip.ply";
    save_ply(quad, tmp.string(), &colors);
    std::vector<Vec3> loaded_colors;
    const Mesh loaded = load_ply(tmp.string(), &loaded_colors);
    REQUIRE(loaded_colors.size() == colors.size());
    for (size_t i = 0; i < colors.size(); ++i)
        CHECK((loaded_colors[i] - colors[i]).cwiseAbs().maxCoeff() < 1.0 / 255.0 + 1e-9);
    std::filesystem::remove(tmp);

    // A 1x1 render aimed at a vertex sees (approximately) that vertex's color.
    TriplaneField fr = make_texture_field(10, 4, {12}, 29);
    const auto vc = vertex_colors(quad, fr);
    for (int vid = 0; vid < 4; ++vid) {
        const Vec3 target = quad.vertices[vid] * 0.999;  // just inside the quad
        const Camera cam = Camera::look_at(target + Vec3(0, 0, 1.0), target, Vec3(0, 1, 0),
                                           deg_to_rad(2.0), 1, 1);
        const GBuffer gb = rasterize_gbuffer(quad, cam);
        if (!gb.covered(0, 0)) continue;
        const Image px = render_texture(fr, gb);
        CHECK((px.pixel3(0, 0) - vc[vid]).norm() < 0.05);  // decoder continuity
    }
}

TEST_SUITE_END();
