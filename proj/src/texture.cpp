#include "meshfit/texture.hpp"

namespace meshfit {

TriplaneField make_texture_field(int plane_res, int channels, const std::vector<int>& hidden,
                                 uint64_t seed) {
    return TriplaneField::create(plane_res, channels, hidden, OutputKind::Sigmoid, 3, seed);
}

void rasterize_coordinates(const Mesh& mesh, const Camera& camera, Image& coord, Image& mask,
                           int threads) {
    GBuffer gb = rasterize_gbuffer(mesh, camera, threads);
    coord = std::move(gb.coord);
    mask = std::move(gb.mask);
}

namespace {
std::vector<Vec3> gather_foreground(const Image& coord_img, const Image& mask,
                                    std::vector<int64_t>& pixel_of) {
    std::vector<Vec3> pts;
    pixel_of.clear();
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x) > 0.5) {
                pts.push_back(coord_img.pixel3(y, x));
                pixel_of.push_back(static_cast<int64_t>(y) * mask.width + x);
            }
    return pts;
}
}  // namespace

Image query_texture(const TriplaneField& field, const Image& coord_img, const Image& mask,
                    int threads) {
    if (coord_img.channels != 3) throw InputError("query_texture: coord image must be HxWx3");
    if (coord_img.height != mask.height || coord_img.width != mask.width)
        throw InputError("query_texture: mask shape mismatch");
    Image features(coord_img.height, coord_img.width, field.channels, 0.0);
    std::vector<int64_t> pixel_of;
    const std::vector<Vec3> pts = gather_foreground(coord_img, mask, pixel_of);
    if (pts.empty()) return features;
    // sample_triplane batched: evaluate features only (no decoder).
    parallel_chunks(static_cast<int64_t>(pts.size()), 4096, threads, [&](int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            const VecX f = sample_triplane(field, pts[i]);
            const int64_t px = pixel_of[i];
            for (int c = 0; c < field.channels; ++c)
                features.data[px * field.channels + c] = f[c];
        }
    });
    return features;
}

Image decode_rgb(const TriplaneField& field, const Image& features, const Image& mask) {
    if (features.channels != field.decoder.input_width())
        throw InputError("decode_rgb: feature width does not match decoder input");
    if (field.decoder.output_width() != 3 || field.decoder.output != OutputKind::Sigmoid)
        throw InputError("decode_rgb: field has no RGB head");
    Image rgb(features.height, features.width, 3, 0.0);
    std::vector<int64_t> pixels;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x) > 0.5) pixels.push_back(static_cast<int64_t>(y) * mask.width + x);
    if (pixels.empty()) return rgb;
    MatX in(features.channels, pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i)
        for (int c = 0; c < features.channels; ++c)
            in(c, i) = features.data[pixels[i] * features.channels + c];
    const MatX out = mlp_forward(field.decoder, in);
    for (size_t i = 0; i < pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) rgb.data[pixels[i] * 3 + c] = out(c, i);
    return rgb;
}

Image render_texture(const TriplaneField& field, const GBuffer& gbuffer, int threads) {
    Image rgb(gbuffer.height, gbuffer.width, 3, 0.0);
    std::vector<int64_t> pixel_of;
    const std::vector<Vec3> pts = gather_foreground(gbuffer.coord, gbuffer.mask, pixel_of);
    if (pts.empty()) return rgb;
    const MatX out = field_eval(field, pts, threads);
    for (size_t i = 0; i < pts.size(); ++i)
        for (int c = 0; c < 3; ++c) rgb.data[pixel_of[i] * 3 + c] = out(c, i);
    return rgb;
}

std::vector<Vec3> vertex_colors(const Mesh& mesh, const TriplaneField& field, int threads) {
    const MatX out = field_eval(field, mesh.vertices, threads);
    std::vector<Vec3> colors(mesh.vertices.size());
    for (size_t i = 0; i < colors.size(); ++i)
        colors[i] = Vec3(out(0, i), out(1, i), out(2, i));
    return colors;
}

}  // namespace meshfit
