#pragma once

#include "meshfit/field.hpp"
#include "meshfit/raster.hpp"

namespace meshfit {

// The texture field is a TriplaneField with a 3-channel sigmoid head; colors
// are queried per pixel at the rasterized world coordinates.

TriplaneField make_texture_field(int plane_res, int channels, const std::vector<int>& hidden,
                                 uint64_t seed);

/// World-coordinate image and coverage mask for a view (the coord/mask
/// channels of the G-buffer).
void rasterize_coordinates(const Mesh& mesh, const Camera& camera, Image& coord, Image& mask,
                           int threads = 1);

/// Per-foreground-pixel triplane features at the coordinate image;
/// background pixels carry zero features.
Image query_texture(const TriplaneField& field, const Image& coord_img, const Image& mask,
                    int threads = 1);

/// Decoder + sigmoid on a feature image; background stays black.
Image decode_rgb(const TriplaneField& field, const Image& features, const Image& mask);

/// Fused coord -> feature -> RGB render of one view.
Image render_texture(const TriplaneField& field, const GBuffer& gbuffer, int threads = 1);

/// Field color at each mesh vertex (for PLY vertex-color export).
std::vector<Vec3> vertex_colors(const Mesh& mesh, const TriplaneField& field, int threads = 1);

}  // namespace meshfit
