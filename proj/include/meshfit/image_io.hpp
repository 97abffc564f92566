#pragma once

#include "meshfit/core.hpp"
#include "meshfit/shading.hpp"

#include <string>

namespace meshfit {

/// 8-bit PNG (gray or RGB); values clamped from [0,1].
void save_png8(const Image& img, const std::string& path);
/// 16-bit PNG; used for mask and (n+1)/2-encoded normal dumps.
void save_png16(const Image& img, const std::string& path);
/// Any gray/RGB(A) PNG; values scaled to [0,1]; alpha dropped.
Image load_png(const std::string& path);

/// Raw f32 dump: magic "FRAW", u32 version, u32 width, u32 height,
/// u32 channels, then row-major little-endian f32 samples.
void save_raw_f32(const Image& img, const std::string& path);
Image load_raw_f32(const std::string& path);

/// Radiance RGBE (.hdr), lat-long. Reader handles RLE and flat scanlines;
/// writer emits flat scanlines.
void save_hdr(const Image& img, const std::string& path);
Image load_hdr(const std::string& path);

EnvironmentMap environment_from_image(const Image& img);
Image environment_to_image(const EnvironmentMap& env);

/// Reinhard + gamma 2.2 preview mapping for HDR light maps.
Image tonemap(const Image& hdr);

/// Normal-map encodings for image dumps: n <-> (n+1)/2.
Image encode_normal_map(const Image& normals);
Image decode_normal_map(const Image& encoded);

}  // namespace meshfit
