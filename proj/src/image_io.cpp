#include "meshfit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace meshfit {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void save_png_impl(const Image& img, const std::string& path, int bit_depth) {
    if (img.channels != 1 && img.channels != 3)
        throw InputError("PNG write: need 1 or 3 channels");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw InputError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw InputError("PNG write failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, bit_depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const double maxval = bit_depth == 8 ? 255.0 : 65535.0;
    if (bit_depth == 8) {
        std::vector<png_byte> row(static_cast<size_t>(img.width) * img.channels);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    row[static_cast<size_t>(x) * img.channels + c] = static_cast<png_byte>(
                        std::lround(std::clamp(img.at(y, x, c), 0.0, 1.0) * maxval));
            png_write_row(png, row.data());
        }
    } else {
        std::vector<uint16_t> row(static_cast<size_t>(img.width) * img.channels);
        png_set_swap(png);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    row[static_cast<size_t>(x) * img.channels + c] = static_cast<uint16_t>(
                        std::lround(std::clamp(img.at(y, x, c), 0.0, 1.0) * maxval));
            png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
        }
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_png8(const Image& img, const std::string& path) { save_png_impl(img, path, 8); }
void save_png16(const Image& img, const std::string& path) { save_png_impl(img, path, 16); }

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw InputError("cannot open '" + path + "'");
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw InputError("'" + path + "' is not a PNG");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("PNG read failed for '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int ch = png_get_channels(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InputError("'" + path + "': unsupported channel count after decode");
    }
    Image img(h, w, ch, 0.0);
    const double scale = out_depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        if (out_depth == 8) {
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c)
                    img.at(y, x, c) = row[static_cast<size_t>(x) * ch + c] * scale;
        } else {
            const uint16_t* r16 = reinterpret_cast<const uint16_t*>(row.data());
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < ch; ++c)
                    img.at(y, x, c) = r16[static_cast<size_t>(x) * ch + c] * scale;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

// ---------------------------------------------------------------------------
// Raw f32
// ---------------------------------------------------------------------------

void save_raw_f32(const Image& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os.write("FRAW", 4);
    const uint32_t version = 1, w = img.width, h = img.height, c = img.channels;
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&w), 4);
    os.write(reinterpret_cast<const char*>(&h), 4);
    os.write(reinterpret_cast<const char*>(&c), 4);
    for (double v : img.data) {
        const float f = static_cast<float>(v);
        os.write(reinterpret_cast<const char*>(&f), 4);
    }
    if (!os) throw InputError("write failed for '" + path + "'");
}

Image load_raw_f32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FRAW", 4) != 0)
        throw InputError("'" + path + "' is not a raw f32 dump (bad magic)");
    uint32_t version, w, h, c;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&w), 4);
    is.read(reinterpret_cast<char*>(&h), 4);
    is.read(reinterpret_cast<char*>(&c), 4);
    if (!is || version != 1 || w == 0 || h == 0 || c == 0 || c > 16)
        throw InputError("'" + path + "': bad raw header");
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), 0.0);
    for (double& v : img.data) {
        float f;
        is.read(reinterpret_cast<char*>(&f), 4);
        v = f;
    }
    if (!is) throw InputError("'" + path + "': truncated raw file");
    return img;
}

// ---------------------------------------------------------------------------
// Radiance RGBE
// ---------------------------------------------------------------------------

namespace {

void float_to_rgbe(unsigned char rgbe[4], double r, double g, double b) {
    const double v = std::max({r, g, b});
    if (v < 1e-32) {
        rgbe[0] = rgbe[1] = rgbe[2] = rgbe[3] = 0;
        return;
    }
    int e;
    const double m = std::frexp(v, &e);
    const double scale = m * 256.0 / v;
    rgbe[0] = static_cast<unsigned char>(r * scale);
    rgbe[1] = static_cast<unsigned char>(g * scale);
    rgbe[2] = static_cast<unsigned char>(b * scale);
    rgbe[3] = static_cast<unsigned char>(e + 128);
}

Vec3 rgbe_to_float(const unsigned char rgbe[4]) {
    if (rgbe[3] == 0) return Vec3::Zero();
    const double f = std::ldexp(1.0, static_cast<int>(rgbe[3]) - (128 + 8));
    return Vec3(rgbe[0] * f, rgbe[1] * f, rgbe[2] * f);
}

}  // namespace

void save_hdr(const Image& img, const std::string& path) {
    if (img.channels != 3) throw InputError("HDR write: need 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path + "' for writing");
    os << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n";
    os << "-Y " << img.height << " +X " << img.width << "\n";
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            unsigned char rgbe[4];
            float_to_rgbe(rgbe, img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            os.write(reinterpret_cast<const char*>(rgbe), 4);
        }
    if (!os) throw InputError("write failed for '" + path + "'");
}

Image load_hdr(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || (line.rfind("#?", 0) != 0))
        throw InputError("'" + path + "' is not a Radiance HDR file");
    // Header lines until blank, then the resolution line.
    while (std::getline(is, line) && !line.empty()) {
    }
    if (!std::getline(is, line)) throw InputError("'" + path + "': missing resolution line");
    int w = 0, h = 0;
    if (std::sscanf(line.c_str(), "-Y %d +X %d", &h, &w) != 2 || w <= 0 || h <= 0)
        throw InputError("'" + path + "': unsupported resolution line '" + line + "'");

    Image img(h, w, 3, 0.0);
    std::vector<unsigned char> scan(static_cast<size_t>(w) * 4);
    for (int y = 0; y < h; ++y) {
        unsigned char head[4];
        is.read(reinterpret_cast<char*>(head), 4);
        if (!is) throw InputError("'" + path + "': truncated HDR");
        if (head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == w && w >= 8 &&
            w < 32768) {
            // New-style RLE: four component planes.
            for (int c = 0; c < 4; ++c) {
                int x = 0;
                while (x < w) {
                    const int code = is.get();
                    if (code < 0) throw InputError("'" + path + "': truncated RLE scanline");
                    if (code > 128) {
                        const int count = code - 128;
                        const int value = is.get();
                        if (value < 0 || x + count > w)
                            throw InputError("'" + path + "': bad RLE run");
                        for (int k = 0; k < count; ++k)
                            scan[static_cast<size_t>(x++) * 4 + c] =
                                static_cast<unsigned char>(value);
                    } else {
                        if (x + code > w) throw InputError("'" + path + "': bad RLE literal");
                        for (int k = 0; k < code; ++k) {
                            const int value = is.get();
                            if (value < 0) throw InputError("'" + path + "': truncated RLE");
                            scan[static_cast<size_t>(x++) * 4 + c] =
                                static_cast<unsigned char>(value);
                        }
                    }
                }
            }
        } else {
            // Flat scanline; the first pixel is already in head.
            std::memcpy(scan.data(), head, 4);
            is.read(reinterpret_cast<char*>(scan.data() + 4),
                    static_cast<std::streamsize>(scan.size() - 4));
            if (!is) throw InputError("'" + path + "': truncated HDR scanline");
        }
        for (int x = 0; x < w; ++x) {
            const Vec3 rgb = rgbe_to_float(&scan[static_cast<size_t>(x) * 4]);
            img.set_pixel3(y, x, rgb);
        }
    }
    return img;
}

EnvironmentMap environment_from_image(const Image& img) {
    if (img.channels != 3) throw InputError("environment map image must have 3 channels");
    EnvironmentMap env;
    env.height = img.height;
    env.width = img.width;
    env.data = img.data;
    env.validate();
    return env;
}

Image environment_to_image(const EnvironmentMap& env) {
    Image img(env.height, env.width, 3, 0.0);
    img.data = env.data;
    return img;
}

Image tonemap(const Image& hdr) {
    Image out = hdr;
    for (double& v : out.data) {
        const double t = std::max(0.0, v);
        v = std::pow(t / (1.0 + t), 1.0 / 2.2);
    }
    return out;
}

Image encode_normal_map(const Image& normals) {
    Image out = normals;
    for (double& v : out.data) v = 0.5 * (v + 1.0);
    return out;
}

Image decode_normal_map(const Image& encoded) {
    Image out = encoded;
    for (double& v : out.data) v = 2.0 * v - 1.0;
    return out;
}

}  // namespace meshfit
