#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <vector>

#include "carve/error.hpp"
#include "carve/io.hpp"

namespace carve {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// ---------------------------------------------------------------------------
// PFM: "PF"/"Pf" header, width height, negative scale = little-endian,
// scanlines stored bottom-to-top. Round trips float data bit-exactly.
// ---------------------------------------------------------------------------

ImagePlane load_pfm(const std::string& path, ImageKind kind) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("load_image: cannot open '" + path + "'");
    char magic[3] = {0, 0, 0};
    int w = 0, h = 0;
    double scale = 0.0;
    if (std::fscanf(f, "%2s %d %d %lf", magic, &w, &h, &scale) != 4) {
        std::fclose(f);
        throw io_error(path + ": malformed PFM header");
    }
    const bool rgb = std::strcmp(magic, "PF") == 0;
    if (!rgb && std::strcmp(magic, "Pf") != 0) {
        std::fclose(f);
        throw io_error(path + ": not a PFM file (magic '" + magic + "')");
    }
    if (w <= 0 || h <= 0 || scale >= 0.0) {
        std::fclose(f);
        throw io_error(path + ": unsupported PFM header (needs positive dims and "
                              "negative scale = little-endian)");
    }
    std::fgetc(f);  // single whitespace byte terminating the header

    const int channels = rgb ? 3 : 1;
    if (channels != channels_for(kind)) {
        std::fclose(f);
        throw io_error(path + ": PFM has " + std::to_string(channels) +
                       " channels but kind '" + to_string(kind) + "' needs " +
                       std::to_string(channels_for(kind)));
    }
    ImagePlane img(w, h, kind);
    std::vector<float> row(static_cast<std::size_t>(w) * channels);
    for (int r = h - 1; r >= 0; --r) {  // bottom-up
        if (std::fread(row.data(), sizeof(float), row.size(), f) != row.size()) {
            std::fclose(f);
            throw io_error(path + ": truncated PFM payload");
        }
        std::memcpy(&img.data[static_cast<std::size_t>(r) * w * channels], row.data(),
                    row.size() * sizeof(float));
    }
    std::fclose(f);
    return img;
}

void save_pfm(const std::string& path, const ImagePlane& img) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("save_image: cannot open '" + path + "' for writing");
    std::fprintf(f, "%s\n%d %d\n-1.0\n", img.channels == 3 ? "PF" : "Pf", img.width,
                 img.height);
    for (int r = img.height - 1; r >= 0; --r)
        std::fwrite(&img.data[static_cast<std::size_t>(r) * img.width * img.channels],
                    sizeof(float), static_cast<std::size_t>(img.width) * img.channels, f);
    std::fclose(f);
}

// ---------------------------------------------------------------------------
// PNG via libpng: strictly 8-bit on both ends.
// ---------------------------------------------------------------------------

struct PngCloser {
    std::FILE* f = nullptr;
    ~PngCloser() {
        if (f) std::fclose(f);
    }
};

ImagePlane load_png(const std::string& path, ImageKind kind) {
    PngCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw io_error("load_image: cannot open '" + path + "'");

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        throw io_error(path + ": libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw io_error(path + ": PNG decode error");
    }
    png_init_io(png, fc.f);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth > 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw io_error(path + ": unsupported bit depth " + std::to_string(bit_depth) +
                       " (8-bit only)");
    }
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int want = channels_for(kind);

    // Normalize everything to 8-bit gray or rgb.
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    if (want == 3)
        png_set_gray_to_rgb(png);
    else
        png_set_rgb_to_gray_fixed(png, 1 /*error_action: silent*/, -1, -1);
    png_read_update_info(png, info);

    const int got = static_cast<int>(png_get_channels(png, info));
    std::vector<unsigned char> rows(static_cast<std::size_t>(w) * h * got);
    std::vector<png_bytep> rowp(h);
    for (int r = 0; r < h; ++r)
        rowp[r] = rows.data() + static_cast<std::size_t>(r) * w * got;
    png_read_image(png, rowp.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImagePlane img(w, h, kind);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<float>(rows[i]) / 255.0f;

    if (kind == ImageKind::silhouette) {
        for (std::size_t i = 0; i < img.data.size(); ++i)
            if (rows[i] != 0 && rows[i] != 255)
                throw validation_error(path + ": silhouette PNG has a non-binary pixel (byte " +
                                       std::to_string(static_cast<int>(rows[i])) + ")");
    }
    validate(img);
    if (kind == ImageKind::normal) {
        const int bad = count_non_unit_normals(img);
        if (bad > 0)
            std::cerr << "warning: " << path << ": " << bad
                      << " foreground normal pixel(s) are not unit length (8-bit "
                         "quantization? prefer PFM for normal maps)\n";
    }
    return img;
}

void save_png(const std::string& path, const ImagePlane& img) {
    PngCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw io_error("save_image: cannot open '" + path + "' for writing");

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw io_error(path + ": libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw io_error(path + ": PNG encode error");
    }
    png_init_io(png, fc.f);
    // Fixed settings keep output bytes reproducible across runs.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> bytes(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const float v = std::clamp(img.data[i], 0.0f, 1.0f);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    std::vector<png_bytep> rowp(img.height);
    for (int r = 0; r < img.height; ++r)
        rowp[r] = bytes.data() + static_cast<std::size_t>(r) * img.width * img.channels;
    png_write_image(png, rowp.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

ImagePlane load_image(const std::string& path, ImageKind kind) {
    const std::string ext = lower_ext(path);
    if (ext == "pfm") {
        ImagePlane img = load_pfm(path, kind);
        validate(img);
        if (kind == ImageKind::normal) {
            const int bad = count_non_unit_normals(img);
            if (bad > 0)
                std::cerr << "warning: " << path << ": " << bad
                          << " foreground normal pixel(s) are not unit length\n";
        }
        return img;
    }
    if (ext == "png") return load_png(path, kind);
    throw io_error("load_image: unsupported extension '" + ext + "' for '" + path +
                   "' (png|pfm)");
}

void save_image(const std::string& path, const ImagePlane& img) {
    validate(img);
    const std::string ext = lower_ext(path);
    if (ext == "pfm") return save_pfm(path, img);
    if (ext == "png") return save_png(path, img);
    throw io_error("save_image: unsupported extension '" + ext + "' for '" + path +
                   "' (png|pfm)");
}

}  // namespace carve
