#include "carve/image.hpp"

#include <cmath>

#include "carve/error.hpp"

namespace carve {

const char* to_string(ImageKind kind) {
    switch (kind) {
        case ImageKind::color: return "color";
        case ImageKind::normal: return "normal";
        case ImageKind::silhouette: return "silhouette";
        case ImageKind::pose: return "pose";
    }
    return "?";
}

int channels_for(ImageKind kind) {
    return kind == ImageKind::silhouette ? 1 : 3;
}

ImagePlane::ImagePlane(int w, int h, ImageKind k)
    : width(w), height(h), channels(channels_for(k)), kind(k) {
    if (w <= 0 || h <= 0)
        throw validation_error("image: dimensions must be positive, got " +
                               std::to_string(w) + "x" + std::to_string(h));
    data.assign(static_cast<std::size_t>(w) * h * channels, 0.0f);
}

void validate(const ImagePlane& img) {
    if (img.width <= 0 || img.height <= 0)
        throw validation_error("image: non-positive dimensions " +
                               std::to_string(img.width) + "x" + std::to_string(img.height));
    if (img.channels != channels_for(img.kind))
        throw validation_error(std::string("image: kind '") + to_string(img.kind) +
                               "' requires " + std::to_string(channels_for(img.kind)) +
                               " channels, has " + std::to_string(img.channels));
    const std::size_t expect =
        static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (img.data.size() != expect)
        throw validation_error("image: data size " + std::to_string(img.data.size()) +
                               " != width*height*channels = " + std::to_string(expect));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const float v = img.data[i];
        if (!std::isfinite(v))
            throw validation_error("image: non-finite value at flat index " +
                                   std::to_string(i));
        if (img.kind == ImageKind::silhouette && v != 0.0f && v != 1.0f)
            throw validation_error("image: silhouette value " + std::to_string(v) +
                                   " at flat index " + std::to_string(i) +
                                   " is neither 0 nor 1");
        if ((img.kind == ImageKind::color || img.kind == ImageKind::pose) &&
            (v < 0.0f || v > 1.0f))
            throw validation_error("image: value " + std::to_string(v) +
                                   " at flat index " + std::to_string(i) +
                                   " outside [0,1]");
    }
}

int count_non_unit_normals(const ImagePlane& normal, const ImagePlane* mask,
                           double tol) {
    if (normal.kind != ImageKind::normal)
        throw contract_error("count_non_unit_normals: plane kind is not 'normal'");
    if (mask && (mask->width != normal.width || mask->height != normal.height))
        throw contract_error("count_non_unit_normals: mask dimensions differ");
    int bad = 0;
    for (int r = 0; r < normal.height; ++r) {
        for (int c = 0; c < normal.width; ++c) {
            if (mask) {
                if (mask->at(r, c, 0) == 0.0f) continue;
            } else {
                if (normal.at(r, c, 0) == 0.0f && normal.at(r, c, 1) == 0.0f &&
                    normal.at(r, c, 2) == 0.0f)
                    continue;  // background
            }
            const Vec3 n =
                decode_normal(normal.at(r, c, 0), normal.at(r, c, 1), normal.at(r, c, 2));
            if (std::abs(n.norm() - 1.0) > tol) ++bad;
        }
    }
    return bad;
}

}  // namespace carve
