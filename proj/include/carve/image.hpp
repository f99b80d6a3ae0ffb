#pragma once

#include <string>
#include <vector>

#include "carve/math.hpp"

namespace carve {

// What an image plane stores decides its invariants:
//  - color:      3 channels, values in [0,1]
//  - normal:     3 channels, world-space unit normals encoded (n+1)/2;
//                background pixels are all-zero
//  - silhouette: 1 channel, values exactly 0 or 1
//  - pose:       3 channels, skeleton projection (discs + limb lines)
enum class ImageKind { color, normal, silhouette, pose };

const char* to_string(ImageKind kind);

// Row-major float image, row 0 at the top. data[(row*width + col)*channels + c].
struct ImagePlane {
    int width = 0;
    int height = 0;
    int channels = 0;
    ImageKind kind = ImageKind::color;
    std::vector<float> data;

    ImagePlane() = default;
    ImagePlane(int w, int h, ImageKind k);

    float& at(int row, int col, int c) { return data[(row * width + col) * channels + c]; }
    float at(int row, int col, int c) const {
        return data[(row * width + col) * channels + c];
    }
    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(width) * height;
    }
};

int channels_for(ImageKind kind);

// Throws validation_error on a violated invariant (dimension/channel
// mismatches, non-finite values, out-of-range color, non-binary silhouette).
// Normal unit length is a soft property checked by count_non_unit_normals.
void validate(const ImagePlane& img);

// Encode/decode the normal convention.
inline Vec3 decode_normal(float r, float g, float b) {
    return Vec3(2.0 * r - 1.0, 2.0 * g - 1.0, 2.0 * b - 1.0);
}
inline void encode_normal(const Vec3& n, float* rgb) {
    rgb[0] = static_cast<float>(0.5 * (n.x() + 1.0));
    rgb[1] = static_cast<float>(0.5 * (n.y() + 1.0));
    rgb[2] = static_cast<float>(0.5 * (n.z() + 1.0));
}

// Pixels whose decoded vector deviates from unit length by more than `tol`.
// With a mask (1-channel, same size) only mask==1 pixels are checked;
// without one, background (all-zero encoded) pixels are skipped.
int count_non_unit_normals(const ImagePlane& normal, const ImagePlane* mask = nullptr,
                           double tol = 1e-3);

}  // namespace carve
