#pragma once

#include <vector>

#include "carve/image.hpp"
#include "carve/math.hpp"

namespace carve {

// Square RGB texture atlas plus the layout that produced it: one axis-
// aligned UV rectangle per body part (chart), kept at least two texels
// apart so bilinear lookups never bleed across parts.
//
// UV convention, used consistently by sampling, baking and unwrapping:
// u maps to columns and v to rows, both top-left anchored — texel
// (row, col) is centered at uv = ((col + 0.5)/size, (row + 0.5)/size).
struct TextureAtlas {
    int size = 0;                 // texels per side
    std::vector<float> texels;    // size*size*3 row-major rgb in [0,1]
    std::vector<Box2> chart_boxes;

    TextureAtlas() = default;
    TextureAtlas(int size_, float fill);

    float& at(int row, int col, int c) { return texels[(row * size + col) * 3 + c]; }
    float at(int row, int col, int c) const {
        return texels[(row * size + col) * 3 + c];
    }
    std::int64_t texel_count() const { return static_cast<std::int64_t>(size) * size; }
};

// Throws validation_error: positive size, texel array sized size²·3, values
// finite and in [0,1], chart boxes inside [0,1]² and pairwise separated by
// at least two texels.
void validate(const TextureAtlas& atlas);

// Bilinear lookup with edge clamp. The four taps and weights are exposed so
// gradient code can scatter along the exact sampling stencil.
struct BilinearTaps {
    int texel[4];      // row*size + col, clamped to the atlas
    double weight[4];  // non-negative, sum to 1
};
BilinearTaps bilinear_taps(int size, double u, double v);
Vec3 sample_bilinear(const TextureAtlas& atlas, double u, double v);

// Conversions to/from a color image (chart layout carried separately).
ImagePlane atlas_to_image(const TextureAtlas& atlas);
TextureAtlas atlas_from_image(const ImagePlane& img, std::vector<Box2> chart_boxes);

}  // namespace carve
