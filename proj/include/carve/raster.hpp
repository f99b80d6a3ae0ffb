#pragma once

#include <optional>
#include <vector>

#include "carve/atlas.hpp"
#include "carve/camera.hpp"
#include "carve/image.hpp"
#include "carve/mesh.hpp"

namespace carve {

// Which face covers a pixel and where the pixel's view ray hits it.
// Barycentrics are perspective-correct: interpolating world-space vertex
// attributes with them reproduces the value at the ray-surface point.
struct PixelCoverage {
    int face = -1;  // -1: background
    double bary[3] = {0, 0, 0};
    double depth = 0;  // positive view-space distance
};

// One rendered view. `coverage` has one record per pixel in row-major
// order; silhouette is 1 exactly where coverage.face >= 0. Normal images
// hold unit normals encoded (n+1)/2; the color image is a bilinear atlas
// lookup at the interpolated UV. Background pixels are zero everywhere.
struct FrameBundle {
    int width = 0, height = 0;
    ImagePlane silhouette;
    std::optional<ImagePlane> normal;
    std::optional<ImagePlane> color;
    std::vector<PixelCoverage> coverage;
};

struct RenderRequest {
    bool normals = true;
    bool color = false;
    const TextureAtlas* atlas = nullptr;  // required when color is set
};

// Deterministic software rasterizer: pinhole projection, z-buffer, one
// sample per pixel center, no antialiasing, no backface culling. Faces with
// a vertex at or behind the camera plane are skipped (no near clipping).
// Depth ties go to the lower face index. Output is bit-identical across
// runs and thread counts: the image is cut into 32x32 tiles that own
// disjoint pixels, and each tile tests its faces in ascending index order.
// Throws validation_error when color is requested without UVs or atlas.
FrameBundle render(const TriMesh& mesh, const Camera& cam,
                   const RenderRequest& req = {});

// Single-loop serial implementation kept as the reference the parallel
// path is compared against (tests and the benchmark); same outputs.
FrameBundle render_reference(const TriMesh& mesh, const Camera& cam,
                             const RenderRequest& req = {});

// Throws validation_error when a bundle violates its own invariants
// (silhouette/coverage mismatch, bad barycentrics, non-positive depths).
void validate(const FrameBundle& bundle);

// Re-shade with coverage frozen: recompute the normal (resp. color) image
// from current vertex positions (resp. atlas texels) while keeping the
// stored pixel-to-face assignment and barycentrics. These are the forward
// maps the two backward passes below differentiate, and what their
// finite-difference checks perturb.
ImagePlane shade_normals(const FrameBundle& bundle, const TriMesh& mesh);
ImagePlane shade_color(const FrameBundle& bundle, const TriMesh& mesh,
                       const TextureAtlas& atlas);

// d(loss)/d(vertex positions) given d(loss)/d(decoded per-pixel normal) —
// `d_normal` carries raw gradient values in its 3 channels, zero outside
// the coverage of interest. Chain: per-pixel renormalization -> barycentric
// blend -> per-vertex normalization -> angle-weighted face accumulation ->
// positions. Coverage is frozen (no silhouette-boundary terms).
std::vector<Vec3> backward_normal(const FrameBundle& bundle, const TriMesh& mesh,
                                  const ImagePlane& d_normal);

// d(loss)/d(atlas texels) (flat size*size*3 array) given
// d(loss)/d(color image): each covered pixel routes its gradient to the 4
// texels of its bilinear stencil with the sampling weights.
std::vector<double> backward_color(const FrameBundle& bundle, const TriMesh& mesh,
                                   const TextureAtlas& atlas,
                                   const ImagePlane& d_color);

}  // namespace carve
