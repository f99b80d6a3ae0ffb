#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "carve/camera.hpp"
#include "carve/image.hpp"
#include "carve/marching_tets.hpp"
#include "carve/tet_grid.hpp"

namespace carve {

// One supervision view: camera, target normal map, foreground mask.
struct ViewTarget {
    Camera cam;
    ImagePlane normal;  // kind=normal, encoded (n+1)/2
    ImagePlane mask;    // kind=silhouette
};

enum class CameraSampling { rig, uniform_sphere };

struct SculptConfig {
    int iters = 100;
    double lr = 0.01;
    int views_per_iter = 1;
    CameraSampling sampling = CameraSampling::rig;
    std::uint64_t seed = 0;
    double laplacian_weight = 0.0;  // uniform Laplacian regularizer, off by default

    // rig mode: the cameras cycled round-robin.
    std::vector<Camera> rig;
    // uniform_sphere mode: random azimuth in [0°,360°), elevation in
    // [-15°,30°] (stays near the horizontal band the targets cover), fixed
    // radius around target_center.
    double radius = 2.7;
    Vec3 target_center{0, 0, 0};
    int image_size = 512;
    double fov_y_deg = 40.0;
};

void validate(const SculptConfig& cfg);

// The camera for one optimization step. Rig mode cycles the list; uniform
// mode is a pure function of (seed, iteration), so repeated calls agree.
Camera sample_view(const SculptConfig& cfg, int iteration);

// Mean squared difference of decoded normals over pixels where mask == 1
// (mask is typically the intersection of the rendered and target
// foregrounds); 0 when the mask is empty. The companion _grad returns
// d(loss)/d(decoded rendered normal) as a raw 3-channel plane, suitable for
// backward_normal.
double normal_loss(const ImagePlane& rendered, const ImagePlane& target,
                   const ImagePlane& mask);
ImagePlane normal_loss_grad(const ImagePlane& rendered, const ImagePlane& target,
                            const ImagePlane& mask);

// mask_a AND mask_b, both silhouette kind.
ImagePlane mask_intersection(const ImagePlane& mask_a, const ImagePlane& mask_b);

// Mean squared uniform-Laplacian length — Σ_v |mean(neighbors) - v|² / V —
// and its exact gradient, used as the optional smoothness term.
double laplacian_energy(const TriMesh& mesh);
std::vector<Vec3> laplacian_energy_grad(const TriMesh& mesh);

struct SculptReport {
    std::vector<double> loss_trace;  // one entry per iteration
    int iterations = 0;
};

// Carves surface detail into the grid: per iteration, extract the surface
// with marching tetrahedra, render it from the next views in the rotation,
// compare against the target normal maps (masked mean squared error, mask =
// rendered silhouette ∩ target mask, averaged over the views), and step
// (sdf, offsets) with Adam through the frozen-coverage render gradients and
// the marching-tetrahedra vertex Jacobians. Offsets are clamped back into
// bound after every step. Returns the final extracted mesh. Throws
// validation_error if the surface vanishes mid-optimization.
std::pair<TriMesh, SculptReport> sculpt(TetGrid& grid,
                                        const std::vector<ViewTarget>& targets,
                                        const SculptConfig& cfg);

}  // namespace carve
