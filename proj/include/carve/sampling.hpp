#pragma once

#include <vector>

#include "carve/mesh.hpp"
#include "carve/rng.hpp"
#include "carve/tet_grid.hpp"

namespace carve {

// A supervision point for SDF fitting: a position and the ground-truth
// signed distance to the target mesh at that position.
struct SamplePoint {
    Vec3 p{0, 0, 0};
    double sdf_gt = 0.0;
};

// Uniform point on the mesh surface: face chosen with probability
// proportional to area, then a uniform barycentric draw.
Vec3 sample_on_surface(const TriMesh& mesh, const std::vector<double>& cumulative_area,
                       Rng& rng);

// Area-weighted cumulative face areas (last entry = total area).
std::vector<double> cumulative_face_areas(const TriMesh& mesh);

// Supervision set for fitting a grid SDF to a watertight mesh: 80% of the
// points are surface samples displaced by an isotropic Gaussian of the
// given sigma (concentrating supervision where the surface detail lives),
// the remaining 20% are uniform in `box` so the far field keeps its sign.
// Every point is annotated with its exact signed distance. Deterministic
// per seed. Points are clamped to `box` so they stay inside the grid.
std::vector<SamplePoint> sample_near_surface(const TriMesh& mesh, const Box3& box,
                                             int n, double sigma,
                                             std::uint64_t seed);

}  // namespace carve
