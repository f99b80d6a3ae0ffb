#pragma once

#include <array>
#include <vector>

#include "carve/mesh.hpp"
#include "carve/tet_grid.hpp"

namespace carve {

// Surface extraction result. Every output vertex lies on exactly one grid
// edge whose endpoint SDF values straddle zero; vertex_edges records that
// edge (smaller grid index first) so gradients can be routed back to the
// four grid parameters that placed the vertex.
struct MtResult {
    TriMesh mesh;
    std::vector<std::array<int, 2>> vertex_edges;
};

// Position of the zero crossing on grid edge (a, b):
//   p = (p_a * s_b - p_b * s_a) / (s_b - s_a),  p_i = deformed position.
// Exact for an SDF that is affine along the edge.
Vec3 edge_crossing(const TetGrid& g, int a, int b);

// Marching tetrahedra over the deformed grid. Each tet with mixed SDF signs
// (zero counts as outside) emits 1 or 2 triangles; vertices on shared edges
// are welded; winding is chosen so triangle normals point toward increasing
// SDF, i.e. outward with the negative-inside convention. The output is a
// pure function of the grid — independent of thread count and tet iteration
// order. Throws validation_error when the SDF has no sign change.
MtResult marching_tetrahedra(const TetGrid& g);

// Derivative of the crossing position on edge (a, b) with respect to the
// four parameters that define it. The offset derivatives are isotropic:
// d(crossing)/d(offset_a) = w_a * I. w_a + w_b == 1.
struct MtJacobian {
    double w_a = 0, w_b = 0;  // d p / d offset, scalar multiples of identity
    Vec3 dp_dsa, dp_dsb;      // d p / d sdf_a, d sdf_b
};
MtJacobian mt_vertex_jacobian(const TetGrid& g, int a, int b);

}  // namespace carve
