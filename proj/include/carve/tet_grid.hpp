#pragma once

#include <array>
#include <string>
#include <vector>

#include "carve/math.hpp"

namespace carve {

// Deformable tetrahedral lattice: a cubic grid where every cell is split
// into 6 tetrahedra sharing the cell's main diagonal. Each lattice vertex
// carries the two optimizable parameters of the surface representation — a
// scalar SDF sample (negative inside) and a bounded position offset. The
// surface lives where the interpolated SDF crosses zero.
struct TetGrid {
    int resolution = 0;  // cells per axis
    Box3 box;
    std::vector<Vec3> verts;                 // (resolution+1)^3 lattice positions
    std::vector<std::array<int, 4>> tets;    // 6 * resolution^3, positively oriented
    std::vector<double> sdf;                 // per vertex, negative inside
    std::vector<Vec3> offsets;               // per vertex, |offset|_inf <= offset_bound
    double offset_bound = 0.0;               // world units, per axis

    int vertex_count() const { return static_cast<int>(verts.size()); }
    Vec3 deformed(int vi) const { return verts[vi] + offsets[vi]; }
};

// Lattice indexing: x fastest, then y, then z.
inline int grid_vertex_index(const TetGrid& g, int x, int y, int z) {
    const int n1 = g.resolution + 1;
    return (z * n1 + y) * n1 + x;
}

// Cell edge lengths (extent / resolution per axis).
Vec3 cell_size(const TetGrid& g);

// Builds the lattice over `box` with sdf = +1 everywhere (all outside) and
// zero offsets. offset_bound defaults to 0.45 x the smallest cell edge,
// which keeps tetrahedra from inverting under any in-bound offsets in
// practice. Throws validation_error when resolution < 2.
TetGrid build_grid(int resolution, const Box3& box);

// Throws validation_error: array sizes consistent, tet indices in range,
// offsets within bound, every deformed tet positively oriented.
void validate(const TetGrid& g);

// Signed volume of deformed tet t (positive = valid orientation).
double deformed_tet_volume(const TetGrid& g, int t);

// Projects the parameters back into the valid set after an optimizer step:
// clamps each offset to [-offset_bound, offset_bound] per axis, then — in
// the rare event a deformed tet still has non-positive volume — repeatedly
// halves the offsets of the vertices of every inverted tet until all tets
// are positive. Deterministic for any thread count. Returns the number of
// halving passes (0 when clamping alone sufficed).
int clamp_offsets(TetGrid& g);

// Versioned binary checkpoint: header + raw little-endian 64-bit float
// arrays for sdf and offsets. Round-trips parameters bit-exactly.
void save_grid(const std::string& path, const TetGrid& g);
TetGrid load_grid(const std::string& path);

}  // namespace carve
