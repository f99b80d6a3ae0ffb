#pragma once

#include <array>
#include <functional>
#include <vector>

#include "carve/mesh.hpp"
#include "carve/tet_grid.hpp"

namespace carve {

// Signed distance queries against a watertight triangle mesh.
//  - magnitude: exact point-to-nearest-triangle distance, BVH-accelerated;
//  - sign: generalized winding number, evaluated exactly as the sum of
//    signed solid angles over all faces (O(faces) per query), > 0.5 means
//    inside and the distance is reported negative.
// Construction throws validation_error on a non-watertight mesh, where the
// sign would be undefined.
class MeshDistanceField {
public:
    explicit MeshDistanceField(const TriMesh& mesh);

    double unsigned_distance(const Vec3& p) const;
    double winding_number(const Vec3& p) const;
    double signed_distance(const Vec3& p) const;

private:
    struct Node {
        Box3 box;
        int left = -1, right = -1;  // interior: child node ids
        int begin = 0, end = 0;     // leaf: range into order_
        bool leaf() const { return right < 0; }
    };

    int build(int begin, int end, std::vector<Vec3>& centroids);

    std::vector<std::array<Vec3, 3>> tris_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// One-shot convenience wrapper (builds the acceleration structure per call;
// use MeshDistanceField for batches).
double signed_distance(const TriMesh& mesh, const Vec3& p);

// Exact distance from p to triangle abc (Ericson's closest-point walk).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c);

// Sets grid.sdf to the signed distance of each lattice vertex to the mesh.
// Distances come from the BVH for every vertex; the winding number is only
// evaluated inside a narrow band (distance <= one cell diagonal), because a
// lattice edge with both endpoints farther away than its own length cannot
// cross the surface — those signs are flood-filled from the band. Offsets
// are not touched (callers fit with offsets at zero).
void init_sdf_from_mesh(TetGrid& grid, const TriMesh& mesh);

// Sets grid.sdf = f(vertex position); for analytic test fields.
void init_sdf_from_function(TetGrid& grid, const std::function<double(const Vec3&)>& f);

}  // namespace carve
