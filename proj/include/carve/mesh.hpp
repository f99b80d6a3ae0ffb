#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "carve/math.hpp"

namespace carve {

// Indexed triangle mesh. Faces are CCW when viewed from outside (all
// generators in this project produce outward orientation; `is_watertight`
// additionally verifies consistency). Two optional per-vertex attributes:
//  - part_labels: body-part id in [0, gamma) for the unwrap stage,
//  - uvs: final atlas coordinates in [0,1]^2 (set by pack_atlas).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<int> part_labels;  // empty, or one per vertex
    std::vector<Vec2> uvs;         // empty, or one per vertex

    bool has_labels() const { return !part_labels.empty(); }
    bool has_uvs() const { return !uvs.empty(); }
};

// Throws validation_error on the first violated invariant: face indices in
// range, no degenerate index triples, finite positions, attribute arrays
// sized per vertex, labels within [0, gamma) when gamma is given, UVs in
// [0,1]^2.
void validate(const TriMesh& mesh, std::optional<int> gamma = std::nullopt);

Box3 bounds(const TriMesh& mesh);

double face_area(const TriMesh& mesh, int face);
double surface_area(const TriMesh& mesh);

// Signed volume by the divergence theorem; positive for outward-oriented
// closed meshes.
double signed_volume(const TriMesh& mesh);

// Edges used by exactly one face. Zero for a closed surface.
int boundary_edge_count(const TriMesh& mesh);

// V - E + F (2 for a sphere-topology mesh).
int euler_characteristic(const TriMesh& mesh);

// Closed + consistently oriented: every undirected edge is shared by exactly
// two faces that traverse it in opposite directions.
bool is_watertight(const TriMesh& mesh);

// Geometric face normal (unnormalized cross product), and unit normals per
// vertex weighted by the face's interior angle at that vertex — robust to
// the sliver triangles marching tetrahedra emits. The _sums variant returns
// the accumulation before normalization, which the render backward pass
// differentiates through.
Vec3 face_normal_unnormalized(const TriMesh& mesh, int face);
std::vector<Vec3> angle_weighted_normal_sums(const TriMesh& mesh);
std::vector<Vec3> angle_weighted_vertex_normals(const TriMesh& mesh);

// Unique-vertex adjacency (undirected, sorted, deduplicated).
std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh);

}  // namespace carve
