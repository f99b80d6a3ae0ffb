#pragma once

#include <utility>
#include <vector>

#include "carve/atlas.hpp"
#include "carve/mesh.hpp"

namespace carve {

// One semantic piece of a body mesh, produced by `partition`.
struct MeshPart {
    int label = 0;
    TriMesh mesh;
};

// Thresholds for the built-in body-part labeler, expressed as fractions of
// the bounding-box height. Vertices below `leg_band` are legs (split
// left/right by the sign of x relative to the box center); above it,
// vertices whose |x| offset from the center exceeds `arm_offset` are arms;
// the rest is trunk. Defaults match the shipped humanoid test asset.
struct LabelerConfig {
    double leg_band = 0.45;
    double arm_offset = 0.18;
};

// Per-vertex part labels for a y-up body mesh. Supported part counts:
//  1 -> everything label 0
//  2 -> upper body 0, lower body 1
//  5 -> trunk 0, left arm 1, right arm 2, left leg 3, right leg 4
// ("left" is the subject's left, +x.) Other counts throw validation_error;
// callers wanting a custom split pass explicit labels to `partition`.
std::vector<int> heuristic_labels(const TriMesh& mesh, int gamma,
                                  const LabelerConfig& cfg = {});

// Splits the mesh into `gamma` parts by per-vertex label. When `labels` is
// empty, `heuristic_labels` supplies them. A face joins the majority label
// of its three corners (ties -> lowest label); vertices on part boundaries
// are duplicated into every part that uses them. Each face of the input
// lands in exactly one part; an empty part is a validation_error naming the
// label. Part vertex order follows the original index order.
std::vector<MeshPart> partition(const TriMesh& mesh, int gamma,
                                const std::vector<int>& labels = {});

// Largest-eigenvector principal axis of the part's vertex positions, with
// the sign fixed deterministically (positive y component, falling back to
// +x then +z for horizontal axes).
Vec3 principal_axis(const TriMesh& part);

// Cylindrical parameterization about `axis`. The part is rotated so the
// axis maps to +y and centered on its centroid; then u = angle/2pi + 0.5
// (so a vertex on the +z side of the axis gets u = 0.5) and v = height
// normalized to [0,1]. Faces that straddle the angular seam are split by
// duplicating the offending corners with u shifted by +-1, choosing for
// each face the branch closest to the face's mean angle; vertices left
// unreferenced by the rewiring are dropped. Returned UVs are "raw": v is
// in [0,1] but u may extend past [0,1) on seam duplicates — `pack_atlas`
// rescales every chart into its final [0,1]^2 rectangle.
// Throws validation_error for an empty part or zero height extent.
std::vector<Vec2> cylinder_unwrap(TriMesh& part, const Vec3& axis);

// A merged mesh with final per-vertex UVs plus the chart rectangle of each
// part in UV space (same order as the input parts).
struct PackedMesh {
    TriMesh mesh;
    std::vector<Box2> chart_boxes;
};

// Shelf-packs one chart per part into a square atlas of `atlas_size`
// texels. Chart rectangles get their aspect from the part's physical
// dimensions (mean 3D length per unit of raw u and v), a single global
// scale chosen by binary search, a two-texel gutter between charts and a
// one-texel margin to the atlas border. The merged mesh concatenates the
// parts in order; `part_labels` records each vertex's part index. Throws
// validation_error when the atlas cannot hold the charts at any scale
// ("atlas too small").
PackedMesh pack_atlas(const std::vector<std::pair<TriMesh, std::vector<Vec2>>>& parts,
                      int atlas_size);

// Full unwrap stage: partition -> per-part principal-axis cylinder unwrap
// (parts processed in parallel) -> pack_atlas.
PackedMesh unwrap_mesh(const TriMesh& mesh, int gamma,
                       const std::vector<int>& labels, int atlas_size,
                       const LabelerConfig& cfg = {});

}  // namespace carve
