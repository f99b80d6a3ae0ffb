#pragma once

#include <vector>

#include "carve/camera.hpp"
#include "carve/image.hpp"
#include "carve/mesh.hpp"
#include "carve/skeleton.hpp"

namespace carve {

// Horizontal camera rig: k_views cameras on a circle of the given radius
// around target_center, azimuths uniformly spanning [start, end] degrees
// (inclusive; a single view sits at azimuth_start). Azimuth is measured
// around +y with 0° on +z — the subject's front — and 90° on +x, so
// position = center + radius * (sin az, 0, cos az), with +y as up.
struct RigSpec {
    int k_views = 7;
    double radius = 2.7;
    double azimuth_start_deg = 0.0;
    double azimuth_end_deg = 180.0;
    int image_size = 512;
    double fov_y_deg = 40.0;
    Vec3 target_center{0, 0, 0};
    // Append a mirrored camera at 360° - az for every azimuth strictly
    // between 0° and 180°, covering the full circle with real geometry
    // instead of flipped images.
    bool mirror_to_360 = false;
};

// Throws validation_error: k_views >= 1, radius > 0, start < end,
// image_size > 0, fov in (0, 180).
void validate(const RigSpec& spec);

Vec3 azimuth_position(const RigSpec& spec, double azimuth_deg);

// Cameras in azimuth-sweep order (mirrored ones appended afterwards in the
// same order). view_tag: front for the camera(s) whose azimuth is nearest
// 0°/360°, back for nearest 180°, other otherwise; a camera that wins both
// is tagged front.
std::vector<Camera> instantiate_rig(const RigSpec& spec);

// Rescales the mesh in place so its height (y extent) is 1 and its bounding
// box is centered on the origin: p' = scale * (p - center). Returns the
// applied transform so callers can map other data (e.g. joints) the same
// way. Throws validation_error when the mesh has no y extent.
struct BodyTransform {
    double scale = 1.0;
    Vec3 center{0, 0, 0};
    Vec3 apply(const Vec3& p) const { return scale * (p - center); }
};
BodyTransform normalize_body(TriMesh& mesh);

// Renders the skeleton as a 2D pose image: bones first as lines of width
// image_height/256 px (colored by their child joint, bone[1]), then joints
// as filled discs of radius image_height/128 px, each joint index keyed to
// a fixed 32-entry palette (cycling beyond 32). Later primitives overpaint
// earlier ones, so output is deterministic. Throws validation_error naming
// the joint when one sits at or behind the camera plane.
ImagePlane project_skeleton(const Skeleton& skel, const Camera& cam);

// Fixed drawing palette, exact 8-bit values scaled to [0,1].
Vec3 joint_color(int joint_index);

// Horizontal concatenation: pixel (r, c) of view j lands at (r, j*W + c).
// All views must share height, width, channel count and kind.
ImagePlane concat_views(const std::vector<ImagePlane>& views);

// Inverse of concat_views: cuts the sheet into k equal-width views.
std::vector<ImagePlane> split_views(const ImagePlane& sheet, int k);

}  // namespace carve
