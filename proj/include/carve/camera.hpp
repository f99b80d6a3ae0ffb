#pragma once

#include <string>

#include "carve/math.hpp"

namespace carve {

// Which side of the subject a view covers; drives per-view loss weights in
// the texture stage (front/back emphasized over side views).
enum class ViewTag { front, back, other };

const char* to_string(ViewTag tag);
ViewTag view_tag_from_string(const std::string& s);

// Pinhole look-at camera with square pixels. fov_y is the full vertical
// field of view in degrees.
struct Camera {
    Vec3 position{0, 0, 1};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 1, 0};
    double fov_y_deg = 40.0;
    int width = 512;
    int height = 512;
    ViewTag view_tag = ViewTag::other;
};

// Throws validation_error: positive dimensions, fov in (0, 180), position
// distinct from look_at, up not parallel to the view direction.
void validate(const Camera& cam);

// Orthonormal camera frame: x right, y up in image space, camera looks
// along -z (right-handed view space).
struct CameraBasis {
    Vec3 right, up, forward;  // forward = normalize(look_at - position)
    explicit CameraBasis(const Camera& cam);
};

// World point -> view space (x right, y up, z negative in front).
Vec3 to_view(const Camera& cam, const CameraBasis& basis, const Vec3& p);

// Continuous screen position of a world point. Pixel (col,row) covers
// [col, col+1) x [row, row+1); its center is (col+0.5, row+0.5). Row 0 is
// the top of the image. Returns false when the point is at or behind the
// camera plane (depth <= 0), in which case sx/sy are not written.
struct Projected {
    double sx = 0, sy = 0;  // screen coordinates in pixels
    double depth = 0;       // positive distance along the view axis
};
bool project(const Camera& cam, const CameraBasis& basis, const Vec3& p,
             Projected* out);

}  // namespace carve
