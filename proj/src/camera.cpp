#include "carve/camera.hpp"

#include <cmath>

#include "carve/error.hpp"

namespace carve {

const char* to_string(ViewTag tag) {
    switch (tag) {
        case ViewTag::front: return "front";
        case ViewTag::back: return "back";
        case ViewTag::other: return "other";
    }
    return "?";
}

ViewTag view_tag_from_string(const std::string& s) {
    if (s == "front") return ViewTag::front;
    if (s == "back") return ViewTag::back;
    if (s == "other") return ViewTag::other;
    throw validation_error("camera: unknown view_tag '" + s +
                           "' (expected front|back|other)");
}

void validate(const Camera& cam) {
    if (cam.width <= 0 || cam.height <= 0)
        throw validation_error("camera: non-positive image size " +
                               std::to_string(cam.width) + "x" +
                               std::to_string(cam.height));
    if (!(cam.fov_y_deg > 0.0) || !(cam.fov_y_deg < 180.0))
        throw validation_error("camera: fov_y " + std::to_string(cam.fov_y_deg) +
                               " outside (0, 180)");
    if (!cam.position.allFinite() || !cam.look_at.allFinite() || !cam.up.allFinite())
        throw validation_error("camera: non-finite parameter");
    const Vec3 dir = cam.look_at - cam.position;
    if (dir.norm() < 1e-12)
        throw validation_error("camera: position coincides with look_at");
    if (cam.up.norm() < 1e-12)
        throw validation_error("camera: zero up vector");
    if (dir.normalized().cross(cam.up.normalized()).norm() < 1e-9)
        throw validation_error("camera: up is parallel to the view direction");
}

CameraBasis::CameraBasis(const Camera& cam) {
    forward = (cam.look_at - cam.position).normalized();
    right = forward.cross(cam.up).normalized();
    up = right.cross(forward);
}

Vec3 to_view(const Camera& cam, const CameraBasis& basis, const Vec3& p) {
    const Vec3 d = p - cam.position;
    return Vec3(basis.right.dot(d), basis.up.dot(d), -basis.forward.dot(d));
}

bool project(const Camera& cam, const CameraBasis& basis, const Vec3& p,
             Projected* out) {
    const Vec3 v = to_view(cam, basis, p);
    const double depth = -v.z();
    if (!(depth > 0.0)) return false;
    const double f = 1.0 / std::tan(0.5 * radians(cam.fov_y_deg));
    const double aspect = static_cast<double>(cam.width) / cam.height;
    const double x_ndc = (f / aspect) * v.x() / depth;
    const double y_ndc = f * v.y() / depth;
    out->sx = (x_ndc + 1.0) * 0.5 * cam.width;
    out->sy = (1.0 - y_ndc) * 0.5 * cam.height;
    out->depth = depth;
    return true;
}

}  // namespace carve
