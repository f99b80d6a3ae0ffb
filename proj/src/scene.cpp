#include "carve/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "carve/error.hpp"

namespace carve {

void validate(const RigSpec& spec) {
    if (spec.k_views < 1)
        throw validation_error("rig: k_views must be >= 1, got " +
                               std::to_string(spec.k_views));
    if (!(spec.radius > 0.0))
        throw validation_error("rig: radius must be positive");
    if (!(spec.azimuth_start_deg < spec.azimuth_end_deg))
        throw validation_error("rig: azimuth_start must be less than azimuth_end");
    if (spec.image_size <= 0)
        throw validation_error("rig: image_size must be positive");
    if (!(spec.fov_y_deg > 0.0) || !(spec.fov_y_deg < 180.0))
        throw validation_error("rig: fov_y must lie in (0, 180) degrees");
}

Vec3 azimuth_position(const RigSpec& spec, double azimuth_deg) {
    const double az = radians(azimuth_deg);
    return spec.target_center + spec.radius * Vec3(std::sin(az), 0.0, std::cos(az));
}

namespace {

// Angular distance (degrees) from azimuth to the nearest multiple of 360°
// plus `to` (e.g. to=0 measures distance to the front direction).
double wrap_distance(double azimuth_deg, double to_deg) {
    double d = std::fmod(std::abs(azimuth_deg - to_deg), 360.0);
    return std::min(d, 360.0 - d);
}

Camera camera_at(const RigSpec& spec, double azimuth_deg) {
    Camera cam;
    cam.position = azimuth_position(spec, azimuth_deg);
    cam.look_at = spec.target_center;
    cam.up = Vec3(0, 1, 0);
    cam.fov_y_deg = spec.fov_y_deg;
    cam.width = spec.image_size;
    cam.height = spec.image_size;
    cam.view_tag = ViewTag::other;
    return cam;
}

}  // namespace

std::vector<Camera> instantiate_rig(const RigSpec& spec) {
    validate(spec);
    std::vector<double> azimuths;
    for (int i = 0; i < spec.k_views; ++i) {
        const double t = spec.k_views == 1
                             ? 0.0
                             : static_cast<double>(i) / (spec.k_views - 1);
        azimuths.push_back(spec.azimuth_start_deg +
                           t * (spec.azimuth_end_deg - spec.azimuth_start_deg));
    }
    if (spec.mirror_to_360) {
        const int original = static_cast<int>(azimuths.size());
        for (int i = 0; i < original; ++i) {
            const double az = azimuths[i];
            // Skip azimuths whose mirror coincides with themselves (0°/180°).
            if (wrap_distance(az, 0.0) < 1e-12 || wrap_distance(az, 180.0) < 1e-12)
                continue;
            azimuths.push_back(360.0 - std::fmod(az, 360.0));
        }
    }

    std::vector<Camera> rig;
    rig.reserve(azimuths.size());
    for (double az : azimuths) rig.push_back(camera_at(spec, az));

    double best_front = std::numeric_limits<double>::infinity();
    double best_back = std::numeric_limits<double>::infinity();
    for (double az : azimuths) {
        best_front = std::min(best_front, wrap_distance(az, 0.0));
        best_back = std::min(best_back, wrap_distance(az, 180.0));
    }
    for (std::size_t i = 0; i < azimuths.size(); ++i) {
        const bool front = wrap_distance(azimuths[i], 0.0) == best_front;
        const bool back = wrap_distance(azimuths[i], 180.0) == best_back;
        if (front)
            rig[i].view_tag = ViewTag::front;  // front wins when both apply
        else if (back)
            rig[i].view_tag = ViewTag::back;
    }
    return rig;
}

BodyTransform normalize_body(TriMesh& mesh) {
    validate(mesh);
    const Box3 box = bounds(mesh);
    const double height = box.extent().y();
    if (!(height > 0.0))
        throw validation_error("normalize_body: mesh has zero height (y extent)");
    BodyTransform tf;
    tf.center = box.center();
    tf.scale = 1.0 / height;
    for (Vec3& v : mesh.vertices) v = tf.apply(v);
    return tf;
}

Vec3 joint_color(int joint_index) {
    // Fixed 8-bit palette; changing it would silently change every pose
    // image, so treat the table as frozen.
    static constexpr int kPalette[32][3] = {
        {255, 0, 0},    {255, 85, 0},   {255, 170, 0},  {255, 255, 0},
        {170, 255, 0},  {85, 255, 0},   {0, 255, 0},    {0, 255, 85},
        {0, 255, 170},  {0, 255, 255},  {0, 170, 255},  {0, 85, 255},
        {0, 0, 255},    {85, 0, 255},   {170, 0, 255},  {255, 0, 255},
        {255, 0, 170},  {255, 0, 85},   {128, 0, 0},    {128, 64, 0},
        {128, 128, 0},  {64, 128, 0},   {0, 128, 0},    {0, 128, 64},
        {0, 128, 128},  {0, 64, 128},   {0, 0, 128},    {64, 0, 128},
        {128, 0, 128},  {128, 0, 64},   {192, 192, 192}, {255, 255, 255}};
    const int* rgb = kPalette[((joint_index % 32) + 32) % 32];
    return Vec3(rgb[0] / 255.0, rgb[1] / 255.0, rgb[2] / 255.0);
}

namespace {

void paint(ImagePlane& img, int row, int col, const Vec3& color) {
    float* px = &img.at(row, col, 0);
    px[0] = static_cast<float>(color.x());
    px[1] = static_cast<float>(color.y());
    px[2] = static_cast<float>(color.z());
}

// Fills every pixel whose center lies within `radius` of (cx, cy).
void draw_disc(ImagePlane& img, double cx, double cy, double radius,
               const Vec3& color) {
    const int col_lo = std::max(0, static_cast<int>(std::floor(cx - radius - 1.0)));
    const int col_hi =
        std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius + 1.0)));
    const int row_lo = std::max(0, static_cast<int>(std::floor(cy - radius - 1.0)));
    const int row_hi =
        std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius + 1.0)));
    const double r2 = radius * radius;
    for (int row = row_lo; row <= row_hi; ++row)
        for (int col = col_lo; col <= col_hi; ++col) {
            const double dx = (col + 0.5) - cx;
            const double dy = (row + 0.5) - cy;
            if (dx * dx + dy * dy <= r2) paint(img, row, col, color);
        }
}

// Fills every pixel whose center lies within width/2 of segment ab.
void draw_segment(ImagePlane& img, double ax, double ay, double bx, double by,
                  double width, const Vec3& color) {
    const double half = width * 0.5;
    const int col_lo = std::max(
        0, static_cast<int>(std::floor(std::min(ax, bx) - half - 1.0)));
    const int col_hi = std::min(
        img.width - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half + 1.0)));
    const int row_lo = std::max(
        0, static_cast<int>(std::floor(std::min(ay, by) - half - 1.0)));
    const int row_hi = std::min(
        img.height - 1, static_cast<int>(std::ceil(std::max(ay, by) + half + 1.0)));
    const double ex = bx - ax, ey = by - ay;
    const double len2 = ex * ex + ey * ey;
    const double h2 = half * half;
    for (int row = row_lo; row <= row_hi; ++row)
        for (int col = col_lo; col <= col_hi; ++col) {
            const double px = (col + 0.5) - ax;
            const double py = (row + 0.5) - ay;
            double t = len2 > 0.0 ? (px * ex + py * ey) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = px - t * ex;
            const double dy = py - t * ey;
            if (dx * dx + dy * dy <= h2) paint(img, row, col, color);
        }
}

}  // namespace

ImagePlane project_skeleton(const Skeleton& skel, const Camera& cam) {
    validate(skel);
    validate(cam);
    const CameraBasis basis(cam);

    std::vector<Projected> pts(skel.joints.size());
    for (std::size_t j = 0; j < skel.joints.size(); ++j) {
        if (!project(cam, basis, skel.joints[j].p, &pts[j]))
            throw validation_error("project_skeleton: joint '" + skel.joints[j].name +
                                   "' is at or behind the camera plane");
    }

    ImagePlane img(cam.width, cam.height, ImageKind::pose);
    const double size = cam.height;
    const double line_width = size / 256.0;
    const double disc_radius = size / 128.0;

    for (const auto& bone : skel.bones)
        draw_segment(img, pts[bone[0]].sx, pts[bone[0]].sy, pts[bone[1]].sx,
                     pts[bone[1]].sy, line_width, joint_color(bone[1]));
    for (std::size_t j = 0; j < skel.joints.size(); ++j)
        draw_disc(img, pts[j].sx, pts[j].sy, disc_radius,
                  joint_color(static_cast<int>(j)));
    return img;
}

ImagePlane concat_views(const std::vector<ImagePlane>& views) {
    if (views.empty()) throw validation_error("concat_views: no views");
    const ImagePlane& first = views.front();
    for (const ImagePlane& v : views)
        if (v.width != first.width || v.height != first.height ||
            v.channels != first.channels || v.kind != first.kind)
            throw validation_error("concat_views: views differ in size or kind");

    const int k = static_cast<int>(views.size());
    ImagePlane sheet(first.width * k, first.height, first.kind);
    for (int j = 0; j < k; ++j)
        for (int row = 0; row < first.height; ++row) {
            const float* src =
                views[j].data.data() +
                static_cast<std::size_t>(row) * first.width * first.channels;
            float* dst = &sheet.at(row, j * first.width, 0);
            std::copy(src, src + static_cast<std::size_t>(first.width) * first.channels,
                      dst);
        }
    return sheet;
}

std::vector<ImagePlane> split_views(const ImagePlane& sheet, int k) {
    if (k < 1 || sheet.width % k != 0)
        throw validation_error("split_views: sheet width " +
                               std::to_string(sheet.width) + " is not divisible into " +
                               std::to_string(k) + " views");
    const int w = sheet.width / k;
    std::vector<ImagePlane> views;
    views.reserve(k);
    for (int j = 0; j < k; ++j) {
        ImagePlane v(w, sheet.height, sheet.kind);
        for (int row = 0; row < sheet.height; ++row) {
            const float* src =
                sheet.data.data() +
                (static_cast<std::size_t>(row) * sheet.width + j * w) * sheet.channels;
            std::copy(src, src + static_cast<std::size_t>(w) * sheet.channels,
                      &v.at(row, 0, 0));
        }
        views.push_back(std::move(v));
    }
    return views;
}

}  // namespace carve
