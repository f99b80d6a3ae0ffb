#include "carve/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

// ---------------------------------------------------------------------------
// Texture atlas
// ---------------------------------------------------------------------------

TextureAtlas::TextureAtlas(int size_, float fill) : size(size_) {
    if (size_ <= 0) throw validation_error("atlas: size must be positive");
    texels.assign(static_cast<std::size_t>(size_) * size_ * 3, fill);
}

void validate(const TextureAtlas& atlas) {
    if (atlas.size <= 0) throw validation_error("atlas: size must be positive");
    if (atlas.texels.size() != static_cast<std::size_t>(atlas.size) * atlas.size * 3)
        throw validation_error("atlas: texel array does not match size");
    for (float v : atlas.texels)
        if (!(v >= 0.0f && v <= 1.0f))
            throw validation_error("atlas: texel value outside [0,1]");
    const double gutter = 2.0 / atlas.size;
    for (std::size_t i = 0; i < atlas.chart_boxes.size(); ++i) {
        const Box2& a = atlas.chart_boxes[i];
        if (a.lo.x() < 0.0 || a.lo.y() < 0.0 || a.hi.x() > 1.0 || a.hi.y() > 1.0 ||
            a.lo.x() >= a.hi.x() || a.lo.y() >= a.hi.y())
            throw validation_error("atlas: chart box " + std::to_string(i) +
                                   " is empty or outside [0,1]^2");
        for (std::size_t j = i + 1; j < atlas.chart_boxes.size(); ++j) {
            const Box2& b = atlas.chart_boxes[j];
            const bool apart = a.hi.x() + gutter <= b.lo.x() ||
                               b.hi.x() + gutter <= a.lo.x() ||
                               a.hi.y() + gutter <= b.lo.y() ||
                               b.hi.y() + gutter <= a.lo.y();
            if (!apart)
                throw validation_error("atlas: chart boxes " + std::to_string(i) +
                                       " and " + std::to_string(j) +
                                       " are closer than the two-texel gutter");
        }
    }
}

BilinearTaps bilinear_taps(int size, double u, double v) {
    const double x = u * size - 0.5;
    const double y = v * size - 0.5;
    const double fx = x - std::floor(x);
    const double fy = y - std::floor(y);
    const int c0 = std::clamp(static_cast<int>(std::floor(x)), 0, size - 1);
    const int c1 = std::clamp(c0 + 1, 0, size - 1);
    const int r0 = std::clamp(static_cast<int>(std::floor(y)), 0, size - 1);
    const int r1 = std::clamp(r0 + 1, 0, size - 1);

    BilinearTaps taps;
    taps.texel[0] = r0 * size + c0;
    taps.texel[1] = r0 * size + c1;
    taps.texel[2] = r1 * size + c0;
    taps.texel[3] = r1 * size + c1;
    taps.weight[0] = (1.0 - fx) * (1.0 - fy);
    taps.weight[1] = fx * (1.0 - fy);
    taps.weight[2] = (1.0 - fx) * fy;
    taps.weight[3] = fx * fy;
    return taps;
}

Vec3 sample_bilinear(const TextureAtlas& atlas, double u, double v) {
    const BilinearTaps taps = bilinear_taps(atlas.size, u, v);
    Vec3 out = Vec3::Zero();
    for (int k = 0; k < 4; ++k) {
        const float* t = &atlas.texels[static_cast<std::size_t>(taps.texel[k]) * 3];
        out += taps.weight[k] * Vec3(t[0], t[1], t[2]);
    }
    return out;
}

ImagePlane atlas_to_image(const TextureAtlas& atlas) {
    ImagePlane img(atlas.size, atlas.size, ImageKind::color);
    img.data = atlas.texels;
    return img;
}

TextureAtlas atlas_from_image(const ImagePlane& img, std::vector<Box2> chart_boxes) {
    if (img.width != img.height || img.channels != 3)
        throw validation_error("atlas_from_image: need a square 3-channel image");
    TextureAtlas atlas;
    atlas.size = img.width;
    atlas.texels = img.data;
    atlas.chart_boxes = std::move(chart_boxes);
    return atlas;
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

namespace {

constexpr int kTile = 32;
constexpr double kMinDepth = 1e-9;

// Per-face screen-space data, precomputed once per render.
struct FaceScreen {
    double sx[3], sy[3];
    double inv_depth[3];
    double area2 = 0.0;  // signed doubled screen area
    bool drawable = false;
};

std::vector<FaceScreen> project_faces(const TriMesh& mesh, const Camera& cam,
                                      const CameraBasis& basis) {
    const int num_verts = static_cast<int>(mesh.vertices.size());
    std::vector<Projected> proj(num_verts);
    std::vector<char> in_front(num_verts);
    par::for_each(num_verts, [&](int v) {
        Projected p;
        in_front[v] = project(cam, basis, mesh.vertices[v], &p) && p.depth > kMinDepth;
        proj[v] = p;
    });

    std::vector<FaceScreen> faces(mesh.faces.size());
    par::for_each(static_cast<std::int64_t>(mesh.faces.size()), [&](std::int64_t f) {
        const auto& t = mesh.faces[f];
        FaceScreen& fs = faces[f];
        if (!in_front[t[0]] || !in_front[t[1]] || !in_front[t[2]]) return;
        for (int k = 0; k < 3; ++k) {
            fs.sx[k] = proj[t[k]].sx;
            fs.sy[k] = proj[t[k]].sy;
            fs.inv_depth[k] = 1.0 / proj[t[k]].depth;
        }
        fs.area2 = (fs.sx[1] - fs.sx[0]) * (fs.sy[2] - fs.sy[0]) -
                   (fs.sx[2] - fs.sx[0]) * (fs.sy[1] - fs.sy[0]);
        fs.drawable = fs.area2 != 0.0;
    });
    return faces;
}

// Tests pixel centers of rows [row_lo, row_hi] x cols [col_lo, col_hi]
// against one face, updating the z-buffer and coverage. Called with tile
// bounds (parallel path) or image bounds (reference path); a face is
// accepted when strictly nearer, so ties keep the lowest face index as
// long as faces arrive in ascending order.
void raster_face(const FaceScreen& fs, int face, int row_lo, int row_hi, int col_lo,
                 int col_hi, int width, std::vector<double>& zbuf,
                 std::vector<PixelCoverage>& coverage) {
    const double minx = std::min({fs.sx[0], fs.sx[1], fs.sx[2]});
    const double maxx = std::max({fs.sx[0], fs.sx[1], fs.sx[2]});
    const double miny = std::min({fs.sy[0], fs.sy[1], fs.sy[2]});
    const double maxy = std::max({fs.sy[0], fs.sy[1], fs.sy[2]});
    col_lo = std::max(col_lo, static_cast<int>(std::ceil(minx - 0.5)));
    col_hi = std::min(col_hi, static_cast<int>(std::floor(maxx - 0.5)));
    row_lo = std::max(row_lo, static_cast<int>(std::ceil(miny - 0.5)));
    row_hi = std::min(row_hi, static_cast<int>(std::floor(maxy - 0.5)));

    for (int row = row_lo; row <= row_hi; ++row) {
        const double py = row + 0.5;
        for (int col = col_lo; col <= col_hi; ++col) {
            const double px = col + 0.5;
            // Signed edge functions; inside when all share the area sign.
            const double w0 = (fs.sx[2] - fs.sx[1]) * (py - fs.sy[1]) -
                              (fs.sy[2] - fs.sy[1]) * (px - fs.sx[1]);
            const double w1 = (fs.sx[0] - fs.sx[2]) * (py - fs.sy[2]) -
                              (fs.sy[0] - fs.sy[2]) * (px - fs.sx[2]);
            const double w2 = (fs.sx[1] - fs.sx[0]) * (py - fs.sy[0]) -
                              (fs.sy[1] - fs.sy[0]) * (px - fs.sx[0]);
            const bool inside = fs.area2 > 0.0 ? (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0)
                                               : (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
            if (!inside) continue;

            const double b0 = w0 / fs.area2;
            const double b1 = w1 / fs.area2;
            const double b2 = w2 / fs.area2;
            const double s = b0 * fs.inv_depth[0] + b1 * fs.inv_depth[1] +
                             b2 * fs.inv_depth[2];
            const double depth = 1.0 / s;

            const int px_id = row * width + col;
            if (depth >= zbuf[px_id]) continue;
            zbuf[px_id] = depth;
            PixelCoverage& cov = coverage[px_id];
            cov.face = face;
            cov.depth = depth;
            cov.bary[0] = b0 * fs.inv_depth[0] / s;
            cov.bary[1] = b1 * fs.inv_depth[1] / s;
            cov.bary[2] = b2 * fs.inv_depth[2] / s;
        }
    }
}

void shade_bundle(FrameBundle& bundle, const TriMesh& mesh, const RenderRequest& req) {
    par::for_each(bundle.silhouette.pixel_count(), [&](std::int64_t i) {
        bundle.silhouette.data[i] = bundle.coverage[i].face >= 0 ? 1.0f : 0.0f;
    });
    if (req.normals) {
        bundle.normal = shade_normals(bundle, mesh);
    }
    if (req.color) {
        bundle.color = shade_color(bundle, mesh, *req.atlas);
    }
}

void check_request(const TriMesh& mesh, const RenderRequest& req) {
    if (req.color && (!mesh.has_uvs() || req.atlas == nullptr))
        throw validation_error(
            "render: color output needs per-vertex UVs and a texture atlas");
}

}  // namespace

FrameBundle render(const TriMesh& mesh, const Camera& cam, const RenderRequest& req) {
    check_request(mesh, req);
    const CameraBasis basis(cam);
    const std::vector<FaceScreen> faces = project_faces(mesh, cam, basis);

    FrameBundle bundle;
    bundle.width = cam.width;
    bundle.height = cam.height;
    bundle.silhouette = ImagePlane(cam.width, cam.height, ImageKind::silhouette);
    bundle.coverage.assign(bundle.silhouette.pixel_count(), PixelCoverage{});

    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;

    // Bin faces to tiles (serial, ascending face order within each bin).
    std::vector<std::vector<int>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
        const FaceScreen& fs = faces[f];
        if (!fs.drawable) continue;
        const double minx = std::min({fs.sx[0], fs.sx[1], fs.sx[2]});
        const double maxx = std::max({fs.sx[0], fs.sx[1], fs.sx[2]});
        const double miny = std::min({fs.sy[0], fs.sy[1], fs.sy[2]});
        const double maxy = std::max({fs.sy[0], fs.sy[1], fs.sy[2]});
        const int tx_lo = std::max(0, static_cast<int>(minx) / kTile);
        const int tx_hi = std::min(tiles_x - 1, static_cast<int>(std::max(0.0, maxx)) / kTile);
        const int ty_lo = std::max(0, static_cast<int>(miny) / kTile);
        const int ty_hi = std::min(tiles_y - 1, static_cast<int>(std::max(0.0, maxy)) / kTile);
        if (maxx < 0.0 || maxy < 0.0 || minx > cam.width || miny > cam.height) continue;
        for (int ty = ty_lo; ty <= ty_hi; ++ty)
            for (int tx = tx_lo; tx <= tx_hi; ++tx)
                bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(f);
    }

    // Tiles own disjoint pixel ranges, so they can run in parallel with no
    // merge step; within a tile, faces run in ascending index order.
    std::vector<double> zbuf(bundle.coverage.size(),
                             std::numeric_limits<double>::infinity());
    par::for_each(static_cast<std::int64_t>(bins.size()), [&](std::int64_t tile) {
        const int tx = static_cast<int>(tile % tiles_x);
        const int ty = static_cast<int>(tile / tiles_x);
        const int col_lo = tx * kTile;
        const int col_hi = std::min(cam.width - 1, col_lo + kTile - 1);
        const int row_lo = ty * kTile;
        const int row_hi = std::min(cam.height - 1, row_lo + kTile - 1);
        for (int f : bins[tile])
            raster_face(faces[f], f, row_lo, row_hi, col_lo, col_hi, cam.width, zbuf,
                        bundle.coverage);
    });

    shade_bundle(bundle, mesh, req);
    return bundle;
}

namespace {

struct SerialScope {
    bool was_enabled = par::enabled();
    SerialScope() { par::set_enabled(false); }
    ~SerialScope() { par::set_enabled(was_enabled); }
};

}  // namespace

FrameBundle render_reference(const TriMesh& mesh, const Camera& cam,
                             const RenderRequest& req) {
    check_request(mesh, req);
    const SerialScope serial;  // the reference path is strictly serial
    const CameraBasis basis(cam);
    const std::vector<FaceScreen> faces = project_faces(mesh, cam, basis);

    FrameBundle bundle;
    bundle.width = cam.width;
    bundle.height = cam.height;
    bundle.silhouette = ImagePlane(cam.width, cam.height, ImageKind::silhouette);
    bundle.coverage.assign(bundle.silhouette.pixel_count(), PixelCoverage{});

    std::vector<double> zbuf(bundle.coverage.size(),
                             std::numeric_limits<double>::infinity());
    for (int f = 0; f < static_cast<int>(faces.size()); ++f)
        if (faces[f].drawable)
            raster_face(faces[f], f, 0, cam.height - 1, 0, cam.width - 1, cam.width,
                        zbuf, bundle.coverage);

    shade_bundle(bundle, mesh, req);
    return bundle;
}

ImagePlane shade_normals(const FrameBundle& bundle, const TriMesh& mesh) {
    const std::vector<Vec3> vnormals = angle_weighted_vertex_normals(mesh);
    ImagePlane img(bundle.width, bundle.height, ImageKind::normal);
    par::for_each(img.pixel_count(), [&](std::int64_t i) {
        const PixelCoverage& cov = bundle.coverage[i];
        if (cov.face < 0) return;
        const auto& t = mesh.faces[cov.face];
        const Vec3 m = cov.bary[0] * vnormals[t[0]] + cov.bary[1] * vnormals[t[1]] +
                       cov.bary[2] * vnormals[t[2]];
        const double len = m.norm();
        const Vec3 n = len > 1e-12 ? Vec3(m / len) : Vec3(0, 0, 1);
        encode_normal(n, &img.data[i * 3]);
    });
    return img;
}

ImagePlane shade_color(const FrameBundle& bundle, const TriMesh& mesh,
                       const TextureAtlas& atlas) {
    if (!mesh.has_uvs())
        throw validation_error("shade_color: mesh has no UV coordinates");
    ImagePlane img(bundle.width, bundle.height, ImageKind::color);
    par::for_each(img.pixel_count(), [&](std::int64_t i) {
        const PixelCoverage& cov = bundle.coverage[i];
        if (cov.face < 0) return;
        const auto& t = mesh.faces[cov.face];
        const Vec2 uv = cov.bary[0] * mesh.uvs[t[0]] + cov.bary[1] * mesh.uvs[t[1]] +
                        cov.bary[2] * mesh.uvs[t[2]];
        const Vec3 rgb = sample_bilinear(atlas, uv.x(), uv.y());
        img.data[i * 3 + 0] = static_cast<float>(rgb.x());
        img.data[i * 3 + 1] = static_cast<float>(rgb.y());
        img.data[i * 3 + 2] = static_cast<float>(rgb.z());
    });
    return img;
}

void validate(const FrameBundle& bundle) {
    if (bundle.width <= 0 || bundle.height <= 0)
        throw validation_error("bundle: empty dimensions");
    const std::int64_t n = static_cast<std::int64_t>(bundle.width) * bundle.height;
    if (static_cast<std::int64_t>(bundle.coverage.size()) != n ||
        bundle.silhouette.pixel_count() != n)
        throw validation_error("bundle: coverage/silhouette size mismatch");
    for (std::int64_t i = 0; i < n; ++i) {
        const PixelCoverage& cov = bundle.coverage[i];
        const bool covered = cov.face >= 0;
        if ((bundle.silhouette.data[i] == 1.0f) != covered)
            throw validation_error("bundle: silhouette disagrees with coverage at pixel " +
                                   std::to_string(i));
        if (!covered) continue;
        if (!(cov.depth > 0.0))
            throw validation_error("bundle: non-positive depth at pixel " +
                                   std::to_string(i));
        const double sum = cov.bary[0] + cov.bary[1] + cov.bary[2];
        if (cov.bary[0] < 0.0 || cov.bary[1] < 0.0 || cov.bary[2] < 0.0 ||
            std::abs(sum - 1.0) > 1e-6)
            throw validation_error("bundle: bad barycentrics at pixel " +
                                   std::to_string(i));
    }
}

}  // namespace carve
