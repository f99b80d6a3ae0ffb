#include "carve/unwrap.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {
namespace {

int face_label(const std::array<int, 3>& f, const std::vector<int>& labels) {
    const int la = labels[f[0]], lb = labels[f[1]], lc = labels[f[2]];
    if (la == lb || la == lc) return la;
    if (lb == lc) return lb;
    return std::min({la, lb, lc});
}

}  // namespace

std::vector<int> heuristic_labels(const TriMesh& mesh, int gamma,
                                  const LabelerConfig& cfg) {
    validate(mesh);
    if (gamma != 1 && gamma != 2 && gamma != 5) {
        throw validation_error(
            "heuristic_labels: built-in labeler supports 1, 2 or 5 parts; "
            "got " +
            std::to_string(gamma) + " (supply explicit labels)");
    }
    const int nv = static_cast<int>(mesh.vertices.size());
    std::vector<int> labels(nv, 0);
    if (gamma == 1) return labels;

    const Box3 box = bounds(mesh);
    const double height = box.extent().y();
    const double y_leg = box.lo.y() + cfg.leg_band * height;
    const double cx = box.center().x();
    const double arm_x = cfg.arm_offset * height;
    for (int i = 0; i < nv; ++i) {
        const Vec3& p = mesh.vertices[i];
        if (gamma == 2) {
            labels[i] = p.y() < y_leg ? 1 : 0;
            continue;
        }
        const double dx = p.x() - cx;
        if (p.y() < y_leg) {
            labels[i] = dx >= 0 ? 3 : 4;  // left / right leg
        } else if (std::abs(dx) > arm_x) {
            labels[i] = dx >= 0 ? 1 : 2;  // left / right arm
        } else {
            labels[i] = 0;  // trunk
        }
    }
    return labels;
}

std::vector<MeshPart> partition(const TriMesh& mesh, int gamma,
                                const std::vector<int>& labels) {
    validate(mesh);
    if (gamma < 1) throw validation_error("partition: need at least one part");
    std::vector<int> lab =
        labels.empty() ? heuristic_labels(mesh, gamma) : labels;
    const int nv = static_cast<int>(mesh.vertices.size());
    if (static_cast<int>(lab.size()) != nv) {
        throw validation_error("partition: " + std::to_string(lab.size()) +
                               " labels for " + std::to_string(nv) +
                               " vertices");
    }
    for (int i = 0; i < nv; ++i) {
        if (lab[i] < 0 || lab[i] >= gamma) {
            throw validation_error("partition: label " + std::to_string(lab[i]) +
                                   " of vertex " + std::to_string(i) +
                                   " outside [0, " + std::to_string(gamma) + ")");
        }
    }

    std::vector<std::vector<int>> part_faces(gamma);
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
        part_faces[face_label(mesh.faces[f], lab)].push_back(f);
    }
    for (int g = 0; g < gamma; ++g) {
        if (part_faces[g].empty()) {
            throw validation_error("partition: part for label " +
                                   std::to_string(g) + " is empty");
        }
    }

    std::vector<MeshPart> parts(gamma);
    std::vector<int> local(nv);
    for (int g = 0; g < gamma; ++g) {
        MeshPart& part = parts[g];
        part.label = g;
        std::fill(local.begin(), local.end(), -1);
        for (int f : part_faces[g]) {
            for (int v : mesh.faces[f]) local[v] = 0;
        }
        // Local ids in increasing original-index order.
        for (int v = 0; v < nv; ++v) {
            if (local[v] == 0) {
                local[v] = static_cast<int>(part.mesh.vertices.size());
                part.mesh.vertices.push_back(mesh.vertices[v]);
            }
        }
        part.mesh.faces.reserve(part_faces[g].size());
        for (int f : part_faces[g]) {
            const auto& src = mesh.faces[f];
            part.mesh.faces.push_back(
                {local[src[0]], local[src[1]], local[src[2]]});
        }
    }
    return parts;
}

Vec3 principal_axis(const TriMesh& part) {
    if (part.vertices.empty()) {
        throw validation_error("principal_axis: empty part");
    }
    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : part.vertices) mean += p;
    mean /= static_cast<double>(part.vertices.size());
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : part.vertices) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 axis = eig.eigenvectors().col(2);  // largest eigenvalue last
    const double n = axis.norm();
    axis = n > 0 ? Vec3(axis / n) : Vec3(0, 1, 0);
    // Deterministic sign: up, then toward +x, then +z.
    constexpr double tie = 1e-12;
    if (axis.y() < -tie) return -axis;
    if (axis.y() > tie) return axis;
    if (axis.x() < -tie) return -axis;
    if (axis.x() > tie) return axis;
    return axis.z() < 0 ? Vec3(-axis) : axis;
}

std::vector<Vec2> cylinder_unwrap(TriMesh& part, const Vec3& axis) {
    if (part.vertices.empty() || part.faces.empty()) {
        throw validation_error("cylinder_unwrap: empty part");
    }
    const double alen = axis.norm();
    if (!(alen > 1e-9)) {
        throw validation_error("cylinder_unwrap: zero-length axis");
    }
    const Vec3 a = axis / alen;
    const Mat3 rot =
        Eigen::Quaterniond::FromTwoVectors(a, Vec3(0, 1, 0)).toRotationMatrix();

    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : part.vertices) centroid += p;
    centroid /= static_cast<double>(part.vertices.size());

    const int nv = static_cast<int>(part.vertices.size());
    std::vector<double> theta(nv), height(nv);
    double y_lo = std::numeric_limits<double>::infinity();
    double y_hi = -y_lo;
    for (int i = 0; i < nv; ++i) {
        const Vec3 q = rot * (part.vertices[i] - centroid);
        theta[i] = std::atan2(q.x(), q.z());
        height[i] = q.y();
        y_lo = std::min(y_lo, q.y());
        y_hi = std::max(y_hi, q.y());
    }
    const double span_y = y_hi - y_lo;
    if (span_y < 1e-12) {
        throw validation_error(
            "cylinder_unwrap: part has zero height along its axis");
    }

    std::vector<Vec2> uv(nv);
    for (int i = 0; i < nv; ++i) {
        uv[i] = Vec2(theta[i] / (2.0 * kPi) + 0.5, (height[i] - y_lo) / span_y);
    }

    // Seam handling: rewire each face to the u branch (u, u+1 or u-1 per
    // corner) nearest the face's circular-mean angle, duplicating a vertex
    // the first time a shifted branch of it is needed.
    const bool has_labels = part.has_labels();
    std::map<std::pair<int, int>, int> dup;  // (vertex, shift) -> new index
    for (auto& f : part.faces) {
        double s = 0, c = 0;
        for (int k = 0; k < 3; ++k) {
            s += std::sin(theta[f[k]]);
            c += std::cos(theta[f[k]]);
        }
        const double mean_theta =
            (s * s + c * c < 1e-18) ? theta[f[0]] : std::atan2(s, c);
        const double u_face = mean_theta / (2.0 * kPi) + 0.5;
        for (int k = 0; k < 3; ++k) {
            const int v = f[k];
            const int shift =
                static_cast<int>(std::lround(u_face - uv[v].x()));
            if (shift == 0) continue;
            auto [it, inserted] = dup.try_emplace({v, shift}, 0);
            if (inserted) {
                it->second = static_cast<int>(part.vertices.size());
                part.vertices.push_back(part.vertices[v]);
                if (has_labels) part.part_labels.push_back(part.part_labels[v]);
                uv.push_back(Vec2(uv[v].x() + shift, uv[v].y()));
            }
            f[k] = it->second;
        }
    }

    // Drop vertices the rewiring left unreferenced (their stale u would
    // otherwise skew the chart's uv bounds).
    std::vector<int> remap(part.vertices.size(), -1);
    for (const auto& f : part.faces) {
        for (int v : f) remap[v] = 0;
    }
    int next = 0;
    for (std::size_t i = 0; i < remap.size(); ++i) {
        if (remap[i] == 0) remap[i] = next++;
    }
    if (next != static_cast<int>(part.vertices.size())) {
        std::vector<Vec3> verts(next);
        std::vector<Vec2> uv2(next);
        std::vector<int> labels2(has_labels ? next : 0);
        for (std::size_t i = 0; i < remap.size(); ++i) {
            if (remap[i] < 0) continue;
            verts[remap[i]] = part.vertices[i];
            uv2[remap[i]] = uv[i];
            if (has_labels) labels2[remap[i]] = part.part_labels[i];
        }
        part.vertices = std::move(verts);
        part.part_labels = std::move(labels2);
        uv = std::move(uv2);
        for (auto& f : part.faces) {
            for (int& v : f) v = remap[v];
        }
    }
    part.uvs.clear();  // raw uv returned separately; final uvs come from pack
    return uv;
}

namespace {

// Physical length of one raw-uv unit along u and along v: the area-weighted
// RMS of the per-face linear map's partial derivatives. Exact for a true
// cylinder: 2*pi*r per unit u, height per unit v.
Vec2 uv_unit_lengths(const TriMesh& part, const std::vector<Vec2>& uv) {
    double su2 = 0, sv2 = 0, wsum = 0;
    for (const auto& f : part.faces) {
        const Vec2 e1 = uv[f[1]] - uv[f[0]];
        const Vec2 e2 = uv[f[2]] - uv[f[0]];
        const double det = e1.x() * e2.y() - e1.y() * e2.x();
        if (std::abs(det) < 1e-18) continue;
        const Vec3 d1 = part.vertices[f[1]] - part.vertices[f[0]];
        const Vec3 d2 = part.vertices[f[2]] - part.vertices[f[0]];
        const Vec3 dp_du = (d1 * e2.y() - d2 * e1.y()) / det;
        const Vec3 dp_dv = (d2 * e1.x() - d1 * e2.x()) / det;
        const double w = 0.5 * d1.cross(d2).norm();
        su2 += w * dp_du.squaredNorm();
        sv2 += w * dp_dv.squaredNorm();
        wsum += w;
    }
    if (wsum <= 0) return Vec2(1, 1);
    return Vec2(std::sqrt(su2 / wsum), std::sqrt(sv2 / wsum));
}

struct ChartDims {
    double w = 0, h = 0;  // physical units
};

// Shelf placement at a given texel-per-unit scale. Boxes come back in texel
// units, in part order. Gutter is 2.5 texels so the exported UV boxes stay
// two full texels apart even after rounding; every chart gets at least
// 2x2 texels.
bool shelf_place(const std::vector<ChartDims>& dims,
                 const std::vector<int>& order, double scale, double n,
                 std::vector<Box2>* out) {
    constexpr double kGutter = 2.5, kMargin = 1.0, kMinDim = 2.0;
    double x = kMargin, y = kMargin, shelf = 0;
    std::vector<Box2> boxes(dims.size());
    for (int idx : order) {
        const double w = std::max(dims[idx].w * scale, kMinDim);
        const double h = std::max(dims[idx].h * scale, kMinDim);
        if (w > n - 2 * kMargin) return false;
        if (x + w > n - kMargin) {
            y += shelf + kGutter;
            x = kMargin;
            shelf = 0;
        }
        if (y + h > n - kMargin) return false;
        boxes[idx] = Box2{Vec2(x, y), Vec2(x + w, y + h)};
        x += w + kGutter;
        shelf = std::max(shelf, h);
    }
    if (out) *out = boxes;
    return true;
}

}  // namespace

PackedMesh pack_atlas(
    const std::vector<std::pair<TriMesh, std::vector<Vec2>>>& parts,
    int atlas_size) {
    if (parts.empty()) {
        throw validation_error("pack_atlas: need at least one part");
    }
    if (atlas_size < 2) {
        throw validation_error("pack_atlas: atlas size must be at least 2");
    }
    const int k = static_cast<int>(parts.size());
    std::vector<ChartDims> dims(k);
    std::vector<Vec2> uv_lo(k), uv_hi(k);
    for (int i = 0; i < k; ++i) {
        const auto& [mesh, uv] = parts[i];
        if (mesh.vertices.empty() || uv.size() != mesh.vertices.size()) {
            throw validation_error("pack_atlas: part " + std::to_string(i) +
                                   " lacks one uv per vertex");
        }
        Vec2 lo = uv[0], hi = uv[0];
        for (const Vec2& t : uv) {
            lo = lo.cwiseMin(t);
            hi = hi.cwiseMax(t);
        }
        uv_lo[i] = lo;
        uv_hi[i] = hi;
        const Vec2 unit = uv_unit_lengths(mesh, uv);
        dims[i].w = (hi.x() - lo.x()) * unit.x();
        dims[i].h = (hi.y() - lo.y()) * unit.y();
    }

    // Tallest-first shelf order; ties by width, then part index.
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (dims[a].h != dims[b].h) return dims[a].h > dims[b].h;
        if (dims[a].w != dims[b].w) return dims[a].w > dims[b].w;
        return a < b;
    });

    const double n = static_cast<double>(atlas_size);
    if (!shelf_place(dims, order, 0.0, n, nullptr)) {
        throw validation_error("pack_atlas: atlas of " +
                               std::to_string(atlas_size) +
                               " texels is too small for " + std::to_string(k) +
                               " charts with two-texel gutters");
    }
    double lo_scale = 0.0, hi_scale = 1.0;
    while (hi_scale < 1e12 && shelf_place(dims, order, hi_scale, n, nullptr)) {
        lo_scale = hi_scale;
        hi_scale *= 2;
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo_scale + hi_scale);
        if (shelf_place(dims, order, mid, n, nullptr)) {
            lo_scale = mid;
        } else {
            hi_scale = mid;
        }
    }
    std::vector<Box2> texel_boxes;
    shelf_place(dims, order, lo_scale, n, &texel_boxes);

    PackedMesh packed;
    packed.chart_boxes.resize(k);
    for (int i = 0; i < k; ++i) {
        packed.chart_boxes[i] =
            Box2{texel_boxes[i].lo / n, texel_boxes[i].hi / n};
    }

    TriMesh& merged = packed.mesh;
    for (int i = 0; i < k; ++i) {
        const auto& [mesh, uv] = parts[i];
        const Box2& box = packed.chart_boxes[i];
        const Vec2 span = uv_hi[i] - uv_lo[i];
        const int base = static_cast<int>(merged.vertices.size());
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            merged.vertices.push_back(mesh.vertices[v]);
            merged.part_labels.push_back(i);
            const Vec2 rel(
                span.x() > 1e-15 ? (uv[v].x() - uv_lo[i].x()) / span.x() : 0.5,
                span.y() > 1e-15 ? (uv[v].y() - uv_lo[i].y()) / span.y() : 0.5);
            merged.uvs.push_back(box.lo + rel.cwiseProduct(box.extent()));
        }
        for (const auto& f : mesh.faces) {
            merged.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
        }
    }
    validate(merged, k);
    return packed;
}

PackedMesh unwrap_mesh(const TriMesh& mesh, int gamma,
                       const std::vector<int>& labels, int atlas_size,
                       const LabelerConfig& cfg) {
    std::vector<int> lab =
        labels.empty() ? heuristic_labels(mesh, gamma, cfg) : labels;
    std::vector<MeshPart> parts = partition(mesh, gamma, lab);
    std::vector<std::pair<TriMesh, std::vector<Vec2>>> unwrapped(parts.size());
    std::vector<std::exception_ptr> errors(parts.size());
    par::for_each(parts.size(), [&](std::size_t i) {
        try {
            TriMesh m = std::move(parts[i].mesh);
            std::vector<Vec2> uv = cylinder_unwrap(m, principal_axis(m));
            unwrapped[i] = {std::move(m), std::move(uv)};
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return pack_atlas(unwrapped, atlas_size);
}

}  // namespace carve
