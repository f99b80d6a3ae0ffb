#include "carve/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    const double sum = va + vb + vc;
    if (!(sum > 0.0)) return a;  // degenerate sliver; corners were handled above
    return a + ab * (vb / sum) + ac * (vc / sum);
}

namespace {

double box_distance_sq(const Box3& box, const Vec3& p) {
    const Vec3 q = p.cwiseMax(box.lo).cwiseMin(box.hi);
    return (p - q).squaredNorm();
}

constexpr int kLeafSize = 8;

}  // namespace

MeshDistanceField::MeshDistanceField(const TriMesh& mesh) {
    validate(mesh);
    if (!is_watertight(mesh))
        throw validation_error(
            "MeshDistanceField: mesh is not watertight, sign is undefined");

    const int num_faces = static_cast<int>(mesh.faces.size());
    tris_.resize(num_faces);
    order_.resize(num_faces);
    std::vector<Vec3> centroids(num_faces);
    for (int f = 0; f < num_faces; ++f) {
        const auto& face = mesh.faces[f];
        tris_[f] = {mesh.vertices[face[0]], mesh.vertices[face[1]],
                    mesh.vertices[face[2]]};
        order_[f] = f;
        centroids[f] = (tris_[f][0] + tris_[f][1] + tris_[f][2]) / 3.0;
    }
    nodes_.reserve(2 * num_faces / kLeafSize + 2);
    root_ = build(0, num_faces, centroids);
}

int MeshDistanceField::build(int begin, int end, std::vector<Vec3>& centroids) {
    Node node;
    node.begin = begin;
    node.end = end;
    for (int i = begin; i < end; ++i)
        for (const Vec3& v : tris_[order_[i]]) node.box.expand(v);

    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    Box3 cbox;
    for (int i = begin; i < end; ++i) cbox.expand(centroids[order_[i]]);
    int axis = 0;
    cbox.extent().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int fa, int fb) {
                         const double ca = centroids[fa][axis], cb = centroids[fb][axis];
                         return ca < cb || (ca == cb && fa < fb);
                     });
    const int left = build(begin, mid, centroids);
    const int right = build(mid, end, centroids);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double MeshDistanceField::unsigned_distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    int stack[64];
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (box_distance_sq(node.box, p) >= best) continue;
        if (node.leaf()) {
            for (int i = node.begin; i < node.end; ++i) {
                const auto& t = tris_[order_[i]];
                const double d = (p - closest_point_on_triangle(p, t[0], t[1], t[2]))
                                     .squaredNorm();
                best = std::min(best, d);
            }
            continue;
        }
        // Visit the nearer child first for tighter pruning.
        const double dl = box_distance_sq(nodes_[node.left].box, p);
        const double dr = box_distance_sq(nodes_[node.right].box, p);
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return std::sqrt(best);
}

double MeshDistanceField::winding_number(const Vec3& p) const {
    // Solid angle of triangle abc seen from p (van Oosterom & Strackee),
    // summed exactly over every face; watertight meshes yield ~1 inside
    // and ~0 outside.
    double total = 0.0;
    for (const auto& t : tris_) {
        const Vec3 a = t[0] - p, b = t[1] - p, c = t[2] - p;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double numer = a.dot(b.cross(c));
        const double denom =
            la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * std::atan2(numer, denom);
    }
    return total / (4.0 * kPi);
}

double MeshDistanceField::signed_distance(const Vec3& p) const {
    const double d = unsigned_distance(p);
    return winding_number(p) > 0.5 ? -d : d;
}

double signed_distance(const TriMesh& mesh, const Vec3& p) {
    return MeshDistanceField(mesh).signed_distance(p);
}

void init_sdf_from_mesh(TetGrid& grid, const TriMesh& mesh) {
    const MeshDistanceField field(mesh);
    const int nv = grid.vertex_count();

    std::vector<double> dist(nv);
    par::for_each(nv, [&](int vi) { dist[vi] = field.unsigned_distance(grid.verts[vi]); });

    // Band: vertices close enough that an incident lattice edge could cross
    // the surface. Longest lattice edge = the cell diagonal.
    const double band = cell_size(grid).norm() * 1.0001;
    std::vector<int> band_verts;
    for (int vi = 0; vi < nv; ++vi)
        if (dist[vi] <= band) band_verts.push_back(vi);

    // sign[vi]: -1 inside, +1 outside, 0 unknown yet.
    std::vector<signed char> sign(nv, 0);
    par::for_each(static_cast<int>(band_verts.size()), [&](int i) {
        const int vi = band_verts[i];
        sign[vi] = field.winding_number(grid.verts[vi]) > 0.5 ? -1 : 1;
    });

    // Outside the band, an axis edge (length <= distance) cannot cross the
    // surface, so the sign is constant along it: breadth-first fill from
    // the band. Any neighbor already labeled gives the same answer, so the
    // fill order does not matter for the result.
    std::deque<int> queue(band_verts.begin(), band_verts.end());
    const int n1 = grid.resolution + 1;
    const int dx = 1, dy = n1, dz = n1 * n1;
    while (!queue.empty()) {
        const int vi = queue.front();
        queue.pop_front();
        const int x = vi % n1, y = (vi / n1) % n1, z = vi / (n1 * n1);
        const int neighbors[6] = {x > 0 ? vi - dx : -1,      x < n1 - 1 ? vi + dx : -1,
                                  y > 0 ? vi - dy : -1,      y < n1 - 1 ? vi + dy : -1,
                                  z > 0 ? vi - dz : -1,      z < n1 - 1 ? vi + dz : -1};
        for (int nb : neighbors)
            if (nb >= 0 && sign[nb] == 0) {
                sign[nb] = sign[vi];
                queue.push_back(nb);
            }
    }
    for (int vi = 0; vi < nv; ++vi)
        if (sign[vi] == 0)
            throw contract_error("init_sdf_from_mesh: unreachable lattice vertex " +
                                 std::to_string(vi));

    par::for_each(nv, [&](int vi) { grid.sdf[vi] = sign[vi] * dist[vi]; });
}

void init_sdf_from_function(TetGrid& grid,
                            const std::function<double(const Vec3&)>& f) {
    par::for_each(grid.vertex_count(), [&](int vi) { grid.sdf[vi] = f(grid.verts[vi]); });
}

}  // namespace carve
