#include "carve/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

namespace {

std::uint64_t undirected_key(int a, int b) {
    const auto lo = static_cast<std::uint32_t>(std::min(a, b));
    const auto hi = static_cast<std::uint32_t>(std::max(a, b));
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

std::uint64_t directed_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

}  // namespace

void validate(const TriMesh& mesh, std::optional<int> gamma) {
    const int nv = static_cast<int>(mesh.vertices.size());
    for (int i = 0; i < nv; ++i)
        if (!mesh.vertices[i].allFinite())
            throw validation_error("mesh: vertex " + std::to_string(i) +
                                   " has a non-finite coordinate");
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        for (int k = 0; k < 3; ++k)
            if (t[k] < 0 || t[k] >= nv)
                throw validation_error("mesh: face " + std::to_string(f) +
                                       " references vertex " + std::to_string(t[k]) +
                                       " outside [0, " + std::to_string(nv) + ")");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw validation_error("mesh: face " + std::to_string(f) +
                                   " repeats a vertex index");
    }
    if (mesh.has_labels()) {
        if (mesh.part_labels.size() != mesh.vertices.size())
            throw validation_error("mesh: part_labels size " +
                                   std::to_string(mesh.part_labels.size()) +
                                   " != vertex count " + std::to_string(nv));
        for (std::size_t i = 0; i < mesh.part_labels.size(); ++i) {
            const int l = mesh.part_labels[i];
            if (l < 0 || (gamma && l >= *gamma))
                throw validation_error("mesh: vertex " + std::to_string(i) + " label " +
                                       std::to_string(l) + " outside [0, " +
                                       (gamma ? std::to_string(*gamma) : "inf") + ")");
        }
    }
    if (mesh.has_uvs()) {
        if (mesh.uvs.size() != mesh.vertices.size())
            throw validation_error("mesh: uvs size " + std::to_string(mesh.uvs.size()) +
                                   " != vertex count " + std::to_string(nv));
        for (std::size_t i = 0; i < mesh.uvs.size(); ++i) {
            const Vec2& uv = mesh.uvs[i];
            if (!uv.allFinite() || uv.x() < 0.0 || uv.x() > 1.0 || uv.y() < 0.0 ||
                uv.y() > 1.0)
                throw validation_error("mesh: vertex " + std::to_string(i) +
                                       " uv outside [0,1]^2");
        }
    }
}

Box3 bounds(const TriMesh& mesh) {
    Box3 b = Box3::empty();
    for (const Vec3& p : mesh.vertices) b.expand(p);
    return b;
}

Vec3 face_normal_unnormalized(const TriMesh& mesh, int face) {
    const auto& t = mesh.faces[face];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    return (b - a).cross(c - a);
}

double face_area(const TriMesh& mesh, int face) {
    return 0.5 * face_normal_unnormalized(mesh, face).norm();
}

double surface_area(const TriMesh& mesh) {
    return par::block_sum(static_cast<std::int64_t>(mesh.faces.size()),
                          [&](std::int64_t f) { return face_area(mesh, f); });
}

double signed_volume(const TriMesh& mesh) {
    return par::block_sum(static_cast<std::int64_t>(mesh.faces.size()), [&](std::int64_t f) {
        const auto& t = mesh.faces[f];
        return mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]])) / 6.0;
    });
}

int boundary_edge_count(const TriMesh& mesh) {
    std::unordered_map<std::uint64_t, int> uses;
    uses.reserve(mesh.faces.size() * 3);
    for (const auto& t : mesh.faces)
        for (int k = 0; k < 3; ++k) ++uses[undirected_key(t[k], t[(k + 1) % 3])];
    int boundary = 0;
    for (const auto& [key, n] : uses)
        if (n == 1) ++boundary;
    return boundary;
}

int euler_characteristic(const TriMesh& mesh) {
    std::unordered_map<std::uint64_t, int> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& t : mesh.faces)
        for (int k = 0; k < 3; ++k) edges.emplace(undirected_key(t[k], t[(k + 1) % 3]), 0);
    return static_cast<int>(mesh.vertices.size()) - static_cast<int>(edges.size()) +
           static_cast<int>(mesh.faces.size());
}

bool is_watertight(const TriMesh& mesh) {
    if (mesh.faces.empty()) return false;
    // Closed + consistently oriented: every directed edge appears exactly once
    // and so does its reverse.
    std::unordered_map<std::uint64_t, int> forward;
    forward.reserve(mesh.faces.size() * 3);
    for (const auto& t : mesh.faces)
        for (int k = 0; k < 3; ++k)
            if (++forward[directed_key(t[k], t[(k + 1) % 3])] > 1) return false;
    for (const auto& [key, n] : forward) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        if (!forward.count(directed_key(b, a))) return false;
    }
    return true;
}

std::vector<Vec3> angle_weighted_normal_sums(const TriMesh& mesh) {
    std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        const Vec3 c = face_normal_unnormalized(mesh, static_cast<int>(f));
        const double len = c.norm();
        if (len <= 0.0) continue;  // zero-area face contributes nothing
        const Vec3 n = c / len;
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertices[t[k]];
            const Vec3 e1 = mesh.vertices[t[(k + 1) % 3]] - p;
            const Vec3 e2 = mesh.vertices[t[(k + 2) % 3]] - p;
            acc[t[k]] += std::atan2(e1.cross(e2).norm(), e1.dot(e2)) * n;
        }
    }
    return acc;
}

std::vector<Vec3> angle_weighted_vertex_normals(const TriMesh& mesh) {
    std::vector<Vec3> acc = angle_weighted_normal_sums(mesh);
    par::for_each(static_cast<std::int64_t>(acc.size()), [&](std::int64_t i) {
        const double len = acc[i].norm();
        acc[i] = len > 1e-20 ? Vec3(acc[i] / len) : Vec3(0, 0, 1);
    });
    return acc;
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
    std::vector<std::vector<int>> adj(mesh.vertices.size());
    for (const auto& t : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            adj[t[k]].push_back(t[(k + 1) % 3]);
            adj[t[(k + 1) % 3]].push_back(t[k]);
        }
    }
    for (auto& list : adj) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
}

}  // namespace carve
