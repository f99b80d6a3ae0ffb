#include "carve/marching_tets.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

Vec3 edge_crossing(const TetGrid& g, int a, int b) {
    const double sa = g.sdf[a], sb = g.sdf[b];
    return (g.deformed(a) * sb - g.deformed(b) * sa) / (sb - sa);
}

MtJacobian mt_vertex_jacobian(const TetGrid& g, int a, int b) {
    const double sa = g.sdf[a], sb = g.sdf[b];
    if ((sa < 0.0) == (sb < 0.0))
        throw validation_error("mt_vertex_jacobian: edge has no sign change");
    const double denom = sb - sa;
    MtJacobian jac;
    jac.w_a = sb / denom;
    jac.w_b = -sa / denom;
    const Vec3 diff = g.deformed(a) - g.deformed(b);
    jac.dp_dsa = sb * diff / (denom * denom);
    jac.dp_dsb = -sa * diff / (denom * denom);
    return jac;
}

namespace {

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

// Permutation parity of the slot sequence (negatives ascending, then
// positives ascending); an odd permutation mirrors the tet, which flips
// the winding the canonical tables below assume.
bool odd_parity(const int seq[4]) {
    int inversions = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (seq[i] > seq[j]) ++inversions;
    return (inversions & 1) != 0;
}

}  // namespace

MtResult marching_tetrahedra(const TetGrid& g) {
    if (g.sdf.size() != g.verts.size() || g.offsets.size() != g.verts.size())
        throw validation_error("marching_tetrahedra: grid arrays are inconsistent");

    const int num_tets = static_cast<int>(g.tets.size());

    // Phase 1 (parallel): classify each tet by which corners are inside.
    std::vector<std::uint8_t> masks(num_tets);
    par::for_each(num_tets, [&](int t) {
        std::uint8_t m = 0;
        for (int slot = 0; slot < 4; ++slot)
            if (g.sdf[g.tets[t][slot]] < 0.0) m |= std::uint8_t(1) << slot;
        masks[t] = m;
    });

    std::vector<int> mixed;
    for (int t = 0; t < num_tets; ++t)
        if (masks[t] != 0 && masks[t] != 15) mixed.push_back(t);
    if (mixed.empty())
        throw validation_error(
            "marching_tetrahedra: SDF has no sign change, surface is empty");

    // Phase 2 (serial, deterministic): walk mixed tets in index order,
    // welding crossing vertices by undirected grid-edge key and emitting
    // triangles. First-encounter order defines vertex numbering, so the
    // result does not depend on how phase 1 was scheduled.
    MtResult out;
    std::unordered_map<std::uint64_t, int> weld;
    weld.reserve(mixed.size() * 2);

    auto vertex_id = [&](int a, int b) {
        const auto [it, fresh] = weld.try_emplace(edge_key(a, b),
                                                  static_cast<int>(out.vertex_edges.size()));
        if (fresh) out.vertex_edges.push_back({std::min(a, b), std::max(a, b)});
        return it->second;
    };

    for (int t : mixed) {
        const auto& tet = g.tets[t];
        const std::uint8_t m = masks[t];
        int neg[3], pos[3], nn = 0, np = 0;
        for (int slot = 0; slot < 4; ++slot) {
            if (m & (1 << slot))
                neg[nn++] = slot;
            else
                pos[np++] = slot;
        }
        int seq[4];
        for (int i = 0; i < nn; ++i) seq[i] = neg[i];
        for (int i = 0; i < np; ++i) seq[nn + i] = pos[i];
        const bool flip = odd_parity(seq);

        auto emit = [&](int a0, int b0, int a1, int b1, int a2, int b2) {
            std::array<int, 3> tri = {vertex_id(tet[a0], tet[b0]),
                                      vertex_id(tet[a1], tet[b1]),
                                      vertex_id(tet[a2], tet[b2])};
            if (flip) std::swap(tri[1], tri[2]);
            out.mesh.faces.push_back(tri);
        };

        if (nn == 1) {
            emit(neg[0], pos[0], neg[0], pos[1], neg[0], pos[2]);
        } else if (nn == 3) {
            emit(neg[0], pos[0], neg[1], pos[0], neg[2], pos[0]);
        } else {  // quad split into two triangles
            emit(neg[0], pos[0], neg[0], pos[1], neg[1], pos[1]);
            emit(neg[0], pos[0], neg[1], pos[1], neg[1], pos[0]);
        }
    }

    // Phase 3 (parallel): interpolate welded vertex positions.
    out.mesh.vertices.resize(out.vertex_edges.size());
    par::for_each(static_cast<int>(out.vertex_edges.size()), [&](int i) {
        out.mesh.vertices[i] = edge_crossing(g, out.vertex_edges[i][0],
                                             out.vertex_edges[i][1]);
    });
    return out;
}

}  // namespace carve
