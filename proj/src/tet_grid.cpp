#include "carve/tet_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

namespace {

// The 6 tetrahedra of a cube, all sharing the main diagonal from corner 0
// to corner 7 (corner code = x + 2y + 4z). Orderings are chosen so every
// tet has positive orientation.
constexpr int kCubeTets[6][4] = {
    {0, 1, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7},
    {0, 1, 7, 5}, {0, 2, 7, 3}, {0, 4, 7, 6},
};

double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

}  // namespace

Vec3 cell_size(const TetGrid& g) { return g.box.extent() / g.resolution; }

TetGrid build_grid(int resolution, const Box3& box) {
    if (resolution < 2)
        throw validation_error("build_grid: resolution must be >= 2, got " +
                               std::to_string(resolution));
    if (box.empty()) throw validation_error("build_grid: empty bounds");

    TetGrid g;
    g.resolution = resolution;
    g.box = box;
    const int n = resolution, n1 = n + 1;
    const Vec3 step = box.extent() / n;
    g.offset_bound = 0.45 * step.minCoeff();

    g.verts.reserve(static_cast<std::size_t>(n1) * n1 * n1);
    for (int z = 0; z < n1; ++z)
        for (int y = 0; y < n1; ++y)
            for (int x = 0; x < n1; ++x)
                g.verts.push_back(box.lo + Vec3(x * step.x(), y * step.y(), z * step.z()));

    g.tets.reserve(static_cast<std::size_t>(6) * n * n * n);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                int corner[8];
                for (int c = 0; c < 8; ++c)
                    corner[c] = grid_vertex_index(g, x + (c & 1), y + ((c >> 1) & 1),
                                                  z + ((c >> 2) & 1));
                for (const auto& t : kCubeTets)
                    g.tets.push_back(
                        {corner[t[0]], corner[t[1]], corner[t[2]], corner[t[3]]});
            }

    g.sdf.assign(g.verts.size(), 1.0);
    g.offsets.assign(g.verts.size(), Vec3::Zero());
    return g;
}

double deformed_tet_volume(const TetGrid& g, int t) {
    const auto& tet = g.tets[t];
    return tet_volume(g.deformed(tet[0]), g.deformed(tet[1]), g.deformed(tet[2]),
                      g.deformed(tet[3]));
}

void validate(const TetGrid& g) {
    if (g.resolution < 2) throw validation_error("grid: resolution must be >= 2");
    const std::size_t n1 = g.resolution + 1;
    if (g.verts.size() != n1 * n1 * n1)
        throw validation_error("grid: vertex count does not match resolution");
    if (g.sdf.size() != g.verts.size() || g.offsets.size() != g.verts.size())
        throw validation_error("grid: sdf/offsets arrays must match vertex count");
    if (g.tets.size() != static_cast<std::size_t>(6) * g.resolution * g.resolution *
                             g.resolution)
        throw validation_error("grid: tet count does not match resolution");
    if (!(g.offset_bound > 0.0))
        throw validation_error("grid: offset_bound must be positive");

    const int nv = g.vertex_count();
    for (const auto& tet : g.tets)
        for (int vi : tet)
            if (vi < 0 || vi >= nv)
                throw validation_error("grid: tet vertex index out of range");
    for (int vi = 0; vi < nv; ++vi) {
        if (!std::isfinite(g.sdf[vi]) || !g.offsets[vi].allFinite())
            throw validation_error("grid: non-finite parameter at vertex " +
                                   std::to_string(vi));
        if (g.offsets[vi].cwiseAbs().maxCoeff() > g.offset_bound * (1.0 + 1e-12))
            throw validation_error("grid: offset out of bound at vertex " +
                                   std::to_string(vi));
    }
    for (int t = 0; t < static_cast<int>(g.tets.size()); ++t)
        if (!(deformed_tet_volume(g, t) > 0.0))
            throw validation_error("grid: deformed tet " + std::to_string(t) +
                                   " is inverted or degenerate");
}

int clamp_offsets(TetGrid& g) {
    const double bound = g.offset_bound;
    par::for_each(g.vertex_count(), [&](int vi) {
        Vec3& o = g.offsets[vi];
        o = o.cwiseMax(-bound).cwiseMin(bound);
    });

    const int num_tets = static_cast<int>(g.tets.size());
    std::vector<unsigned char> inverted(num_tets);
    int passes = 0;
    for (;; ++passes) {
        par::for_each(num_tets, [&](int t) {
            inverted[t] = deformed_tet_volume(g, t) > 0.0 ? 0 : 1;
        });
        bool any = false;
        std::vector<unsigned char> shrink(g.vertex_count(), 0);
        for (int t = 0; t < num_tets; ++t)
            if (inverted[t]) {
                any = true;
                for (int vi : g.tets[t]) shrink[vi] = 1;
            }
        if (!any) break;
        if (passes >= 60) {  // paranoia: zero out and finish
            for (int vi = 0; vi < g.vertex_count(); ++vi)
                if (shrink[vi]) g.offsets[vi].setZero();
            continue;
        }
        for (int vi = 0; vi < g.vertex_count(); ++vi)
            if (shrink[vi]) g.offsets[vi] *= 0.5;
    }
    return passes;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'E', 'T', 'G', 'R', 'I', 'D', '1'};

struct FileCloser {
    std::FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

void write_exact(std::FILE* f, const void* data, std::size_t bytes,
                 const std::string& path) {
    if (std::fwrite(data, 1, bytes, f) != bytes)
        throw io_error("save_grid: short write to '" + path + "'");
}

void read_exact(std::FILE* f, void* data, std::size_t bytes, const std::string& path) {
    if (std::fread(data, 1, bytes, f) != bytes)
        throw io_error("load_grid: '" + path + "' is truncated");
}

}  // namespace

void save_grid(const std::string& path, const TetGrid& g) {
    static_assert(sizeof(double) == 8);
    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw io_error("save_grid: cannot open '" + path + "' for writing");

    write_exact(fc.f, kMagic, sizeof(kMagic), path);
    const std::int32_t res = g.resolution;
    write_exact(fc.f, &res, sizeof(res), path);
    double header[7] = {g.box.lo.x(), g.box.lo.y(), g.box.lo.z(),
                        g.box.hi.x(), g.box.hi.y(), g.box.hi.z(), g.offset_bound};
    write_exact(fc.f, header, sizeof(header), path);
    write_exact(fc.f, g.sdf.data(), g.sdf.size() * sizeof(double), path);
    for (const Vec3& o : g.offsets) {
        double v[3] = {o.x(), o.y(), o.z()};
        write_exact(fc.f, v, sizeof(v), path);
    }
}

TetGrid load_grid(const std::string& path) {
    FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw io_error("load_grid: cannot open '" + path + "'");

    char magic[8];
    read_exact(fc.f, magic, sizeof(magic), path);
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw io_error("load_grid: '" + path + "' is not a grid checkpoint");
    std::int32_t res = 0;
    read_exact(fc.f, &res, sizeof(res), path);
    double header[7];
    read_exact(fc.f, header, sizeof(header), path);

    Box3 box;
    box.lo = Vec3(header[0], header[1], header[2]);
    box.hi = Vec3(header[3], header[4], header[5]);
    TetGrid g = build_grid(res, box);
    g.offset_bound = header[6];
    read_exact(fc.f, g.sdf.data(), g.sdf.size() * sizeof(double), path);
    for (Vec3& o : g.offsets) {
        double v[3];
        read_exact(fc.f, v, sizeof(v), path);
        o = Vec3(v[0], v[1], v[2]);
    }
    validate(g);
    return g;
}

}  // namespace carve
