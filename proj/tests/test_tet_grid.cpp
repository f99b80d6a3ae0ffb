#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "carve/error.hpp"
#include "carve/rng.hpp"
#include "carve/tet_grid.hpp"
#include "support/assets.hpp"

using namespace carve;

namespace {

Box3 unit_box() { return Box3{Vec3(0, 0, 0), Vec3(1, 1, 1)}; }

}  // namespace

TEST_CASE("tet_grid: resolution 2 gives 27 vertices and 48 tets") {
    const TetGrid g = build_grid(2, unit_box());
    CHECK(g.vertex_count() == 27);
    CHECK(g.verts.size() == 27);
    CHECK(g.tets.size() == 48);
    CHECK(g.sdf.size() == 27);
    CHECK(g.offsets.size() == 27);
    for (double s : g.sdf) CHECK(s == 1.0);  // starts everything outside
    for (const Vec3& o : g.offsets) CHECK(o.norm() == 0.0);
    CHECK_NOTHROW(validate(g));
}

TEST_CASE("tet_grid: cell counts scale as six tets per cube") {
    const TetGrid g = build_grid(3, unit_box());
    CHECK(g.vertex_count() == 4 * 4 * 4);
    CHECK(g.tets.size() == 6u * 27u);
}

TEST_CASE("tet_grid: vertex indexing is x-fastest") {
    const int n = 3;
    const TetGrid g = build_grid(n, unit_box());
    CHECK(grid_vertex_index(g, 0, 0, 0) == 0);
    CHECK(grid_vertex_index(g, 1, 0, 0) == 1);
    CHECK(grid_vertex_index(g, 0, 1, 0) == n + 1);
    CHECK(grid_vertex_index(g, 0, 0, 1) == (n + 1) * (n + 1));
    // And the coordinates match the lattice.
    const double h = 1.0 / n;
    const int vi = grid_vertex_index(g, 2, 1, 3);
    CHECK((g.verts[vi] - Vec3(2 * h, 1 * h, 3 * h)).norm() < 1e-12);
}

TEST_CASE("tet_grid: cell size and offset bound derive from the box") {
    const Box3 box{Vec3(0, 0, 0), Vec3(2, 1, 4)};
    const TetGrid g = build_grid(4, box);
    const Vec3 cell = cell_size(g);
    CHECK(cell.x() == doctest::Approx(0.5));
    CHECK(cell.y() == doctest::Approx(0.25));
    CHECK(cell.z() == doctest::Approx(1.0));
    CHECK(g.offset_bound == doctest::Approx(0.45 * 0.25));
}

TEST_CASE("tet_grid: every tet is positively oriented at rest") {
    const TetGrid g = build_grid(4, unit_box());
    for (size_t t = 0; t < g.tets.size(); ++t)
        CHECK(deformed_tet_volume(g, static_cast<int>(t)) > 0.0);
}

TEST_CASE("tet_grid: resolution below 2 is rejected") {
    CHECK_THROWS_AS(build_grid(1, unit_box()), validation_error);
    CHECK_THROWS_AS(build_grid(0, unit_box()), validation_error);
}

TEST_CASE("tet_grid: validate rejects inconsistent arrays and large offsets") {
    TetGrid g = build_grid(2, unit_box());
    SUBCASE("sdf size") {
        g.sdf.pop_back();
        CHECK_THROWS_AS(validate(g), validation_error);
    }
    SUBCASE("offset beyond the bound") {
        g.offsets[13] = Vec3(g.offset_bound * 1.5, 0, 0);
        CHECK_THROWS_AS(validate(g), validation_error);
    }
    SUBCASE("non-finite sdf") {
        g.sdf[5] = std::nan("");
        CHECK_THROWS_AS(validate(g), validation_error);
    }
}

TEST_CASE("tet_grid: clamp_offsets pulls offsets inside the bound") {
    TetGrid g = build_grid(3, unit_box());
    Rng rng(17);
    for (Vec3& o : g.offsets)
        o = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    clamp_offsets(g);
    for (const Vec3& o : g.offsets) CHECK(o.cwiseAbs().maxCoeff() <= g.offset_bound + 1e-15);
    CHECK_NOTHROW(validate(g));
    // All tets stay positively oriented under bounded offsets.
    for (size_t t = 0; t < g.tets.size(); ++t)
        CHECK(deformed_tet_volume(g, static_cast<int>(t)) > 0.0);
}

TEST_CASE("tet_grid: clamp_offsets keeps already-valid offsets") {
    TetGrid g = build_grid(3, unit_box());
    Rng rng(18);
    for (Vec3& o : g.offsets)
        o = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) *
            (0.5 * g.offset_bound);
    const std::vector<Vec3> before = g.offsets;
    clamp_offsets(g);
    for (size_t i = 0; i < before.size(); ++i)
        CHECK((g.offsets[i] - before[i]).norm() == 0.0);
}

TEST_CASE("tet_grid: deformed positions add the offsets") {
    TetGrid g = build_grid(2, unit_box());
    g.offsets[4] = Vec3(0.01, -0.02, 0.005);
    CHECK((g.deformed(4) - (g.verts[4] + g.offsets[4])).norm() == 0.0);
    CHECK((g.deformed(5) - g.verts[5]).norm() == 0.0);
}

TEST_CASE("tet_grid: save/load round-trips bit-exactly") {
    testassets::ScratchDir dir("grid_io");
    TetGrid g = build_grid(5, Box3{Vec3(-0.3, -0.4, -0.5), Vec3(0.6, 0.7, 0.8)});
    Rng rng(77);
    for (double& s : g.sdf) s = rng.uniform(-1.0, 1.0);
    for (Vec3& o : g.offsets)
        o = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) *
            (0.9 * g.offset_bound);
    const std::string path = dir.path("grid.bin");
    save_grid(g, path);
    const TetGrid back = load_grid(path);
    CHECK(back.resolution == g.resolution);
    CHECK((back.box.lo - g.box.lo).norm() == 0.0);
    CHECK((back.box.hi - g.box.hi).norm() == 0.0);
    REQUIRE(back.sdf.size() == g.sdf.size());
    REQUIRE(back.offsets.size() == g.offsets.size());
    for (size_t i = 0; i < g.sdf.size(); ++i) CHECK(back.sdf[i] == g.sdf[i]);
    for (size_t i = 0; i < g.offsets.size(); ++i)
        CHECK((back.offsets[i] - g.offsets[i]).norm() == 0.0);
    CHECK(back.offset_bound == g.offset_bound);
    // The reloaded grid regenerates identical lattice connectivity.
    CHECK(back.tets == g.tets);
}

TEST_CASE("tet_grid: load rejects missing and corrupt files") {
    testassets::ScratchDir dir("grid_io_bad");
    CHECK_THROWS_AS(load_grid(dir.path("missing.bin")), io_error);
    const std::string junk = dir.path("junk.bin");
    {
        std::FILE* f = std::fopen(junk.c_str(), "wb");
        REQUIRE(f);
        std::fputs("not a grid file at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_grid(junk), io_error);
}
