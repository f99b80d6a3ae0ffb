#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "carve/error.hpp"
#include "carve/mesh.hpp"
#include "carve/unwrap.hpp"
#include "support/assets.hpp"

using namespace carve;

namespace {

const TriMesh& humanoid40() {
    static const TriMesh m = testassets::humanoid(40);
    return m;
}

// Number of face-connected components (faces joined when they share an edge).
int face_components(const TriMesh& mesh) {
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
        for (int k = 0; k < 3; ++k) {
            int a = mesh.faces[f][k], b = mesh.faces[f][(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edge_faces[{a, b}].push_back(f);
        }
    }
    std::vector<int> comp(mesh.faces.size(), -1);
    int count = 0;
    for (int seed = 0; seed < static_cast<int>(mesh.faces.size()); ++seed) {
        if (comp[seed] >= 0) continue;
        ++count;
        std::vector<int> stack{seed};
        comp[seed] = count;
        while (!stack.empty()) {
            const int f = stack.back();
            stack.pop_back();
            for (int k = 0; k < 3; ++k) {
                int a = mesh.faces[f][k], b = mesh.faces[f][(k + 1) % 3];
                if (a > b) std::swap(a, b);
                for (int g : edge_faces[{a, b}]) {
                    if (comp[g] < 0) {
                        comp[g] = count;
                        stack.push_back(g);
                    }
                }
            }
        }
    }
    return count;
}

Vec3 vertex_mean(const TriMesh& mesh) {
    Vec3 m = Vec3::Zero();
    for (const Vec3& p : mesh.vertices) m += p;
    return m / static_cast<double>(mesh.vertices.size());
}

TriMesh two_label_quad() {
    TriMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    m.faces = {{0, 1, 2}, {1, 3, 2}};
    return m;
}

}  // namespace

TEST_CASE("unwrap: one part keeps the whole mesh") {
    const TriMesh mesh = testassets::icosphere(1, 0.5);
    const std::vector<int> labels = heuristic_labels(mesh, 1);
    for (int l : labels) CHECK(l == 0);
    const std::vector<MeshPart> parts = partition(mesh, 1);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].label == 0);
    CHECK(parts[0].mesh.faces.size() == mesh.faces.size());
    CHECK(parts[0].mesh.vertices.size() == mesh.vertices.size());
}

TEST_CASE("unwrap: unsupported heuristic part counts are rejected") {
    const TriMesh mesh = testassets::icosphere(1, 0.5);
    CHECK_THROWS_AS(heuristic_labels(mesh, 3), validation_error);
    CHECK_THROWS_AS(heuristic_labels(mesh, 0), validation_error);
}

TEST_CASE("unwrap: faces join the majority label, ties go to the lowest") {
    TriMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0),
                  Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(2, 1, 0),
                  Vec3(4, 0, 0), Vec3(5, 0, 0), Vec3(4, 1, 0)};
    m.faces = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
    // Face 0 has three distinct labels — the tie resolves to 0. Faces 1 and 2
    // have clear majorities 1 and 2.
    const std::vector<int> labels = {0, 1, 2, 1, 1, 2, 2, 2, 0};
    const std::vector<MeshPart> parts = partition(m, 3, labels);
    REQUIRE(parts.size() == 3);
    CHECK(parts[0].mesh.faces.size() == 1);
    CHECK(parts[1].mesh.faces.size() == 1);
    CHECK(parts[2].mesh.faces.size() == 1);
    // The tie face landed in part 0: its corner positions match face 0.
    CHECK((parts[0].mesh.vertices[0] - Vec3(0, 0, 0)).norm() == 0.0);
    CHECK((parts[0].mesh.vertices[1] - Vec3(1, 0, 0)).norm() == 0.0);
    CHECK((parts[0].mesh.vertices[2] - Vec3(0, 1, 0)).norm() == 0.0);
}

TEST_CASE("unwrap: boundary vertices are duplicated into both parts") {
    const TriMesh m = two_label_quad();
    const std::vector<int> labels = {0, 0, 1, 1};
    // Face {0,1,2} -> majority 0; face {1,3,2} -> majority 1. Vertices 1 and
    // 2 sit on the boundary and must appear in both parts.
    const std::vector<MeshPart> parts = partition(m, 2, labels);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].mesh.vertices.size() + parts[1].mesh.vertices.size() == 6);
    CHECK(parts[0].mesh.faces.size() == 1);
    CHECK(parts[1].mesh.faces.size() == 1);
    // Part vertex order follows the original index order.
    CHECK((parts[0].mesh.vertices[0] - m.vertices[0]).norm() == 0.0);
    CHECK((parts[0].mesh.vertices[1] - m.vertices[1]).norm() == 0.0);
    CHECK((parts[0].mesh.vertices[2] - m.vertices[2]).norm() == 0.0);
    CHECK((parts[1].mesh.vertices[0] - m.vertices[1]).norm() == 0.0);
    CHECK((parts[1].mesh.vertices[1] - m.vertices[2]).norm() == 0.0);
    CHECK((parts[1].mesh.vertices[2] - m.vertices[3]).norm() == 0.0);
}

TEST_CASE("unwrap: an empty part is an error that names the label") {
    const TriMesh m = two_label_quad();
    const std::vector<int> all_zero = {0, 0, 0, 0};
    try {
        partition(m, 2, all_zero);
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
    // Wrong label count and out-of-range labels are also rejected.
    CHECK_THROWS_AS(partition(m, 2, std::vector<int>{0, 1}), validation_error);
    CHECK_THROWS_AS(partition(m, 2, std::vector<int>{0, 0, 1, 2}),
                    validation_error);
}

TEST_CASE("unwrap: the body labeler splits the humanoid into five coherent parts") {
    const TriMesh& body = humanoid40();
    const std::vector<int> labels = heuristic_labels(body, 5);
    const std::vector<MeshPart> parts = partition(body, 5, labels);
    REQUIRE(parts.size() == 5);

    std::size_t total_faces = 0;
    for (const MeshPart& p : parts) {
        CHECK(!p.mesh.faces.empty());
        total_faces += p.mesh.faces.size();
        // Every part is one edge-connected piece of surface.
        CHECK(face_components(p.mesh) == 1);
    }
    CHECK(total_faces == body.faces.size());

    // Semantic placement: trunk above legs, arms flanking the trunk, and the
    // subject's left (+x) on the correct side.
    const Vec3 trunk = vertex_mean(parts[0].mesh);
    const Vec3 left_arm = vertex_mean(parts[1].mesh);
    const Vec3 right_arm = vertex_mean(parts[2].mesh);
    const Vec3 left_leg = vertex_mean(parts[3].mesh);
    const Vec3 right_leg = vertex_mean(parts[4].mesh);
    CHECK(trunk.y() > left_leg.y());
    CHECK(trunk.y() > right_leg.y());
    CHECK(left_arm.x() > trunk.x());
    CHECK(right_arm.x() < trunk.x());
    CHECK(left_leg.x() > 0);
    CHECK(right_leg.x() < 0);
    CHECK(std::abs(left_arm.x()) > std::abs(trunk.x()));
}

TEST_CASE("unwrap: the two-part split separates upper and lower body") {
    const TriMesh& body = humanoid40();
    const std::vector<MeshPart> parts = partition(body, 2);
    REQUIRE(parts.size() == 2);
    CHECK(vertex_mean(parts[0].mesh).y() > vertex_mean(parts[1].mesh).y());
    CHECK(parts[0].mesh.faces.size() + parts[1].mesh.faces.size() ==
          body.faces.size());
}

TEST_CASE("unwrap: principal axis picks the elongated direction with a fixed sign") {
    // A cloud stretched along y, even if described bottom-up.
    const TriMesh cyl = testassets::open_cylinder(0.2, 1.6, 24, 8);
    const Vec3 axis = principal_axis(cyl);
    CHECK(axis.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(axis.y()) > 0.999);
    CHECK(axis.y() > 0);  // sign convention: up

    // A horizontal stick resolves toward +x.
    TriMesh stick;
    stick.vertices = {Vec3(-2, 0, 0), Vec3(2, 0, 0),     Vec3(-2, 0.1, 0),
                      Vec3(2, 0.1, 0), Vec3(-2, 0, 0.1), Vec3(2, 0, 0.1)};
    stick.faces = {{0, 1, 2}, {1, 3, 2}, {0, 4, 1}, {1, 4, 5}};
    const Vec3 xaxis = principal_axis(stick);
    CHECK(xaxis.x() > 0.999);

    TriMesh empty;
    CHECK_THROWS_AS(principal_axis(empty), validation_error);
}

TEST_CASE("unwrap: cylinder unwrap maps angle to u and height to v") {
    TriMesh cyl = testassets::open_cylinder(0.3, 1.2, 48, 6);
    const std::size_t original_vertices = cyl.vertices.size();
    const std::size_t original_faces = cyl.faces.size();
    const std::vector<Vec2> uv = cylinder_unwrap(cyl, Vec3(0, 1, 0));
    REQUIRE(uv.size() == cyl.vertices.size());
    CHECK(cyl.faces.size() == original_faces);     // seam splitting rewires only
    CHECK(cyl.vertices.size() >= original_vertices);  // duplicates added

    // v is the normalized height: ring r of 6 sits at v = r/6.
    // Vertex (ring r, segment s) kept its original index r*48+s for s away
    // from the seam.
    for (int r = 0; r <= 6; ++r) {
        for (int s : {0, 5, 12, 30, 40}) {
            CHECK(uv[r * 48 + s].y() == doctest::Approx(r / 6.0).epsilon(1e-9));
        }
        // Segment 0 sits exactly on +z, the u = 0.5 reference direction.
        CHECK(std::abs(uv[r * 48].x() - 0.5) < 1e-12);
    }

    double u_lo = 1e30, u_hi = -1e30;
    for (const Vec2& t : uv) {
        CHECK(t.y() >= -1e-12);
        CHECK(t.y() <= 1.0 + 1e-12);
        u_lo = std::min(u_lo, t.x());
        u_hi = std::max(u_hi, t.x());
    }
    // Raw u covers one full turn, extending slightly past [0,1) on the seam
    // duplicates but never by more than a face width.
    CHECK(u_hi - u_lo > 0.99);
    CHECK(u_lo > -0.1);
    CHECK(u_hi < 1.1);

    // No face wraps around: each face spans a narrow u interval.
    for (const auto& f : cyl.faces) {
        const double span =
            std::max({uv[f[0]].x(), uv[f[1]].x(), uv[f[2]].x()}) -
            std::min({uv[f[0]].x(), uv[f[1]].x(), uv[f[2]].x()});
        CHECK(span < 0.25);
    }
}

TEST_CASE("unwrap: degenerate unwrap inputs are rejected") {
    TriMesh empty;
    CHECK_THROWS_AS(cylinder_unwrap(empty, Vec3(0, 1, 0)), validation_error);

    TriMesh flat;  // a triangle with no extent along the given axis
    flat.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 1)};
    flat.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(cylinder_unwrap(flat, Vec3(0, 1, 0)), validation_error);

    TriMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 1)};
    tri.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(cylinder_unwrap(tri, Vec3(0, 0, 0)), validation_error);
}

TEST_CASE("unwrap: a single chart fills most of its atlas") {
    TriMesh cyl = testassets::open_cylinder(0.3, 1.2, 48, 6);
    std::vector<Vec2> uv = cylinder_unwrap(cyl, Vec3(0, 1, 0));
    std::vector<std::pair<TriMesh, std::vector<Vec2>>> parts;
    parts.emplace_back(std::move(cyl), std::move(uv));
    const PackedMesh packed = pack_atlas(parts, 256);
    REQUIRE(packed.chart_boxes.size() == 1);
    const Box2& box = packed.chart_boxes[0];
    // One-texel border margin is respected; the binary-searched scale pushes
    // the chart's limiting dimension close to the full atlas.
    CHECK(box.lo.x() >= 1.0 / 256 - 1e-9);
    CHECK(box.lo.y() >= 1.0 / 256 - 1e-9);
    CHECK(box.hi.x() <= 1.0 - 1.0 / 256 + 1e-9);
    CHECK(box.hi.y() <= 1.0 - 1.0 / 256 + 1e-9);
    CHECK(std::max(box.extent().x(), box.extent().y()) > 0.9);

    // The cylinder is wider than tall once unrolled (2*pi*r = 1.88 per u-unit
    // versus 1.2 height), so the chart's aspect reflects the physical shape.
    CHECK(box.extent().x() > box.extent().y());
}

TEST_CASE("unwrap: full unwrap produces a valid packed atlas with gutters") {
    const TriMesh& body = humanoid40();
    const PackedMesh packed = unwrap_mesh(body, 5, {}, 256);
    const TriMesh& m = packed.mesh;
    REQUIRE(packed.chart_boxes.size() == 5);
    CHECK(m.faces.size() == body.faces.size());
    REQUIRE(m.has_uvs());
    REQUIRE(m.has_labels());
    CHECK_NOTHROW(validate(m, 5));

    // Every vertex's uv lies inside its own part's chart rectangle.
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
        const Box2& box = packed.chart_boxes[m.part_labels[v]];
        CHECK(m.uvs[v].x() >= box.lo.x() - 1e-9);
        CHECK(m.uvs[v].x() <= box.hi.x() + 1e-9);
        CHECK(m.uvs[v].y() >= box.lo.y() - 1e-9);
        CHECK(m.uvs[v].y() <= box.hi.y() + 1e-9);
    }

    // No face spans two parts.
    for (const auto& f : m.faces) {
        CHECK(m.part_labels[f[0]] == m.part_labels[f[1]]);
        CHECK(m.part_labels[f[0]] == m.part_labels[f[2]]);
    }

    // Charts stay a two-texel gutter apart and a one-texel margin from the
    // border.
    const double texel = 1.0 / 256;
    for (const Box2& b : packed.chart_boxes) {
        CHECK(b.lo.x() >= texel - 1e-9);
        CHECK(b.lo.y() >= texel - 1e-9);
        CHECK(b.hi.x() <= 1.0 - texel + 1e-9);
        CHECK(b.hi.y() <= 1.0 - texel + 1e-9);
        CHECK(b.extent().x() > 0);
        CHECK(b.extent().y() > 0);
    }
    for (std::size_t i = 0; i < packed.chart_boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < packed.chart_boxes.size(); ++j) {
            const Box2& a = packed.chart_boxes[i];
            const Box2& b = packed.chart_boxes[j];
            const bool gap_x = a.hi.x() + 2 * texel <= b.lo.x() + 1e-9 ||
                               b.hi.x() + 2 * texel <= a.lo.x() + 1e-9;
            const bool gap_y = a.hi.y() + 2 * texel <= b.lo.y() + 1e-9 ||
                               b.hi.y() + 2 * texel <= a.lo.y() + 1e-9;
            CHECK_MESSAGE(gap_x || gap_y, "charts ", i, " and ", j, " touch");
        }
    }
}

TEST_CASE("unwrap: unwrapping is deterministic") {
    const TriMesh& body = humanoid40();
    const PackedMesh a = unwrap_mesh(body, 5, {}, 128);
    const PackedMesh b = unwrap_mesh(body, 5, {}, 128);
    REQUIRE(a.mesh.uvs.size() == b.mesh.uvs.size());
    double uv_drift = 0.0;
    for (std::size_t i = 0; i < a.mesh.uvs.size(); ++i) {
        uv_drift = std::max(uv_drift, (a.mesh.uvs[i] - b.mesh.uvs[i]).norm());
    }
    CHECK(uv_drift == 0.0);
    REQUIRE(a.chart_boxes.size() == b.chart_boxes.size());
    for (std::size_t i = 0; i < a.chart_boxes.size(); ++i) {
        CHECK((a.chart_boxes[i].lo - b.chart_boxes[i].lo).norm() == 0.0);
        CHECK((a.chart_boxes[i].hi - b.chart_boxes[i].hi).norm() == 0.0);
    }
}

TEST_CASE("unwrap: an atlas that cannot hold the charts is rejected") {
    const TriMesh& body = humanoid40();
    try {
        unwrap_mesh(body, 5, {}, 8);
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("too small") != std::string::npos);
    }
    // Structural misuse of pack_atlas.
    CHECK_THROWS_AS(pack_atlas({}, 64), validation_error);
    TriMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tri.faces = {{0, 1, 2}};
    std::vector<std::pair<TriMesh, std::vector<Vec2>>> bad;
    bad.emplace_back(tri, std::vector<Vec2>{Vec2(0, 0)});  // one uv, three verts
    CHECK_THROWS_AS(pack_atlas(bad, 64), validation_error);
}
