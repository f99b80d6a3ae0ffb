#include "carve/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "carve/error.hpp"
#include "carve/parallel.hpp"
#include "carve/sdf.hpp"

namespace carve {

std::vector<double> cumulative_face_areas(const TriMesh& mesh) {
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        total += face_area(mesh, static_cast<int>(f));
        cumulative[f] = total;
    }
    if (!(total > 0.0))
        throw validation_error("sample_on_surface: mesh has zero total area");
    return cumulative;
}

Vec3 sample_on_surface(const TriMesh& mesh, const std::vector<double>& cumulative_area,
                       Rng& rng) {
    const double total = cumulative_area.back();
    const double pick = rng.uniform() * total;
    const auto it =
        std::upper_bound(cumulative_area.begin(), cumulative_area.end(), pick);
    const int f = static_cast<int>(
        std::min<std::ptrdiff_t>(it - cumulative_area.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative_area.size()) - 1));

    // Square-root trick gives a uniform density over the triangle.
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& face = mesh.faces[f];
    return (1.0 - r1) * mesh.vertices[face[0]] +
           r1 * (1.0 - r2) * mesh.vertices[face[1]] + r1 * r2 * mesh.vertices[face[2]];
}

std::vector<SamplePoint> sample_near_surface(const TriMesh& mesh, const Box3& box,
                                             int n, double sigma, std::uint64_t seed) {
    if (n < 1) throw validation_error("sample_near_surface: need n >= 1 points");
    if (sigma < 0.0) throw validation_error("sample_near_surface: sigma must be >= 0");
    if (box.empty()) throw validation_error("sample_near_surface: empty bounds");

    const MeshDistanceField field(mesh);
    const std::vector<double> cumulative = cumulative_face_areas(mesh);

    const int n_uniform = n / 5;
    const int n_near = n - n_uniform;
    Rng rng(seed);

    std::vector<SamplePoint> samples(n);
    for (int i = 0; i < n_near; ++i) {
        Vec3 p = sample_on_surface(mesh, cumulative, rng);
        if (sigma > 0.0)
            p += sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
        samples[i].p = p.cwiseMax(box.lo).cwiseMin(box.hi);
    }
    for (int i = n_near; i < n; ++i) {
        const Vec3 u(rng.uniform(), rng.uniform(), rng.uniform());
        samples[i].p = box.lo + u.cwiseProduct(box.extent());
    }

    par::for_each(n, [&](int i) { samples[i].sdf_gt = field.signed_distance(samples[i].p); });
    return samples;
}

}  // namespace carve
