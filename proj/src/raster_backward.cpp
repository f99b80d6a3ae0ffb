#include <cmath>
#include <string>
#include <vector>

#include "carve/error.hpp"
#include "carve/parallel.hpp"
#include "carve/raster.hpp"

namespace carve {

namespace {

void check_gradient_plane(const FrameBundle& bundle, const ImagePlane& grad,
                          const char* who) {
    if (grad.width != bundle.width || grad.height != bundle.height ||
        grad.channels != 3)
        throw validation_error(std::string(who) +
                               ": gradient image does not match the frame");
}

Vec3 pixel_grad(const ImagePlane& grad, std::int64_t i) {
    return Vec3(grad.data[i * 3 + 0], grad.data[i * 3 + 1], grad.data[i * 3 + 2]);
}

// Pull a vector back through x -> x/|x|: (I - x̂x̂ᵀ) g / |x|.
Vec3 through_normalize(const Vec3& unit, double len, const Vec3& g) {
    return (g - unit * unit.dot(g)) / len;
}

}  // namespace

std::vector<Vec3> backward_normal(const FrameBundle& bundle, const TriMesh& mesh,
                                  const ImagePlane& d_normal) {
    check_gradient_plane(bundle, d_normal, "backward_normal");

    const std::vector<Vec3> sums = angle_weighted_normal_sums(mesh);
    std::vector<Vec3> unit(sums.size());
    std::vector<double> len(sums.size());
    par::for_each(static_cast<std::int64_t>(sums.size()), [&](std::int64_t v) {
        len[v] = sums[v].norm();
        unit[v] = len[v] > 1e-20 ? Vec3(sums[v] / len[v]) : Vec3(0, 0, 1);
    });

    // Per-pixel: gradient w.r.t. the blended (pre-normalization) normal.
    const std::int64_t num_px = static_cast<std::int64_t>(bundle.coverage.size());
    std::vector<Vec3> blend_grad(num_px, Vec3::Zero());
    par::for_each(num_px, [&](std::int64_t i) {
        const PixelCoverage& cov = bundle.coverage[i];
        if (cov.face < 0) return;
        const Vec3 g = pixel_grad(d_normal, i);
        if (g == Vec3::Zero()) return;
        const auto& t = mesh.faces[cov.face];
        const Vec3 m = cov.bary[0] * unit[t[0]] + cov.bary[1] * unit[t[1]] +
                       cov.bary[2] * unit[t[2]];
        const double mlen = m.norm();
        if (mlen <= 1e-12) return;  // forward used the fallback constant
        blend_grad[i] = through_normalize(m / mlen, mlen, g);
    });

    // Scatter pixels -> per-vertex normal gradients. Serial in pixel order:
    // the accumulation order is fixed, so the result is thread-independent.
    std::vector<Vec3> unit_grad(sums.size(), Vec3::Zero());
    for (std::int64_t i = 0; i < num_px; ++i) {
        if (bundle.coverage[i].face < 0 || blend_grad[i] == Vec3::Zero()) continue;
        const PixelCoverage& cov = bundle.coverage[i];
        const auto& t = mesh.faces[cov.face];
        for (int k = 0; k < 3; ++k) unit_grad[t[k]] += cov.bary[k] * blend_grad[i];
    }

    // Through the per-vertex normalization of the angle-weighted sums.
    std::vector<Vec3> sum_grad(sums.size(), Vec3::Zero());
    par::for_each(static_cast<std::int64_t>(sums.size()), [&](std::int64_t v) {
        if (len[v] > 1e-20 && unit_grad[v] != Vec3::Zero())
            sum_grad[v] = through_normalize(unit[v], len[v], unit_grad[v]);
    });

    // Through the accumulation: sum_v = Σ_faces angle(face at v) * n̂_face.
    // Serial over faces in index order (deterministic accumulation).
    std::vector<Vec3> pos_grad(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 u = mesh.vertices[t[1]] - a;
        const Vec3 w = mesh.vertices[t[2]] - a;
        const Vec3 c = u.cross(w);
        const double clen = c.norm();
        if (clen <= 0.0) continue;  // skipped in the forward pass too
        const Vec3 nf = c / clen;

        Vec3 cross_grad = Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
            const Vec3& g_sum = sum_grad[t[k]];
            if (g_sum == Vec3::Zero()) continue;

            const Vec3& p = mesh.vertices[t[k]];
            const Vec3 e1 = mesh.vertices[t[(k + 1) % 3]] - p;
            const Vec3 e2 = mesh.vertices[t[(k + 2) % 3]] - p;
            const double l1 = e1.norm(), l2 = e2.norm();
            const Vec3 cr = e1.cross(e2);
            const double sin_t = cr.norm() / (l1 * l2);
            const double angle = std::atan2(cr.norm(), e1.dot(e2));

            // d(sum_v)/d(angle) = n̂_face; d(sum_v)/d(n̂_face) = angle * I.
            const double d_angle = nf.dot(g_sum);
            cross_grad += through_normalize(nf, clen, angle * g_sum);

            if (sin_t > 1e-9) {
                const double cos_t = std::cos(angle);
                const Vec3 u1 = e1 / l1, u2 = e2 / l2;
                const Vec3 d_e1 = d_angle * (cos_t * u1 - u2) / (l1 * sin_t);
                const Vec3 d_e2 = d_angle * (cos_t * u2 - u1) / (l2 * sin_t);
                pos_grad[t[(k + 1) % 3]] += d_e1;
                pos_grad[t[(k + 2) % 3]] += d_e2;
                pos_grad[t[k]] -= d_e1 + d_e2;
            }
        }
        if (cross_grad != Vec3::Zero()) {
            // c = u x w: dL/du = w x dL/dc, dL/dw = dL/dc x u.
            const Vec3 d_u = w.cross(cross_grad);
            const Vec3 d_w = cross_grad.cross(u);
            pos_grad[t[1]] += d_u;
            pos_grad[t[2]] += d_w;
            pos_grad[t[0]] -= d_u + d_w;
        }
    }
    return pos_grad;
}

std::vector<double> backward_color(const FrameBundle& bundle, const TriMesh& mesh,
                                   const TextureAtlas& atlas,
                                   const ImagePlane& d_color) {
    check_gradient_plane(bundle, d_color, "backward_color");
    if (!mesh.has_uvs())
        throw validation_error("backward_color: mesh has no UV coordinates");

    const std::int64_t num_px = static_cast<std::int64_t>(bundle.coverage.size());
    std::vector<BilinearTaps> taps(num_px);
    par::for_each(num_px, [&](std::int64_t i) {
        const PixelCoverage& cov = bundle.coverage[i];
        if (cov.face < 0) return;
        const auto& t = mesh.faces[cov.face];
        const Vec2 uv = cov.bary[0] * mesh.uvs[t[0]] + cov.bary[1] * mesh.uvs[t[1]] +
                        cov.bary[2] * mesh.uvs[t[2]];
        taps[i] = bilinear_taps(atlas.size, uv.x(), uv.y());
    });

    // Serial scatter in pixel order — deterministic for any thread count.
    std::vector<double> grad(atlas.texels.size(), 0.0);
    for (std::int64_t i = 0; i < num_px; ++i) {
        if (bundle.coverage[i].face < 0) continue;
        for (int k = 0; k < 4; ++k) {
            const std::size_t base = static_cast<std::size_t>(taps[i].texel[k]) * 3;
            for (int c = 0; c < 3; ++c)
                grad[base + c] += taps[i].weight[k] * d_color.data[i * 3 + c];
        }
    }
    return grad;
}

}  // namespace carve
