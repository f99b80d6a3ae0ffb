#include "carve/sculpt.hpp"

#include <cmath>
#include <string>

#include "carve/error.hpp"
#include "carve/optim.hpp"
#include "carve/parallel.hpp"
#include "carve/raster.hpp"
#include "carve/rng.hpp"

namespace carve {

void validate(const SculptConfig& cfg) {
    if (cfg.iters < 0) throw validation_error("sculpt: iters must be >= 0");
    if (!(cfg.lr > 0.0)) throw validation_error("sculpt: lr must be positive");
    if (cfg.views_per_iter < 1)
        throw validation_error("sculpt: views_per_iter must be >= 1");
    if (cfg.laplacian_weight < 0.0)
        throw validation_error("sculpt: laplacian_weight must be >= 0");
    if (cfg.sampling == CameraSampling::rig && cfg.rig.empty())
        throw validation_error("sculpt: rig sampling needs at least one camera");
}

Camera sample_view(const SculptConfig& cfg, int iteration) {
    validate(cfg);
    if (cfg.sampling == CameraSampling::rig)
        return cfg.rig[iteration % static_cast<int>(cfg.rig.size())];

    Rng rng = Rng(cfg.seed).derive("view:" + std::to_string(iteration));
    const double azimuth = radians(rng.uniform(0.0, 360.0));
    const double elevation = radians(rng.uniform(-15.0, 30.0));

    Camera cam;
    cam.position = cfg.target_center +
                   cfg.radius * Vec3(std::cos(elevation) * std::sin(azimuth),
                                     std::sin(elevation),
                                     std::cos(elevation) * std::cos(azimuth));
    cam.look_at = cfg.target_center;
    cam.up = Vec3(0, 1, 0);
    cam.fov_y_deg = cfg.fov_y_deg;
    cam.width = cfg.image_size;
    cam.height = cfg.image_size;
    cam.view_tag = ViewTag::other;
    return cam;
}

namespace {

void check_same_shape(const ImagePlane& a, const ImagePlane& b, const char* who) {
    if (a.width != b.width || a.height != b.height)
        throw validation_error(std::string(who) + ": image dimensions differ");
}

}  // namespace

ImagePlane mask_intersection(const ImagePlane& mask_a, const ImagePlane& mask_b) {
    check_same_shape(mask_a, mask_b, "mask_intersection");
    if (mask_a.channels != 1 || mask_b.channels != 1)
        throw validation_error("mask_intersection: masks must be single-channel");
    ImagePlane out(mask_a.width, mask_a.height, ImageKind::silhouette);
    par::for_each(out.pixel_count(), [&](std::int64_t i) {
        out.data[i] = (mask_a.data[i] == 1.0f && mask_b.data[i] == 1.0f) ? 1.0f : 0.0f;
    });
    return out;
}

double normal_loss(const ImagePlane& rendered, const ImagePlane& target,
                   const ImagePlane& mask) {
    check_same_shape(rendered, target, "normal_loss");
    check_same_shape(rendered, mask, "normal_loss");
    if (rendered.channels != 3 || target.channels != 3 || mask.channels != 1)
        throw validation_error("normal_loss: expected 3-channel normals, 1-channel mask");

    const double count = par::block_sum(
        mask.pixel_count(), [&](std::int64_t i) { return mask.data[i] == 1.0f ? 1.0 : 0.0; });
    if (count == 0.0) return 0.0;

    const double total = par::block_sum(mask.pixel_count(), [&](std::int64_t i) {
        if (mask.data[i] != 1.0f) return 0.0;
        const Vec3 nr = decode_normal(rendered.data[i * 3], rendered.data[i * 3 + 1],
                                      rendered.data[i * 3 + 2]);
        const Vec3 nt = decode_normal(target.data[i * 3], target.data[i * 3 + 1],
                                      target.data[i * 3 + 2]);
        return (nr - nt).squaredNorm();
    });
    return total / count;
}

ImagePlane normal_loss_grad(const ImagePlane& rendered, const ImagePlane& target,
                            const ImagePlane& mask) {
    check_same_shape(rendered, target, "normal_loss_grad");
    check_same_shape(rendered, mask, "normal_loss_grad");

    const double count = par::block_sum(
        mask.pixel_count(), [&](std::int64_t i) { return mask.data[i] == 1.0f ? 1.0 : 0.0; });

    // Raw gradient values; not a displayable image.
    ImagePlane grad(rendered.width, rendered.height, ImageKind::color);
    if (count == 0.0) return grad;
    const double scale = 2.0 / count;
    par::for_each(grad.pixel_count(), [&](std::int64_t i) {
        if (mask.data[i] != 1.0f) return;
        const Vec3 nr = decode_normal(rendered.data[i * 3], rendered.data[i * 3 + 1],
                                      rendered.data[i * 3 + 2]);
        const Vec3 nt = decode_normal(target.data[i * 3], target.data[i * 3 + 1],
                                      target.data[i * 3 + 2]);
        const Vec3 g = scale * (nr - nt);
        grad.data[i * 3 + 0] = static_cast<float>(g.x());
        grad.data[i * 3 + 1] = static_cast<float>(g.y());
        grad.data[i * 3 + 2] = static_cast<float>(g.z());
    });
    return grad;
}

double laplacian_energy(const TriMesh& mesh) {
    const auto adjacency = vertex_adjacency(mesh);
    const int nv = static_cast<int>(mesh.vertices.size());
    return par::block_sum(nv, [&](std::int64_t v) {
               const auto& nbrs = adjacency[v];
               if (nbrs.empty()) return 0.0;
               Vec3 mean = Vec3::Zero();
               for (int u : nbrs) mean += mesh.vertices[u];
               mean /= static_cast<double>(nbrs.size());
               return (mean - mesh.vertices[v]).squaredNorm();
           }) /
           nv;
}

std::vector<Vec3> laplacian_energy_grad(const TriMesh& mesh) {
    const auto adjacency = vertex_adjacency(mesh);
    const int nv = static_cast<int>(mesh.vertices.size());
    std::vector<Vec3> lap(nv);
    par::for_each(nv, [&](std::int64_t v) {
        const auto& nbrs = adjacency[v];
        Vec3 mean = mesh.vertices[v];
        if (!nbrs.empty()) {
            mean = Vec3::Zero();
            for (int u : nbrs) mean += mesh.vertices[u];
            mean /= static_cast<double>(nbrs.size());
        }
        lap[v] = mean - mesh.vertices[v];
    });

    // E = Σ|lap_v|²/V.  dE/dp_w = (2/V)(-lap_w + Σ_{v: w∈N(v)} lap_v/|N(v)|).
    std::vector<Vec3> grad(nv, Vec3::Zero());
    for (int v = 0; v < nv; ++v) {  // serial: deterministic accumulation
        grad[v] -= lap[v];
        const double inv = 1.0 / static_cast<double>(adjacency[v].size());
        for (int u : adjacency[v]) grad[u] += inv * lap[v];
    }
    const double scale = 2.0 / nv;
    par::for_each(nv, [&](std::int64_t v) { grad[v] *= scale; });
    return grad;
}

std::pair<TriMesh, SculptReport> sculpt(TetGrid& grid,
                                        const std::vector<ViewTarget>& targets,
                                        const SculptConfig& cfg) {
    validate(cfg);
    if (targets.empty()) throw validation_error("sculpt: no target views");
    for (const ViewTarget& t : targets) {
        validate(t.cam);
        if (t.normal.kind != ImageKind::normal || t.mask.kind != ImageKind::silhouette)
            throw validation_error("sculpt: targets need a normal map and a mask");
        check_same_shape(t.normal, t.mask, "sculpt");
        if (t.normal.width != t.cam.width || t.normal.height != t.cam.height)
            throw validation_error("sculpt: target image size does not match camera");
    }

    const int nv = grid.vertex_count();
    // One flat parameter vector: [sdf | offsets.xyz], one Adam state.
    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    Adam adam(static_cast<std::size_t>(nv) * 4, adam_cfg);
    std::vector<double> params(static_cast<std::size_t>(nv) * 4);
    std::vector<double> grad(params.size());

    auto pack = [&] {
        par::for_each(nv, [&](std::int64_t v) {
            params[v] = grid.sdf[v];
            for (int c = 0; c < 3; ++c) params[nv + v * 3 + c] = grid.offsets[v][c];
        });
    };
    auto unpack = [&] {
        par::for_each(nv, [&](std::int64_t v) {
            grid.sdf[v] = params[v];
            for (int c = 0; c < 3; ++c) grid.offsets[v][c] = params[nv + v * 3 + c];
        });
    };

    SculptReport report;
    report.iterations = cfg.iters;

    const int num_targets = static_cast<int>(targets.size());
    MtResult mt;
    for (int it = 0; it < cfg.iters; ++it) {
        try {
            mt = marching_tetrahedra(grid);
        } catch (const validation_error& e) {
            throw validation_error("sculpt: surface vanished at iteration " +
                                   std::to_string(it) + " (" + e.what() + ")");
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<Vec3> pos_grad(mt.mesh.vertices.size(), Vec3::Zero());
        double iter_loss = 0.0;

        // Views rotate round-robin through the target list; each view's
        // contribution is averaged so the loss scale does not depend on
        // views_per_iter.
        const double view_scale = 1.0 / cfg.views_per_iter;
        for (int j = 0; j < cfg.views_per_iter; ++j) {
            const ViewTarget& target =
                targets[(static_cast<std::int64_t>(it) * cfg.views_per_iter + j) %
                        num_targets];
            RenderRequest req;
            req.normals = true;
            const FrameBundle bundle = render(mt.mesh, target.cam, req);
            const ImagePlane mask = mask_intersection(bundle.silhouette, target.mask);
            iter_loss += view_scale * normal_loss(*bundle.normal, target.normal, mask);
            const ImagePlane pixel_grad = normal_loss_grad(*bundle.normal,
                                                           target.normal, mask);
            const std::vector<Vec3> view_grad =
                backward_normal(bundle, mt.mesh, pixel_grad);
            par::for_each(static_cast<std::int64_t>(pos_grad.size()), [&](std::int64_t v) {
                pos_grad[v] += view_scale * view_grad[v];
            });
        }

        if (cfg.laplacian_weight > 0.0) {
            iter_loss += cfg.laplacian_weight * laplacian_energy(mt.mesh);
            const std::vector<Vec3> lap_grad = laplacian_energy_grad(mt.mesh);
            par::for_each(static_cast<std::int64_t>(pos_grad.size()), [&](std::int64_t v) {
                pos_grad[v] += cfg.laplacian_weight * lap_grad[v];
            });
        }
        report.loss_trace.push_back(iter_loss);

        // Surface vertices -> grid parameters through the interpolation
        // Jacobian. Serial over vertices: grid vertices shared by several
        // crossings accumulate in a fixed order.
        for (std::size_t i = 0; i < mt.vertex_edges.size(); ++i) {
            const Vec3& g = pos_grad[i];
            if (g == Vec3::Zero()) continue;
            const int a = mt.vertex_edges[i][0], b = mt.vertex_edges[i][1];
            const MtJacobian jac = mt_vertex_jacobian(grid, a, b);
            grad[a] += g.dot(jac.dp_dsa);
            grad[b] += g.dot(jac.dp_dsb);
            for (int c = 0; c < 3; ++c) {
                grad[nv + a * 3 + c] += jac.w_a * g[c];
                grad[nv + b * 3 + c] += jac.w_b * g[c];
            }
        }

        pack();
        adam.step(params, grad);
        unpack();
        clamp_offsets(grid);
    }

    try {
        mt = marching_tetrahedra(grid);
    } catch (const validation_error& e) {
        throw validation_error(std::string("sculpt: surface vanished after the last "
                                           "update (") +
                               e.what() + ")");
    }
    return {std::move(mt.mesh), std::move(report)};
}

}  // namespace carve
