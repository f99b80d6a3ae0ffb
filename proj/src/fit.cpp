#include "carve/fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

namespace {

std::string point_string(const Vec3& p) {
    return "(" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ", " +
           std::to_string(p.z()) + ")";
}

// Sample stencils transposed into a vertex -> (sample, weight) gather so the
// gradient of each vertex is an ordered sum over its samples — identical for
// any thread count.
struct GatherPlan {
    std::vector<InterpStencil> stencils;
    std::vector<int> offsets;                    // per vertex, size verts+1
    std::vector<std::pair<int, double>> gather;  // (sample index, weight)
};

GatherPlan build_gather(const TetGrid& grid, const std::vector<SamplePoint>& samples) {
    const int num_samples = static_cast<int>(samples.size());
    const int num_verts = grid.vertex_count();

    GatherPlan plan;
    plan.stencils.resize(num_samples);
    par::for_each(num_samples, [&](int i) {
        plan.stencils[i] = interpolation_stencil(grid, samples[i].p);
    });

    plan.offsets.assign(num_verts + 1, 0);
    for (const InterpStencil& st : plan.stencils)
        for (int corner : st.corner) ++plan.offsets[corner + 1];
    for (int v = 0; v < num_verts; ++v) plan.offsets[v + 1] += plan.offsets[v];
    plan.gather.resize(plan.offsets[num_verts]);
    std::vector<int> cursor(plan.offsets.begin(), plan.offsets.end() - 1);
    for (int i = 0; i < num_samples; ++i)
        for (int k = 0; k < 4; ++k)
            plan.gather[cursor[plan.stencils[i].corner[k]]++] = {
                i, plan.stencils[i].weight[k]};
    return plan;
}

void residual_gradient(const GatherPlan& plan, const std::vector<double>& residuals,
                       std::vector<double>& grad) {
    const int num_verts = static_cast<int>(grad.size());
    par::for_each(num_verts, [&](int v) {
        double g = 0.0;
        for (int k = plan.offsets[v]; k < plan.offsets[v + 1]; ++k)
            g += 2.0 * residuals[plan.gather[k].first] * plan.gather[k].second;
        grad[v] = g;
    });
}

}  // namespace

InterpStencil interpolation_stencil(const TetGrid& grid, const Vec3& p) {
    if (!grid.box.contains(p))
        throw validation_error("grid interpolation: point " + point_string(p) +
                               " lies outside the grid bounds");
    const int n = grid.resolution;
    const Vec3 step = cell_size(grid);
    const Vec3 local = (p - grid.box.lo).cwiseQuotient(step);

    int cx = std::min(n - 1, std::max(0, static_cast<int>(std::floor(local.x()))));
    int cy = std::min(n - 1, std::max(0, static_cast<int>(std::floor(local.y()))));
    int cz = std::min(n - 1, std::max(0, static_cast<int>(std::floor(local.z()))));
    double f[3] = {std::clamp(local.x() - cx, 0.0, 1.0),
                   std::clamp(local.y() - cy, 0.0, 1.0),
                   std::clamp(local.z() - cz, 0.0, 1.0)};

    // The cell's six tetrahedra partition it by the ordering of the
    // fractional coordinates; sort axes descending (stable for ties) to
    // find the containing one, then the weights telescope.
    int axis[3] = {0, 1, 2};
    if (f[axis[0]] < f[axis[1]]) std::swap(axis[0], axis[1]);
    if (f[axis[1]] < f[axis[2]]) std::swap(axis[1], axis[2]);
    if (f[axis[0]] < f[axis[1]]) std::swap(axis[0], axis[1]);

    int cell[3] = {cx, cy, cz};
    auto corner = [&](int bits) {
        return grid_vertex_index(grid, cell[0] + (bits & 1), cell[1] + ((bits >> 1) & 1),
                                 cell[2] + ((bits >> 2) & 1));
    };
    const int step_bits[3] = {1, 2, 4};  // corner-code increment per axis

    InterpStencil st;
    int code = 0;
    st.corner[0] = corner(code);
    st.weight[0] = 1.0 - f[axis[0]];
    code |= step_bits[axis[0]];
    st.corner[1] = corner(code);
    st.weight[1] = f[axis[0]] - f[axis[1]];
    code |= step_bits[axis[1]];
    st.corner[2] = corner(code);
    st.weight[2] = f[axis[1]] - f[axis[2]];
    code |= step_bits[axis[2]];
    st.corner[3] = corner(code);
    st.weight[3] = f[axis[2]];
    return st;
}

double interpolate_sdf(const TetGrid& grid, const Vec3& p) {
    const InterpStencil st = interpolation_stencil(grid, p);
    double value = 0.0;
    for (int i = 0; i < 4; ++i) value += st.weight[i] * grid.sdf[st.corner[i]];
    return value;
}

double sdf_rmse(const TetGrid& grid, const std::vector<SamplePoint>& samples) {
    if (samples.empty()) throw validation_error("sdf_rmse: no samples");
    const int n = static_cast<int>(samples.size());
    const double total = par::block_sum(n, [&](int i) {
        const double r = interpolate_sdf(grid, samples[i].p) - samples[i].sdf_gt;
        return r * r;
    });
    return std::sqrt(total / n);
}

FitReport fit_sdf(TetGrid& grid, const std::vector<SamplePoint>& samples, int iters,
                  double lr) {
    if (samples.empty()) throw validation_error("fit_sdf: no samples");
    if (iters < 0) throw validation_error("fit_sdf: negative iteration count");
    for (const Vec3& o : grid.offsets)
        if (o != Vec3::Zero())
            throw validation_error("fit_sdf: grid offsets must be zero while fitting");

    const int num_samples = static_cast<int>(samples.size());
    const int num_verts = grid.vertex_count();
    const GatherPlan plan = build_gather(grid, samples);

    FitReport report;
    report.iterations = iters;

    std::vector<double> residuals(num_samples);
    auto compute_residuals = [&] {
        par::for_each(num_samples, [&](int i) {
            const InterpStencil& st = plan.stencils[i];
            double value = 0.0;
            for (int k = 0; k < 4; ++k) value += st.weight[k] * grid.sdf[st.corner[k]];
            residuals[i] = value - samples[i].sdf_gt;
        });
        return par::block_sum(num_samples,
                              [&](int i) { return residuals[i] * residuals[i]; });
    };

    AdamConfig cfg;
    cfg.lr = lr;
    Adam adam(num_verts, cfg);
    std::vector<double> grad(num_verts);

    report.loss_trace.push_back(compute_residuals());
    for (int it = 0; it < iters; ++it) {
        residual_gradient(plan, residuals, grad);
        adam.step(grid.sdf, grad);
        report.loss_trace.push_back(compute_residuals());
    }
    report.final_rmse = std::sqrt(report.loss_trace.back() / num_samples);
    return report;
}

std::vector<double> fit_sdf_gradient(const TetGrid& grid,
                                     const std::vector<SamplePoint>& samples) {
    if (samples.empty()) throw validation_error("fit_sdf_gradient: no samples");
    const int num_samples = static_cast<int>(samples.size());
    const GatherPlan plan = build_gather(grid, samples);

    std::vector<double> residuals(num_samples);
    par::for_each(num_samples, [&](int i) {
        const InterpStencil& st = plan.stencils[i];
        double value = 0.0;
        for (int k = 0; k < 4; ++k) value += st.weight[k] * grid.sdf[st.corner[k]];
        residuals[i] = value - samples[i].sdf_gt;
    });

    std::vector<double> grad(grid.vertex_count());
    residual_gradient(plan, residuals, grad);
    return grad;
}

}  // namespace carve
