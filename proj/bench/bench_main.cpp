// Times the OpenMP kernels against their serial reference paths on fixed
// workloads and reports wall times, speedups, and whether both paths agree
// bit for bit (they must — the parallel kernels are defined to be exact
// reorderings). Exits nonzero on any output mismatch so the comparison
// doubles as a determinism guard.

#include <carve/fit.hpp>
#include <carve/marching_tets.hpp>
#include <carve/parallel.hpp>
#include <carve/pipeline.hpp>
#include <carve/raster.hpp>
#include <carve/rng.hpp>
#include <carve/sampling.hpp>
#include <carve/sdf.hpp>
#include <carve/sculpt.hpp>
#include <carve/tet_grid.hpp>
#include <carve/texture.hpp>
#include <carve/unwrap.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "support/assets.hpp"

using namespace carve;

namespace {

int g_mismatches = 0;

template <class F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

void report(const std::string& name, double serial_s, double parallel_s,
            bool identical) {
    std::printf("%-28s serial %8.1f ms   parallel %8.1f ms   speedup %5.2fx   %s\n",
                name.c_str(), serial_s * 1e3, parallel_s * 1e3,
                serial_s / parallel_s, identical ? "outputs identical" : "OUTPUTS DIFFER");
    std::fflush(stdout);
    if (!identical) ++g_mismatches;
}

// Runs `f` once with parallel kernels disabled and once enabled, timing both.
template <class Result>
void compare_paths(const std::string& name, int reps,
                   const std::function<Result()>& f,
                   const std::function<bool(const Result&, const Result&)>& same) {
    par::set_enabled(false);
    const Result serial_out = f();
    const double serial_t = time_best_of(reps, f);
    par::set_enabled(true);
    const Result parallel_out = f();
    const double parallel_t = time_best_of(reps, f);
    report(name, serial_t, parallel_t, same(serial_out, parallel_out));
}

bool same_plane(const ImagePlane& a, const ImagePlane& b) {
    return a.data == b.data;
}

void bench_block_sum() {
    const int n = 4'000'000;
    auto term = [](int i) {
        const double x = 1e-6 * i;
        return std::sin(x) * std::cos(3.0 * x);
    };
    const double a = par::block_sum_serial(n, term);
    const double serial_t =
        time_best_of(3, [&] { (void)par::block_sum_serial(n, term); });
    const double b = par::block_sum(n, term);
    const double parallel_t = time_best_of(3, [&] { (void)par::block_sum(n, term); });
    report("block-sum (4M terms)", serial_t, parallel_t, a == b);
}

void bench_render() {
    const TriMesh mesh = testassets::humanoid(32);
    const Camera cam = testassets::standard_rig(1, 512)[0];
    const FrameBundle ref = render_reference(mesh, cam);
    const double serial_t =
        time_best_of(3, [&] { (void)render_reference(mesh, cam); });
    const FrameBundle par_fb = render(mesh, cam);
    const double parallel_t = time_best_of(3, [&] { (void)render(mesh, cam); });
    const bool identical = same_plane(ref.silhouette, par_fb.silhouette) &&
                           ref.normal && par_fb.normal &&
                           same_plane(*ref.normal, *par_fb.normal);
    report("render (512^2, tiled)", serial_t, parallel_t, identical);
}

void bench_marching_tets() {
    TetGrid grid = build_grid(64, Box3{Vec3(-0.45, -0.45, -0.45),
                                       Vec3(0.45, 0.45, 0.45)});
    init_sdf_from_function(grid, [](const Vec3& p) { return p.norm() - 0.3; });
    compare_paths<TriMesh>(
        "surface extraction (64^3)", 3,
        [&] { return marching_tetrahedra(grid).mesh; },
        [](const TriMesh& a, const TriMesh& b) {
            if (a.faces != b.faces) return false;
            if (a.vertices.size() != b.vertices.size()) return false;
            for (std::size_t i = 0; i < a.vertices.size(); ++i)
                if ((a.vertices[i] - b.vertices[i]).norm() != 0.0) return false;
            return true;
        });
}

void bench_fit() {
    const TriMesh sphere = testassets::icosphere(3, 0.35);
    const Box3 box = fitting_box(sphere, 0.15);
    const std::vector<SamplePoint> samples =
        sample_near_surface(sphere, box, 6000, 0.05, 5);
    TetGrid base = build_grid(32, box);
    init_sdf_from_mesh(base, sphere);
    compare_paths<std::vector<double>>(
        "sdf fit (30 iterations)", 2,
        [&] {
            TetGrid grid = base;
            (void)fit_sdf(grid, samples, 30, 0.01);
            return grid.sdf;
        },
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return a == b;
        });
}

void bench_backward_normal() {
    const TriMesh mesh = testassets::humanoid(32);
    const Camera cam = testassets::standard_rig(1, 512)[0];
    const FrameBundle fb = render(mesh, cam);
    ImagePlane d(fb.width, fb.height, ImageKind::normal);
    Rng rng(31);
    for (std::size_t i = 0; i < fb.coverage.size(); ++i) {
        if (fb.coverage[i].face < 0) continue;
        for (int ch = 0; ch < 3; ++ch)
            d.data[i * 3 + ch] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    compare_paths<std::vector<Vec3>>(
        "normal backward (512^2)", 3,
        [&] { return backward_normal(fb, mesh, d); },
        [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if ((a[i] - b[i]).norm() != 0.0) return false;
            return true;
        });
}

void bench_bake() {
    TriMesh cyl = testassets::open_cylinder(0.3, 1.2, 48, 6);
    std::vector<Vec2> uv = cylinder_unwrap(cyl, Vec3(0, 1, 0));
    std::vector<std::pair<TriMesh, std::vector<Vec2>>> parts;
    parts.emplace_back(std::move(cyl), std::move(uv));
    const TriMesh mesh = pack_atlas(parts, 128).mesh;
    const TextureAtlas truth = testassets::procedural_atlas(128);
    const std::vector<ColorView> views =
        testassets::make_color_views(mesh, truth, testassets::standard_rig(4, 192));
    TexConfig cfg;
    cfg.atlas_size = 128;
    cfg.iters = 30;
    compare_paths<std::vector<float>>(
        "texture bake (30 iterations)", 2,
        [&] { return bake(mesh, views, cfg).first.texels; },
        [](const std::vector<float>& a, const std::vector<float>& b) {
            return a == b;
        });
}

}  // namespace

int main() {
    std::printf("worker threads available: %d (parallel path), 1 (serial path)\n",
                par::max_threads());
    bench_block_sum();
    bench_render();
    bench_marching_tets();
    bench_fit();
    bench_backward_normal();
    bench_bake();
    par::set_enabled(true);
    if (g_mismatches > 0) {
        std::printf("%d kernel(s) disagree between serial and parallel paths\n",
                    g_mismatches);
        return 1;
    }
    std::printf("all kernels agree bit for bit across serial and parallel paths\n");
    return 0;
}
