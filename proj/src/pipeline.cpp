#include "carve/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>

#include "carve/error.hpp"
#include "carve/hash.hpp"
#include "carve/io.hpp"
#include "carve/parallel.hpp"
#include "carve/rng.hpp"
#include "carve/scene.hpp"
#include "carve/sdf.hpp"

namespace carve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t derive_seed(std::uint64_t base, const char* tag) {
    return Rng(base).derive(tag).next_u64();
}

const std::set<std::string>& allowed_keys() {
    static const std::set<std::string> keys = {
        "seed", "threads", "out_dir",
        "inputs.coarse_mesh", "inputs.rig", "inputs.normals", "inputs.masks",
        "inputs.images", "inputs.labels", "inputs.skeleton",
        "rig.k", "rig.radius", "rig.image_size", "rig.fov_y", "rig.mirror",
        "fit.resolution", "fit.samples", "fit.sigma", "fit.iters", "fit.lr",
        "fit.box_margin",
        "sculpt.iters", "sculpt.lr", "sculpt.views_per_iter",
        "sculpt.laplacian",
        "unwrap.gamma", "unwrap.atlas_size",
        "texture.iters", "texture.lr", "texture.lambda_tv",
        "texture.w_front_back", "texture.w_other", "texture.init",
    };
    return keys;
}

}  // namespace

PipelineConfig pipeline_config_from_toml(const toml::Table& t) {
    for (const std::string& key : t.keys()) {
        if (!allowed_keys().count(key)) {
            throw io_error("unknown config key '" + key + "'");
        }
    }
    PipelineConfig c;
    c.seed = t.get_uint("seed", c.seed);
    c.threads = static_cast<int>(t.get_int("threads", c.threads));
    c.out_dir = t.get_string("out_dir", c.out_dir);
    c.inputs.coarse_mesh = t.get_string("inputs.coarse_mesh", "");
    c.inputs.rig = t.get_string("inputs.rig", "");
    c.inputs.normals = t.get_string("inputs.normals", "");
    c.inputs.masks = t.get_string("inputs.masks", "");
    c.inputs.images = t.get_string("inputs.images", "");
    c.inputs.labels = t.get_string("inputs.labels", "");
    c.inputs.skeleton = t.get_string("inputs.skeleton", "");
    c.rig.k = static_cast<int>(t.get_int("rig.k", c.rig.k));
    c.rig.radius = t.get_double("rig.radius", c.rig.radius);
    c.rig.image_size = static_cast<int>(t.get_int("rig.image_size", c.rig.image_size));
    c.rig.fov_y = t.get_double("rig.fov_y", c.rig.fov_y);
    c.rig.mirror = t.get_bool("rig.mirror", c.rig.mirror);
    c.fit.resolution = static_cast<int>(t.get_int("fit.resolution", c.fit.resolution));
    c.fit.samples = static_cast<int>(t.get_int("fit.samples", c.fit.samples));
    c.fit.sigma = t.get_double("fit.sigma", c.fit.sigma);
    c.fit.iters = static_cast<int>(t.get_int("fit.iters", c.fit.iters));
    c.fit.lr = t.get_double("fit.lr", c.fit.lr);
    c.fit.box_margin = t.get_double("fit.box_margin", c.fit.box_margin);
    c.sculpt.iters = static_cast<int>(t.get_int("sculpt.iters", c.sculpt.iters));
    c.sculpt.lr = t.get_double("sculpt.lr", c.sculpt.lr);
    c.sculpt.views_per_iter =
        static_cast<int>(t.get_int("sculpt.views_per_iter", c.sculpt.views_per_iter));
    c.sculpt.laplacian = t.get_double("sculpt.laplacian", c.sculpt.laplacian);
    c.unwrap.gamma = static_cast<int>(t.get_int("unwrap.gamma", c.unwrap.gamma));
    c.unwrap.atlas_size =
        static_cast<int>(t.get_int("unwrap.atlas_size", c.unwrap.atlas_size));
    c.texture.iters = static_cast<int>(t.get_int("texture.iters", c.texture.iters));
    c.texture.lr = t.get_double("texture.lr", c.texture.lr);
    c.texture.lambda_tv = t.get_double("texture.lambda_tv", c.texture.lambda_tv);
    c.texture.w_front_back =
        t.get_double("texture.w_front_back", c.texture.w_front_back);
    c.texture.w_other = t.get_double("texture.w_other", c.texture.w_other);
    c.texture.init = t.get_string("texture.init", c.texture.init);
    texture_init_from_string(c.texture.init);  // reject bad names early
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    PipelineConfig c = pipeline_config_from_toml(toml::parse_file(path));
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) {
            p = (base / p).string();
        }
    };
    resolve(c.inputs.coarse_mesh);
    resolve(c.inputs.rig);
    resolve(c.inputs.normals);
    resolve(c.inputs.masks);
    resolve(c.inputs.images);
    resolve(c.inputs.labels);
    resolve(c.inputs.skeleton);
    resolve(c.out_dir);
    return c;
}

namespace {

json config_json(const PipelineConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["out_dir"] = c.out_dir;
    j["inputs"] = {{"coarse_mesh", c.inputs.coarse_mesh},
                   {"rig", c.inputs.rig},
                   {"normals", c.inputs.normals},
                   {"masks", c.inputs.masks},
                   {"images", c.inputs.images},
                   {"labels", c.inputs.labels},
                   {"skeleton", c.inputs.skeleton}};
    j["rig"] = {{"k", c.rig.k},
                {"radius", c.rig.radius},
                {"image_size", c.rig.image_size},
                {"fov_y", c.rig.fov_y},
                {"mirror", c.rig.mirror}};
    j["fit"] = {{"resolution", c.fit.resolution}, {"samples", c.fit.samples},
                {"sigma", c.fit.sigma},           {"iters", c.fit.iters},
                {"lr", c.fit.lr},                 {"box_margin", c.fit.box_margin}};
    j["sculpt"] = {{"iters", c.sculpt.iters},
                   {"lr", c.sculpt.lr},
                   {"views_per_iter", c.sculpt.views_per_iter},
                   {"laplacian", c.sculpt.laplacian}};
    j["unwrap"] = {{"gamma", c.unwrap.gamma},
                   {"atlas_size", c.unwrap.atlas_size}};
    j["texture"] = {{"iters", c.texture.iters},
                    {"lr", c.texture.lr},
                    {"lambda_tv", c.texture.lambda_tv},
                    {"w_front_back", c.texture.w_front_back},
                    {"w_other", c.texture.w_other},
                    {"init", c.texture.init}};
    return j;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
    return config_json(cfg).dump(2);
}

std::vector<Camera> stage_rig(const PipelineConfig& cfg) {
    if (!cfg.inputs.rig.empty()) return load_camera_rig(cfg.inputs.rig);
    RigSpec spec;
    spec.k_views = cfg.rig.k;
    spec.radius = cfg.rig.radius;
    spec.image_size = cfg.rig.image_size;
    spec.fov_y_deg = cfg.rig.fov_y;
    spec.mirror_to_360 = cfg.rig.mirror;
    return instantiate_rig(spec);
}

Box3 fitting_box(const TriMesh& mesh, double margin) {
    const Box3 b = bounds(mesh);
    const Vec3 ext = b.extent();
    const double side =
        std::max({ext.x(), ext.y(), ext.z()}) * (1.0 + 2.0 * margin);
    if (!(side > 0)) {
        throw validation_error("fitting_box: mesh has no spatial extent");
    }
    const Vec3 c = b.center();
    const Vec3 half(side / 2, side / 2, side / 2);
    return Box3{c - half, c + half};
}

FitStageResult stage_fit(const TriMesh& coarse, const FitStageConfig& cfg,
                         std::uint64_t seed) {
    FitStageResult out;
    out.grid = build_grid(cfg.resolution, fitting_box(coarse, cfg.box_margin));
    init_sdf_from_mesh(out.grid, coarse);
    const std::vector<SamplePoint> samples = sample_near_surface(
        coarse, out.grid.box, cfg.samples, cfg.sigma,
        derive_seed(seed, "fit-samples"));
    out.report = fit_sdf(out.grid, samples, cfg.iters, cfg.lr);
    return out;
}

namespace {

void check_view_counts(std::size_t cams, std::size_t a, const char* a_name,
                       std::size_t b, const char* b_name) {
    if (a != cams || b != cams) {
        throw validation_error(
            "view files do not match the rig: " + std::to_string(cams) +
            " cameras, " + std::to_string(a) + " " + a_name + ", " +
            std::to_string(b) + " " + b_name);
    }
}

}  // namespace

std::vector<ViewTarget> load_view_targets(
    const std::vector<Camera>& rig, const std::vector<std::string>& normal_paths,
    const std::vector<std::string>& mask_paths) {
    check_view_counts(rig.size(), normal_paths.size(), "normal maps",
                      mask_paths.size(), "masks");
    std::vector<ViewTarget> views(rig.size());
    for (std::size_t i = 0; i < rig.size(); ++i) {
        views[i].cam = rig[i];
        views[i].normal = load_image(normal_paths[i], ImageKind::normal);
        views[i].mask = load_image(mask_paths[i], ImageKind::silhouette);
    }
    return views;
}

std::vector<ColorView> load_color_views(
    const std::vector<Camera>& rig, const std::vector<std::string>& image_paths,
    const std::vector<std::string>& mask_paths) {
    check_view_counts(rig.size(), image_paths.size(), "images",
                      mask_paths.size(), "masks");
    std::vector<ColorView> views(rig.size());
    for (std::size_t i = 0; i < rig.size(); ++i) {
        views[i].cam = rig[i];
        views[i].image = load_image(image_paths[i], ImageKind::color);
        views[i].mask = load_image(mask_paths[i], ImageKind::silhouette);
    }
    return views;
}

TexConfig::Init texture_init_from_string(const std::string& name) {
    if (name == "mid-gray") return TexConfig::Init::mid_gray;
    if (name == "zero") return TexConfig::Init::zero;
    if (name == "random") return TexConfig::Init::seeded_uniform;
    throw io_error("texture.init must be 'mid-gray', 'zero' or 'random'; got '" +
                   name + "'");
}

namespace {

std::vector<std::string> matches_or_error(const std::string& pattern,
                                          const char* what) {
    if (pattern.empty()) {
        throw validation_error(std::string("no ") + what +
                               " configured (set inputs." + what + ")");
    }
    std::vector<std::string> paths = expand_glob(pattern);
    if (paths.empty()) {
        throw io_error(std::string("no ") + what + " match pattern '" +
                       pattern + "'");
    }
    return paths;
}

struct StageClock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
            .count();
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw io_error("short write to '" + path + "'");
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    if (cfg.threads > 0) par::set_max_threads(cfg.threads);

    PipelineResult result;
    json report;
    report["schema_version"] = kReportSchemaVersion;
    report["tool_version"] = kToolVersion;
    report["config"] = config_json(cfg);

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) {
        result.code = exit_code::config;
        result.failed_stage = "config";
        result.error = "cannot create output directory '" + cfg.out_dir + "'";
        return result;
    }
    const auto out_path = [&](const char* name) {
        return (fs::path(cfg.out_dir) / name).string();
    };
    result.report_path = out_path("report.json");

    // Content hashes of every input that exists up front.
    json input_hashes = json::object();
    const auto hash_if_exists = [&](const std::string& path) {
        if (!path.empty() && fs::exists(path)) {
            input_hashes[path] = hash_file(path);
        }
    };
    hash_if_exists(cfg.inputs.coarse_mesh);
    hash_if_exists(cfg.inputs.rig);
    hash_if_exists(cfg.inputs.labels);
    hash_if_exists(cfg.inputs.skeleton);
    for (const std::string& pattern :
         {cfg.inputs.normals, cfg.inputs.masks, cfg.inputs.images}) {
        if (pattern.empty()) continue;
        try {
            for (const std::string& p : expand_glob(pattern)) hash_if_exists(p);
        } catch (const io_error&) {
            // Malformed patterns surface as stage errors later.
        }
    }
    report["input_hashes"] = input_hashes;

    std::vector<std::pair<std::string, std::string>> artifacts;  // name, path
    const auto emit = [&](const char* name) {
        artifacts.emplace_back(name, out_path(name));
        return out_path(name);
    };
    json timings = json::object();

    const auto finalize = [&](int code, const std::string& stage,
                              const std::string& error) {
        json output_hashes = json::object();
        for (const auto& [name, path] : artifacts) {
            if (fs::exists(path)) output_hashes[name] = hash_file(path);
        }
        report["output_hashes"] = output_hashes;
        report["timings"] = timings;
        report["ok"] = code == exit_code::ok;
        if (code != exit_code::ok) {
            report["partial"] = true;
            report["failed_stage"] = stage;
            report["error"] = error;
        }
        write_text(result.report_path, report.dump(2) + "\n");
        result.code = code;
        result.failed_stage = stage;
        result.error = error;
        return result;
    };

#define RUN_STAGE(stage_name, stage_code, body)                            \
    try {                                                                  \
        StageClock clock;                                                  \
        body;                                                              \
        timings[stage_name] = clock.seconds();                             \
    } catch (const std::exception& e) {                                    \
        return finalize(stage_code, stage_name,                            \
                        std::string(stage_name) + " stage: " + e.what());  \
    }

    // ---- instantiate ------------------------------------------------------
    std::vector<Camera> rig;
    RUN_STAGE("instantiate", exit_code::instantiate, {
        rig = stage_rig(cfg);
        save_camera_rig(emit("rig.json"), rig);
        if (!cfg.inputs.skeleton.empty()) {
            const Skeleton skel = load_skeleton(cfg.inputs.skeleton);
            std::vector<ImagePlane> poses;
            poses.reserve(rig.size());
            for (const Camera& cam : rig) {
                poses.push_back(project_skeleton(skel, cam));
            }
            save_image(emit("pose.png"), concat_views(poses));
        }
        report["instantiate"] = {{"views", rig.size()}};
    });

    // ---- fit ---------------------------------------------------------------
    RUN_STAGE("fit", exit_code::fit, {
        if (cfg.inputs.coarse_mesh.empty()) {
            throw validation_error(
                "no coarse mesh configured (set inputs.coarse_mesh)");
        }
        const TriMesh coarse = load_mesh(cfg.inputs.coarse_mesh);
        FitStageResult fit = stage_fit(coarse, cfg.fit, cfg.seed);
        save_grid(emit("grid.bin"), fit.grid);
        report["fit"] = {{"loss_trace", fit.report.loss_trace},
                         {"final_rmse", fit.report.final_rmse},
                         {"iterations", fit.report.iterations}};
    });

    // ---- sculpt -------------------------------------------------------------
    RUN_STAGE("sculpt", exit_code::sculpt, {
        TetGrid grid = load_grid(out_path("grid.bin"));
        const std::vector<ViewTarget> targets = load_view_targets(
            rig, matches_or_error(cfg.inputs.normals, "normals"),
            matches_or_error(cfg.inputs.masks, "masks"));
        SculptConfig sc;
        sc.iters = cfg.sculpt.iters;
        sc.lr = cfg.sculpt.lr;
        sc.views_per_iter = cfg.sculpt.views_per_iter;
        sc.laplacian_weight = cfg.sculpt.laplacian;
        sc.sampling = CameraSampling::rig;
        sc.rig = rig;
        sc.seed = derive_seed(cfg.seed, "sculpt");
        auto [refined, rep] = sculpt(grid, targets, sc);
        save_mesh(emit("refined.obj"), refined);
        const double first = rep.loss_trace.empty() ? 0.0 : rep.loss_trace.front();
        const double last = rep.loss_trace.empty() ? 0.0 : rep.loss_trace.back();
        report["sculpt"] = {
            {"loss_trace", rep.loss_trace},
            {"iterations", rep.iterations},
            {"loss_drop_fraction", first > 0 ? 1.0 - last / first : 0.0}};
    });

    // ---- unwrap -------------------------------------------------------------
    RUN_STAGE("unwrap", exit_code::unwrap, {
        const TriMesh refined = load_mesh(out_path("refined.obj"));
        std::vector<int> labels;
        if (!cfg.inputs.labels.empty()) {
            labels = load_labels(cfg.inputs.labels);
        }
        const PackedMesh packed =
            unwrap_mesh(refined, cfg.unwrap.gamma, labels, cfg.unwrap.atlas_size);
        save_mesh(emit("unwrapped.obj"), packed.mesh);
        save_labels(emit("unwrapped.labels.json"), packed.mesh.part_labels);
        json charts = json::array();
        for (std::size_t i = 0; i < packed.chart_boxes.size(); ++i) {
            const Box2& b = packed.chart_boxes[i];
            charts.push_back({{"part", i},
                              {"box", {b.lo.x(), b.lo.y(), b.hi.x(), b.hi.y()}}});
        }
        json layout = {{"schema_version", kReportSchemaVersion},
                       {"atlas_size", cfg.unwrap.atlas_size},
                       {"charts", charts}};
        write_text(emit("layout.json"), layout.dump(2) + "\n");
        report["unwrap"] = {{"parts", packed.chart_boxes.size()}};
    });

    // ---- texture ------------------------------------------------------------
    RUN_STAGE("texture", exit_code::texture, {
        TriMesh unwrapped = load_mesh(out_path("unwrapped.obj"));
        unwrapped.part_labels = load_labels(out_path("unwrapped.labels.json"));
        const std::vector<ColorView> views = load_color_views(
            rig, matches_or_error(cfg.inputs.images, "images"),
            matches_or_error(cfg.inputs.masks, "masks"));
        TexConfig tc;
        tc.iters = cfg.texture.iters;
        tc.lr = cfg.texture.lr;
        tc.lambda_tv = cfg.texture.lambda_tv;
        tc.w_front_back = cfg.texture.w_front_back;
        tc.w_other = cfg.texture.w_other;
        tc.init = texture_init_from_string(cfg.texture.init);
        tc.seed = derive_seed(cfg.seed, "texture");
        tc.atlas_size = cfg.unwrap.atlas_size;
        auto [atlas, rep] = bake(unwrapped, views, tc);
        save_image(emit("tex.png"), atlas_to_image(atlas));
        report["texture"] = {{"loss_trace", rep.loss_trace},
                             {"view_psnr", rep.view_psnr},
                             {"observed_texels", rep.observed_texels}};

        // Informational threshold checks mirroring the benchmark gates.
        double fb_min = 1e300, other_min = 1e300, fb_sum = 0, other_sum = 0;
        int fb_n = 0, other_n = 0;
        for (std::size_t i = 0; i < views.size(); ++i) {
            const double p = rep.view_psnr[i];
            const ViewTag tag = views[i].cam.view_tag;
            if (tag == ViewTag::front || tag == ViewTag::back) {
                fb_min = std::min(fb_min, p);
                fb_sum += p;
                ++fb_n;
            } else {
                other_min = std::min(other_min, p);
                other_sum += p;
                ++other_n;
            }
        }
        json checks;
        const json& sculpt_rep = report["sculpt"];
        checks["sculpt_loss_drop_ge_0.8"] =
            sculpt_rep["loss_drop_fraction"].get<double>() >= 0.8;
        if (fb_n > 0) checks["front_back_psnr_ge_30"] = fb_min >= 30.0;
        if (other_n > 0) checks["side_psnr_ge_26"] = other_min >= 26.0;
        if (fb_n > 0 && other_n > 0) {
            checks["front_back_mean_psnr_ge_side"] =
                fb_sum / fb_n >= other_sum / other_n;
        }
        report["checks"] = checks;
    });

#undef RUN_STAGE

    return finalize(exit_code::ok, "", "");
}

}  // namespace carve
