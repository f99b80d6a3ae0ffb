// carve: mesh refinement and texture recovery from multi-view images.
//
// Subcommands: instantiate (camera rig + pose sheets), sculpt (fit a
// tetrahedral SDF to a coarse mesh, then carve detail from normal maps),
// unwrap (semantic partition + cylindrical UV atlas), texture (multi-view
// texture bake), render (make normal/mask/color views of a mesh), pipeline
// (all stages from a TOML config). Exit code 0 on success; each failing
// stage maps to its own nonzero code.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "carve/error.hpp"
#include "carve/io.hpp"
#include "carve/parallel.hpp"
#include "carve/pipeline.hpp"
#include "carve/rng.hpp"
#include "carve/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace carve;

namespace {

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw io_error("short write to '" + path + "'");
}

// Runs `body` and maps any error to the given exit code, printing the
// failing stage and cause to stderr.
template <class F>
int run_stage(const char* stage, int code, F&& body) {
    try {
        body();
        return exit_code::ok;
    } catch (const std::exception& e) {
        std::cerr << "error in " << stage << ": " << e.what() << "\n";
        return code;
    }
}

struct SeedOpt {
    std::uint64_t value = 0;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh refinement and texture recovery toolkit"};
    app.set_version_flag("--version", std::string("carve ") + kToolVersion);
    app.require_subcommand(1);

    int threads = 0;
    SeedOpt seed;
    app.add_option("--threads", threads,
                   "cap worker threads (results do not depend on this)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed.value, "seed for every stochastic choice");

    // ---- instantiate -------------------------------------------------------
    auto* cmd_inst = app.add_subcommand(
        "instantiate", "build the horizontal camera rig (and pose images)");
    RigSpec rig_spec;
    std::string inst_dir = "rig", inst_skel;
    cmd_inst->add_option("--k", rig_spec.k_views, "number of views")
        ->capture_default_str();
    cmd_inst->add_option("--radius", rig_spec.radius, "camera distance")
        ->capture_default_str();
    cmd_inst->add_option("--size,--image-size", rig_spec.image_size,
                         "view resolution")
        ->capture_default_str();
    cmd_inst->add_option("--fov-y", rig_spec.fov_y_deg, "vertical fov, degrees")
        ->capture_default_str();
    cmd_inst->add_flag("--mirror", rig_spec.mirror_to_360,
                       "append mirrored azimuths to cover 360 degrees");
    cmd_inst
        ->add_option("--out-dir", inst_dir,
                     "directory for camera_rig.json and pose images")
        ->capture_default_str();
    cmd_inst->add_option("--skeleton", inst_skel,
                         "skeleton JSON; enables per-view pose images and the "
                         "concatenated pose sheet");

    // ---- sculpt -------------------------------------------------------------
    auto* cmd_sculpt = app.add_subcommand(
        "sculpt", "fit a tetrahedral SDF to a coarse mesh and carve detail "
                  "from multi-view normal maps");
    std::string sc_coarse, sc_views, sc_normals, sc_masks;
    std::string sc_out = "refined.obj", sc_report, sc_grid_out;
    FitStageConfig sc_fit;
    SculptStageConfig sc_cfg;
    cmd_sculpt->add_option("--coarse", sc_coarse, "coarse mesh (OBJ/PLY)")
        ->required();
    cmd_sculpt->add_option("--views", sc_views, "camera rig JSON")->required();
    cmd_sculpt->add_option("--normals", sc_normals, "normal map glob")
        ->required();
    cmd_sculpt->add_option("--masks", sc_masks, "mask glob")->required();
    cmd_sculpt->add_option("--resolution", sc_fit.resolution, "grid resolution")
        ->capture_default_str();
    cmd_sculpt->add_option("--iters", sc_cfg.iters, "carve iterations")
        ->capture_default_str();
    cmd_sculpt->add_option("--lr", sc_cfg.lr, "carve learning rate")
        ->capture_default_str();
    cmd_sculpt
        ->add_option("--views-per-iter", sc_cfg.views_per_iter,
                     "views per iteration")
        ->capture_default_str();
    cmd_sculpt
        ->add_option("--laplacian", sc_cfg.laplacian,
                     "smoothness regularizer weight")
        ->capture_default_str();
    cmd_sculpt->add_option("--fit-iters", sc_fit.iters, "SDF fit iterations")
        ->capture_default_str();
    cmd_sculpt->add_option("--fit-lr", sc_fit.lr, "SDF fit learning rate")
        ->capture_default_str();
    cmd_sculpt->add_option("--samples", sc_fit.samples, "SDF fit sample count")
        ->capture_default_str();
    cmd_sculpt->add_option("--sigma", sc_fit.sigma, "near-surface sample spread")
        ->capture_default_str();
    cmd_sculpt->add_option("--out", sc_out, "refined mesh path")
        ->capture_default_str();
    cmd_sculpt->add_option("--report", sc_report, "loss-trace JSON path");
    cmd_sculpt->add_option("--grid-out", sc_grid_out,
                           "also save the fitted grid");

    // ---- unwrap -------------------------------------------------------------
    auto* cmd_unwrap = app.add_subcommand(
        "unwrap", "split into body parts and pack a cylindrical UV atlas");
    std::string uw_mesh, uw_labels, uw_out = "unwrapped.obj";
    std::string uw_layout = "layout.json";
    UnwrapStageConfig uw_cfg;
    cmd_unwrap->add_option("--mesh", uw_mesh, "mesh to unwrap")->required();
    cmd_unwrap->add_option("--labels", uw_labels,
                           "per-vertex labels JSON (heuristic when absent)");
    cmd_unwrap->add_option("--gamma", uw_cfg.gamma, "number of parts")
        ->capture_default_str();
    cmd_unwrap->add_option("--atlas-size", uw_cfg.atlas_size, "atlas texels")
        ->capture_default_str();
    cmd_unwrap->add_option("--out", uw_out, "unwrapped mesh path")
        ->capture_default_str();
    cmd_unwrap->add_option("--layout", uw_layout, "chart layout JSON path")
        ->capture_default_str();

    // ---- texture ------------------------------------------------------------
    auto* cmd_tex = app.add_subcommand(
        "texture", "recover a texture atlas from multi-view images");
    std::string tx_mesh, tx_labels, tx_views, tx_images, tx_masks;
    std::string tx_out = "tex.png", tx_report;
    TextureStageConfig tx_cfg;
    int tx_atlas_size = 1024;
    cmd_tex->add_option("--mesh", tx_mesh, "UV-mapped mesh")->required();
    cmd_tex->add_option("--labels", tx_labels,
                        "per-vertex part labels JSON (chart layout hint)");
    cmd_tex->add_option("--views", tx_views, "camera rig JSON")->required();
    cmd_tex->add_option("--images", tx_images, "color image glob")->required();
    cmd_tex->add_option("--masks", tx_masks, "mask glob")->required();
    cmd_tex->add_option("--iters", tx_cfg.iters, "bake iterations")
        ->capture_default_str();
    cmd_tex->add_option("--lr", tx_cfg.lr, "learning rate")
        ->capture_default_str();
    cmd_tex->add_option("--lambda-tv", tx_cfg.lambda_tv, "smoothness weight")
        ->capture_default_str();
    cmd_tex->add_option("--w-front-back", tx_cfg.w_front_back,
                        "front/back view weight")
        ->capture_default_str();
    cmd_tex->add_option("--w-other", tx_cfg.w_other, "side view weight")
        ->capture_default_str();
    cmd_tex->add_option("--init", tx_cfg.init, "mid-gray | zero | random")
        ->capture_default_str();
    cmd_tex->add_option("--atlas-size", tx_atlas_size, "atlas texels")
        ->capture_default_str();
    cmd_tex->add_option("--out", tx_out, "atlas PNG path")
        ->capture_default_str();
    cmd_tex->add_option("--report", tx_report, "bake report JSON path");

    // ---- render -------------------------------------------------------------
    auto* cmd_render = app.add_subcommand(
        "render", "render one rig view of a mesh (normals, mask, color)");
    std::string rd_mesh, rd_views, rd_atlas;
    std::string rd_out, rd_normals, rd_mask;
    int rd_index = 0;
    cmd_render->add_option("--mesh", rd_mesh, "mesh to render")->required();
    cmd_render->add_option("--camera,--views", rd_views, "camera rig JSON")
        ->required();
    cmd_render->add_option("--index", rd_index, "view index into the rig")
        ->capture_default_str();
    cmd_render->add_option("--atlas", rd_atlas,
                           "texture atlas PNG; enables color output");
    cmd_render->add_option("--out", rd_out,
                           "color PNG path (requires --atlas and mesh UVs)");
    cmd_render->add_option("--normals", rd_normals, "normal map PFM path");
    cmd_render->add_option("--mask", rd_mask, "silhouette PNG path");

    // ---- pipeline -----------------------------------------------------------
    auto* cmd_pipe =
        app.add_subcommand("pipeline", "run every stage from a TOML config");
    std::string pipe_config;
    cmd_pipe->add_option("--config", pipe_config, "pipeline TOML config")
        ->required();

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) par::set_max_threads(threads);

    if (cmd_inst->parsed()) {
        return run_stage("instantiate", exit_code::instantiate, [&] {
            const std::vector<Camera> rig = instantiate_rig(rig_spec);
            fs::create_directories(inst_dir);
            const std::string rig_path =
                (fs::path(inst_dir) / "camera_rig.json").string();
            save_camera_rig(rig_path, rig);
            std::cout << "wrote " << rig_path << " (" << rig.size()
                      << " views)\n";
            if (!inst_skel.empty()) {
                const Skeleton skel = load_skeleton(inst_skel);
                std::vector<ImagePlane> poses;
                poses.reserve(rig.size());
                for (std::size_t i = 0; i < rig.size(); ++i) {
                    poses.push_back(project_skeleton(skel, rig[i]));
                    char name[32];
                    std::snprintf(name, sizeof(name), "pose_%02d.png",
                                  static_cast<int>(i));
                    save_image((fs::path(inst_dir) / name).string(),
                               poses.back());
                }
                const std::string sheet =
                    (fs::path(inst_dir) / "pose_sheet.png").string();
                save_image(sheet, concat_views(poses));
                std::cout << "wrote " << rig.size() << " pose image(s) and "
                          << sheet << "\n";
            }
        });
    }

    if (cmd_sculpt->parsed()) {
        TriMesh coarse;
        FitStageResult fit;
        int code = run_stage("fit", exit_code::fit, [&] {
            coarse = load_mesh(sc_coarse);
            fit = stage_fit(coarse, sc_fit, seed.value);
            if (!sc_grid_out.empty()) save_grid(sc_grid_out, fit.grid);
        });
        if (code != exit_code::ok) return code;
        return run_stage("sculpt", exit_code::sculpt, [&] {
            const std::vector<Camera> rig = load_camera_rig(sc_views);
            const std::vector<ViewTarget> targets = load_view_targets(
                rig, expand_glob(sc_normals), expand_glob(sc_masks));
            SculptConfig cfg;
            cfg.iters = sc_cfg.iters;
            cfg.lr = sc_cfg.lr;
            cfg.views_per_iter = sc_cfg.views_per_iter;
            cfg.laplacian_weight = sc_cfg.laplacian;
            cfg.sampling = CameraSampling::rig;
            cfg.rig = rig;
            cfg.seed = Rng(seed.value).derive("sculpt").next_u64();
            auto [refined, rep] = sculpt(fit.grid, targets, cfg);
            save_mesh(sc_out, refined);
            std::cout << "wrote " << sc_out << " (" << refined.vertices.size()
                      << " vertices)\n";
            if (!sc_report.empty()) {
                write_json(sc_report,
                           json{{"fit",
                                 {{"loss_trace", fit.report.loss_trace},
                                  {"final_rmse", fit.report.final_rmse}}},
                                {"sculpt",
                                 {{"loss_trace", rep.loss_trace},
                                  {"iterations", rep.iterations}}}});
            }
        });
    }

    if (cmd_unwrap->parsed()) {
        return run_stage("unwrap", exit_code::unwrap, [&] {
            const TriMesh mesh = load_mesh(uw_mesh);
            std::vector<int> labels;
            if (!uw_labels.empty()) labels = load_labels(uw_labels);
            const PackedMesh packed =
                unwrap_mesh(mesh, uw_cfg.gamma, labels, uw_cfg.atlas_size);
            save_mesh(uw_out, packed.mesh);
            save_labels(uw_out + ".labels.json", packed.mesh.part_labels);
            json charts = json::array();
            for (std::size_t i = 0; i < packed.chart_boxes.size(); ++i) {
                const Box2& b = packed.chart_boxes[i];
                charts.push_back(
                    {{"part", i},
                     {"box", {b.lo.x(), b.lo.y(), b.hi.x(), b.hi.y()}}});
            }
            write_json(uw_layout, json{{"schema_version", kReportSchemaVersion},
                                       {"atlas_size", uw_cfg.atlas_size},
                                       {"charts", charts}});
            std::cout << "wrote " << uw_out << " and " << uw_layout << " ("
                      << packed.chart_boxes.size() << " charts)\n";
        });
    }

    if (cmd_tex->parsed()) {
        return run_stage("texture", exit_code::texture, [&] {
            TriMesh mesh = load_mesh(tx_mesh);
            if (!tx_labels.empty()) mesh.part_labels = load_labels(tx_labels);
            const std::vector<Camera> rig = load_camera_rig(tx_views);
            const std::vector<ColorView> views = load_color_views(
                rig, expand_glob(tx_images), expand_glob(tx_masks));
            TexConfig cfg;
            cfg.iters = tx_cfg.iters;
            cfg.lr = tx_cfg.lr;
            cfg.lambda_tv = tx_cfg.lambda_tv;
            cfg.w_front_back = tx_cfg.w_front_back;
            cfg.w_other = tx_cfg.w_other;
            cfg.init = texture_init_from_string(tx_cfg.init);
            cfg.seed = Rng(seed.value).derive("texture").next_u64();
            cfg.atlas_size = tx_atlas_size;
            auto [atlas, rep] = bake(mesh, views, cfg);
            save_image(tx_out, atlas_to_image(atlas));
            std::cout << "wrote " << tx_out << "\n";
            if (!tx_report.empty()) {
                write_json(tx_report,
                           json{{"loss_trace", rep.loss_trace},
                                {"view_psnr", rep.view_psnr},
                                {"observed_texels", rep.observed_texels}});
            }
        });
    }

    if (cmd_render->parsed()) {
        return run_stage("render", exit_code::render, [&] {
            if (rd_out.empty() && rd_normals.empty() && rd_mask.empty()) {
                throw validation_error(
                    "nothing to do: pass --out, --normals and/or --mask");
            }
            if (!rd_out.empty() && rd_atlas.empty()) {
                throw validation_error("--out needs --atlas for color");
            }
            const TriMesh mesh = load_mesh(rd_mesh);
            const std::vector<Camera> rig = load_camera_rig(rd_views);
            if (rd_index < 0 || rd_index >= static_cast<int>(rig.size())) {
                throw validation_error(
                    "--index " + std::to_string(rd_index) +
                    " outside the rig of " + std::to_string(rig.size()) +
                    " cameras");
            }
            TextureAtlas atlas;
            if (!rd_atlas.empty()) {
                atlas = atlas_from_image(
                    load_image(rd_atlas, ImageKind::color), {});
            }
            RenderRequest req;
            req.normals = !rd_normals.empty();
            req.color = !rd_out.empty();
            req.atlas = req.color ? &atlas : nullptr;
            const FrameBundle fb = render(mesh, rig[rd_index], req);
            if (!rd_normals.empty()) save_image(rd_normals, *fb.normal);
            if (!rd_mask.empty()) save_image(rd_mask, fb.silhouette);
            if (!rd_out.empty()) save_image(rd_out, *fb.color);
            std::cout << "rendered view " << rd_index << "\n";
        });
    }

    if (cmd_pipe->parsed()) {
        PipelineConfig cfg;
        try {
            cfg = load_pipeline_config(pipe_config);
        } catch (const std::exception& e) {
            std::cerr << "error in config: " << e.what() << "\n";
            return exit_code::config;
        }
        if (threads > 0) cfg.threads = threads;
        if (app.count("--seed") > 0) cfg.seed = seed.value;
        const PipelineResult res = run_pipeline(cfg);
        if (res.code != exit_code::ok) {
            std::cerr << "error in " << res.failed_stage << ": " << res.error
                      << "\n";
        } else {
            std::cout << "pipeline complete; report at " << res.report_path
                      << "\n";
        }
        return res.code;
    }

    return exit_code::ok;
}
