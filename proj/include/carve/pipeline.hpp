#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "carve/fit.hpp"
#include "carve/sculpt.hpp"
#include "carve/tet_grid.hpp"
#include "carve/texture.hpp"
#include "carve/toml.hpp"
#include "carve/unwrap.hpp"

namespace carve {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

// Process exit codes: 0 on success, a distinct nonzero code per failing
// stage so scripts can tell where a run died.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int instantiate = 3;
inline constexpr int fit = 4;
inline constexpr int sculpt = 5;
inline constexpr int unwrap = 6;
inline constexpr int texture = 7;
inline constexpr int render = 8;
}  // namespace exit_code

struct RigStageConfig {
    int k = 7;
    double radius = 2.7;
    int image_size = 512;
    double fov_y = 40.0;
    bool mirror = false;  // append the mirrored azimuths to cover 360 deg
};

struct FitStageConfig {
    int resolution = 64;
    int samples = 20000;
    double sigma = 0.05;
    int iters = 400;
    double lr = 0.01;
    double box_margin = 0.15;  // grid cube padding, fraction of max extent
};

struct SculptStageConfig {
    int iters = 100;
    double lr = 0.01;
    int views_per_iter = 1;
    double laplacian = 0.0;
};

struct UnwrapStageConfig {
    int gamma = 5;
    int atlas_size = 1024;
};

struct TextureStageConfig {
    int iters = 500;
    double lr = 0.001;
    double lambda_tv = 1.0;
    double w_front_back = 1.0;
    double w_other = 0.2;
    std::string init = "mid-gray";  // mid-gray | zero | random
};

// Input files. `normals`, `masks` and `images` are shell-style globs whose
// sorted matches pair up with the rig's cameras in order. `rig` overrides
// the synthesized camera ring; `labels` overrides the heuristic body
// labeler; `skeleton` enables the pose-sheet artifact.
struct PipelineInputs {
    std::string coarse_mesh;
    std::string rig;
    std::string normals;
    std::string masks;
    std::string images;
    std::string labels;
    std::string skeleton;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = library default
    std::string out_dir = "out";
    PipelineInputs inputs;
    RigStageConfig rig;
    FitStageConfig fit;
    SculptStageConfig sculpt;
    UnwrapStageConfig unwrap;
    TextureStageConfig texture;
};

// Strict mapping from a parsed config table: unknown keys are io_errors, so
// typos fail fast instead of silently using defaults.
PipelineConfig pipeline_config_from_toml(const toml::Table& table);

// Parse a config file and resolve every relative input path and the output
// directory against the file's directory.
PipelineConfig load_pipeline_config(const std::string& path);

// The effective configuration (defaults filled in) as pretty JSON — the
// same object run_pipeline echoes into report.json.
std::string pipeline_config_to_json(const PipelineConfig& cfg);

// --- stage drivers shared by run_pipeline and the CLI subcommands --------

// The camera ring: loaded from cfg.inputs.rig when set, synthesized from
// cfg.rig otherwise.
std::vector<Camera> stage_rig(const PipelineConfig& cfg);

struct FitStageResult {
    TetGrid grid;
    FitReport report;
};
// Grid cube around the mesh (padded per cfg), SDF initialized from the mesh
// and refined against sampled signed distances.
FitStageResult stage_fit(const TriMesh& coarse, const FitStageConfig& cfg,
                         std::uint64_t seed);

// The cube stage_fit builds its grid over.
Box3 fitting_box(const TriMesh& mesh, double margin);

// Pair each camera with its normal map and mask (counts must match; images
// are validated against the camera resolutions).
std::vector<ViewTarget> load_view_targets(const std::vector<Camera>& rig,
                                          const std::vector<std::string>& normal_paths,
                                          const std::vector<std::string>& mask_paths);
std::vector<ColorView> load_color_views(const std::vector<Camera>& rig,
                                        const std::vector<std::string>& image_paths,
                                        const std::vector<std::string>& mask_paths);

TexConfig::Init texture_init_from_string(const std::string& name);

struct PipelineResult {
    int code = exit_code::ok;
    std::string failed_stage;  // empty on success
    std::string error;         // cause on failure
    std::string report_path;   // report.json location (written even on failure)
};

// instantiate -> fit -> sculpt -> unwrap -> bake, with every intermediate
// written to cfg.out_dir: rig.json, (pose.png,) grid.bin, refined.obj,
// unwrapped.obj (+ .labels.json), layout.json, tex.png and report.json.
// The report carries the config echo, content hashes of all inputs and
// outputs, per-stage loss traces and timings; two runs on identical inputs
// produce identical hash sets. A stage failure stops the run, flags the
// report as partial with the stage name and cause, and maps to that stage's
// exit code.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace carve
