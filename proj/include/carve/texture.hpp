#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "carve/atlas.hpp"
#include "carve/camera.hpp"
#include "carve/image.hpp"
#include "carve/mesh.hpp"

namespace carve {

// One supervision view for texture recovery: the camera, the color image it
// should reproduce, and the binary foreground mask.
struct ColorView {
    Camera cam;
    ImagePlane image{0, 0, ImageKind::color};
    ImagePlane mask{0, 0, ImageKind::silhouette};
};

// Texture optimization settings. The reconstruction term weighs front/back
// views above the rest; the smoothness term is scaled by lambda_tv.
struct TexConfig {
    int iters = 500;
    double lr = 0.001;
    double lambda_tv = 1.0;
    double w_front_back = 1.0;
    double w_other = 0.2;
    enum class Init { mid_gray, zero, seeded_uniform };
    Init init = Init::mid_gray;
    std::uint64_t seed = 0;  // used by Init::seeded_uniform
    int atlas_size = 1024;
};

// Throws validation_error: iters >= 0, lr > 0, lambda_tv >= 0, weights >= 0,
// atlas_size > 0.
void validate(const TexConfig& cfg);

double view_weight(const TexConfig& cfg, ViewTag tag);

// Anisotropic total variation: mean over texels x channels of
// |forward difference in x| + |forward difference in y|; differences at the
// last row/column are zero (replicate padding). The gradient uses the sign
// subgradient (zero at zero differences) and has the same layout as
// `atlas.texels`.
double tv_loss(const TextureAtlas& atlas);
std::vector<double> tv_loss_grad(const TextureAtlas& atlas);

// Multi-view reconstruction loss: for each view, render the textured mesh,
// mask both sides by (target mask AND rendered silhouette), take the mean
// squared error over masked pixels x channels, scale by the camera tag's
// view weight, and sum over views. A view with no masked overlap
// contributes zero.
double recon_loss(const TriMesh& mesh, const TextureAtlas& atlas,
                  const std::vector<ColorView>& views,
                  const TexConfig& cfg = {});

// 10*log10(1/mse) over mask==1 pixels x channels, peak signal 1.0, capped
// at 99 dB for an exact match. Throws validation_error when the mask
// selects no pixels or the shapes disagree.
double masked_psnr(const ImagePlane& got, const ImagePlane& want,
                   const ImagePlane& mask);

// One evaluation of the bake objective recon + lambda_tv * tv at the given
// texel values (layout: size*size*3 doubles, row-major rgb), writing the
// analytic gradient into *grad when non-null. This is exactly the function
// `bake` descends, exposed for finite-difference checks.
double bake_objective(const TriMesh& mesh, const std::vector<ColorView>& views,
                      const TexConfig& cfg, const std::vector<double>& texels,
                      std::vector<double>* grad);

struct BakeReport {
    // loss_trace[k] is the objective after k optimizer steps
    // (so trace has iters+1 entries and trace[0] is the initial loss).
    std::vector<double> loss_trace;
    // Per input view: PSNR of the final rendering against the target over
    // the masked pixels (99 dB cap; 0 for a view with no masked overlap).
    std::vector<double> view_psnr;
    std::int64_t observed_texels = 0;
};

// Recovers a texture atlas for a UV-mapped mesh from the given views: Adam
// on the texels of objective recon + lambda_tv * tv, clamping to [0,1]
// after every step. Texels that never receive reconstruction gradient are
// filled afterwards by up to 64 diffusion sweeps from observed texels
// within the same chart (charts are the per-part-label UV bounding boxes,
// or one chart for an unlabeled mesh). The returned atlas carries those
// chart boxes. Throws validation_error when the mesh has no UVs or no view
// is given.
std::pair<TextureAtlas, BakeReport> bake(const TriMesh& mesh,
                                         const std::vector<ColorView>& views,
                                         const TexConfig& cfg);

}  // namespace carve
