#include "carve/texture.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carve/error.hpp"
#include "carve/optim.hpp"
#include "carve/parallel.hpp"
#include "carve/raster.hpp"
#include "carve/rng.hpp"
#include "carve/sculpt.hpp"

namespace carve {

void validate(const TexConfig& cfg) {
    if (cfg.iters < 0) throw validation_error("texture config: iters < 0");
    if (!(cfg.lr > 0)) throw validation_error("texture config: lr must be > 0");
    if (!(cfg.lambda_tv >= 0)) {
        throw validation_error("texture config: lambda_tv must be >= 0");
    }
    if (!(cfg.w_front_back >= 0) || !(cfg.w_other >= 0)) {
        throw validation_error("texture config: view weights must be >= 0");
    }
    if (cfg.atlas_size <= 0) {
        throw validation_error("texture config: atlas size must be positive");
    }
}

double view_weight(const TexConfig& cfg, ViewTag tag) {
    return (tag == ViewTag::front || tag == ViewTag::back) ? cfg.w_front_back
                                                           : cfg.w_other;
}

namespace {

inline double sgn(double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); }

// Mean over texels x channels of |forward dx| + |forward dy|; replicate
// padding makes the last row/column differences zero. Works on the float
// atlas and on the double optimization buffer alike.
template <typename T>
double tv_mean(const T* x, int size) {
    const std::int64_t n = static_cast<std::int64_t>(size) * size;
    const double total = par::block_sum(n, [&](std::int64_t t) {
        const int r = static_cast<int>(t / size);
        const int c = static_cast<int>(t % size);
        const std::int64_t b = t * 3;
        double s = 0;
        if (c + 1 < size) {
            for (int ch = 0; ch < 3; ++ch) {
                s += std::abs(static_cast<double>(x[b + 3 + ch]) - x[b + ch]);
            }
        }
        if (r + 1 < size) {
            const std::int64_t d = b + static_cast<std::int64_t>(size) * 3;
            for (int ch = 0; ch < 3; ++ch) {
                s += std::abs(static_cast<double>(x[d + ch]) - x[b + ch]);
            }
        }
        return s;
    });
    return total / (static_cast<double>(n) * 3.0);
}

// Adds scale * d(tv_mean)/d(texel) to g. Sign subgradient, zero at kinks.
// Pure per-texel gather, so the parallel loop owns its writes.
template <typename T>
void tv_grad_add(const T* x, int size, double scale, std::vector<double>& g) {
    const std::int64_t n = static_cast<std::int64_t>(size) * size;
    const double k = scale / (static_cast<double>(n) * 3.0);
    const std::int64_t stride = static_cast<std::int64_t>(size) * 3;
    par::for_each(n, [&](std::int64_t t) {
        const int r = static_cast<int>(t / size);
        const int c = static_cast<int>(t % size);
        const std::int64_t b = t * 3;
        for (int ch = 0; ch < 3; ++ch) {
            double acc = 0;
            const double me = x[b + ch];
            if (c + 1 < size) acc -= sgn(static_cast<double>(x[b + 3 + ch]) - me);
            if (r + 1 < size) {
                acc -= sgn(static_cast<double>(x[b + stride + ch]) - me);
            }
            if (c > 0) acc += sgn(me - static_cast<double>(x[b - 3 + ch]));
            if (r > 0) acc += sgn(me - static_cast<double>(x[b - stride + ch]));
            g[b + ch] += k * acc;
        }
    });
}

void check_view(const Camera& cam, const ImagePlane& image,
                const ImagePlane& mask, const char* who) {
    if (image.kind != ImageKind::color) {
        throw validation_error(std::string(who) + ": view image must be color");
    }
    if (mask.kind != ImageKind::silhouette) {
        throw validation_error(std::string(who) +
                               ": view mask must be a silhouette");
    }
    if (image.width != cam.width || image.height != cam.height ||
        mask.width != cam.width || mask.height != cam.height) {
        throw validation_error(
            std::string(who) + ": view image/mask resolution does not match "
                               "the camera (" +
            std::to_string(cam.width) + "x" + std::to_string(cam.height) + ")");
    }
}

}  // namespace

double tv_loss(const TextureAtlas& atlas) {
    validate(atlas);
    return tv_mean(atlas.texels.data(), atlas.size);
}

std::vector<double> tv_loss_grad(const TextureAtlas& atlas) {
    validate(atlas);
    std::vector<double> g(atlas.texels.size(), 0.0);
    tv_grad_add(atlas.texels.data(), atlas.size, 1.0, g);
    return g;
}

double recon_loss(const TriMesh& mesh, const TextureAtlas& atlas,
                  const std::vector<ColorView>& views, const TexConfig& cfg) {
    validate(cfg);
    validate(atlas);
    if (!mesh.has_uvs()) {
        throw validation_error("recon_loss: mesh has no UVs");
    }
    double total = 0;
    for (const ColorView& view : views) {
        check_view(view.cam, view.image, view.mask, "recon_loss");
        RenderRequest req;
        req.normals = false;
        req.color = true;
        req.atlas = &atlas;
        const FrameBundle fb = render(mesh, view.cam, req);
        const ImagePlane m = mask_intersection(view.mask, fb.silhouette);
        const ImagePlane& rendered = *fb.color;
        const std::int64_t npix = m.pixel_count();
        const int w = m.width;
        const double count = par::block_sum(npix, [&](std::int64_t i) {
            return m.data[static_cast<std::size_t>(i)] > 0.5f ? 1.0 : 0.0;
        });
        if (count <= 0) continue;
        const double sq = par::block_sum(npix, [&](std::int64_t i) {
            if (m.data[static_cast<std::size_t>(i)] <= 0.5f) return 0.0;
            const int r = static_cast<int>(i / w);
            const int c = static_cast<int>(i % w);
            double s = 0;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = static_cast<double>(rendered.at(r, c, ch)) -
                                 view.image.at(r, c, ch);
                s += d * d;
            }
            return s;
        });
        total += view_weight(cfg, view.cam.view_tag) * (sq / (count * 3.0));
    }
    return total;
}

double masked_psnr(const ImagePlane& got, const ImagePlane& want,
                   const ImagePlane& mask) {
    if (got.width != want.width || got.height != want.height ||
        got.channels != want.channels || mask.width != got.width ||
        mask.height != got.height || mask.channels != 1) {
        throw validation_error("masked_psnr: shape mismatch");
    }
    const std::int64_t npix = got.pixel_count();
    const int w = got.width, nc = got.channels;
    const double count = par::block_sum(npix, [&](std::int64_t i) {
        return mask.data[static_cast<std::size_t>(i)] > 0.5f ? 1.0 : 0.0;
    });
    if (count <= 0) throw validation_error("masked_psnr: mask selects no pixels");
    const double sq = par::block_sum(npix, [&](std::int64_t i) {
        if (mask.data[static_cast<std::size_t>(i)] <= 0.5f) return 0.0;
        const int r = static_cast<int>(i / w);
        const int c = static_cast<int>(i % w);
        double s = 0;
        for (int ch = 0; ch < nc; ++ch) {
            const double d =
                static_cast<double>(got.at(r, c, ch)) - want.at(r, c, ch);
            s += d * d;
        }
        return s;
    });
    const double mse = sq / (count * nc);
    if (!(mse > 0)) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

// The bake objective precomputed for a fixed mesh + camera set. One "slot"
// is a supervised pixel: a masked, covered pixel of one view. Forward is a
// parallel gather over slots; backward is a parallel gather over texels via
// the transposed (CSR) tap table. Both are bit-deterministic for any thread
// count because slot order and CSR entry order are fixed at build time.
struct BakeProblem {
    int size = 0;
    std::int64_t nslots = 0;
    std::vector<double> target;           // 3 per slot
    std::vector<int> tap;                 // 4 per slot, texel index
    std::vector<double> tapw;             // 4 per slot
    std::vector<double> coef;             // per slot: w_view / (3 * M_view)
    std::vector<std::int64_t> view_begin; // nviews + 1
    std::vector<std::int64_t> row;        // texel CSR offsets, size^2 + 1
    std::vector<std::int64_t> entry_slot;
    std::vector<double> entry_w;
    std::vector<std::uint8_t> observed;   // per texel: any positive tap weight
};

BakeProblem build_bake_problem(const TriMesh& mesh,
                               const std::vector<ColorView>& views,
                               const TexConfig& cfg) {
    validate(cfg);
    validate(mesh);
    if (!mesh.has_uvs()) throw validation_error("bake: mesh has no UVs");
    if (views.empty()) throw validation_error("bake: need at least one view");

    BakeProblem P;
    P.size = cfg.atlas_size;
    const std::int64_t ntex = static_cast<std::int64_t>(P.size) * P.size;

    for (const ColorView& view : views) {
        check_view(view.cam, view.image, view.mask, "bake");
        RenderRequest req;
        req.normals = false;
        const FrameBundle fb = render(mesh, view.cam, req);
        P.view_begin.push_back(P.nslots);
        const std::int64_t begin = P.nslots;
        for (int r = 0; r < fb.height; ++r) {
            for (int c = 0; c < fb.width; ++c) {
                if (view.mask.at(r, c, 0) <= 0.5f) continue;
                const PixelCoverage& cov =
                    fb.coverage[static_cast<std::size_t>(r) * fb.width + c];
                if (cov.face < 0) continue;
                const auto& f = mesh.faces[cov.face];
                Vec2 uv = Vec2::Zero();
                for (int k = 0; k < 3; ++k) uv += cov.bary[k] * mesh.uvs[f[k]];
                const BilinearTaps taps = bilinear_taps(P.size, uv.x(), uv.y());
                for (int k = 0; k < 4; ++k) {
                    P.tap.push_back(taps.texel[k]);
                    P.tapw.push_back(taps.weight[k]);
                }
                for (int ch = 0; ch < 3; ++ch) {
                    P.target.push_back(view.image.at(r, c, ch));
                }
                ++P.nslots;
            }
        }
        const double m = static_cast<double>(P.nslots - begin);
        const double w = view_weight(cfg, view.cam.view_tag);
        P.coef.resize(static_cast<std::size_t>(P.nslots),
                      m > 0 ? w / (3.0 * m) : 0.0);
    }
    P.view_begin.push_back(P.nslots);

    // Transpose: texel -> (slot, weight), entries in slot order per texel.
    P.row.assign(static_cast<std::size_t>(ntex) + 1, 0);
    for (int t : P.tap) ++P.row[static_cast<std::size_t>(t) + 1];
    for (std::int64_t i = 0; i < ntex; ++i) {
        P.row[static_cast<std::size_t>(i) + 1] += P.row[static_cast<std::size_t>(i)];
    }
    P.entry_slot.resize(P.tap.size());
    P.entry_w.resize(P.tap.size());
    std::vector<std::int64_t> cursor(P.row.begin(), P.row.end() - 1);
    for (std::int64_t e = 0; e < static_cast<std::int64_t>(P.tap.size()); ++e) {
        const int t = P.tap[static_cast<std::size_t>(e)];
        const std::int64_t at = cursor[static_cast<std::size_t>(t)]++;
        P.entry_slot[static_cast<std::size_t>(at)] = e / 4;
        P.entry_w[static_cast<std::size_t>(at)] =
            P.tapw[static_cast<std::size_t>(e)];
    }
    P.observed.assign(static_cast<std::size_t>(ntex), 0);
    par::for_each(ntex, [&](std::int64_t t) {
        for (std::int64_t e = P.row[static_cast<std::size_t>(t)];
             e < P.row[static_cast<std::size_t>(t) + 1]; ++e) {
            if (P.entry_w[static_cast<std::size_t>(e)] > 0) {
                P.observed[static_cast<std::size_t>(t)] = 1;
                return;
            }
        }
    });
    return P;
}

// One forward (+ optional backward) pass of recon + lambda_tv * tv at the
// given texels. `resid` is caller-owned scratch of nslots*3 doubles and
// holds the per-slot residuals afterwards (used for the PSNR report).
double eval_objective(const BakeProblem& P, const TexConfig& cfg,
                      const std::vector<double>& tex, std::vector<double>* grad,
                      std::vector<double>& resid) {
    par::for_each(P.nslots, [&](std::int64_t i) {
        const std::size_t ti = static_cast<std::size_t>(i) * 4;
        for (int ch = 0; ch < 3; ++ch) {
            double v = 0;
            for (int k = 0; k < 4; ++k) {
                v += P.tapw[ti + k] *
                     tex[static_cast<std::size_t>(P.tap[ti + k]) * 3 + ch];
            }
            resid[static_cast<std::size_t>(i) * 3 + ch] =
                v - P.target[static_cast<std::size_t>(i) * 3 + ch];
        }
    });
    const double recon = par::block_sum(P.nslots, [&](std::int64_t i) {
        const std::size_t b = static_cast<std::size_t>(i) * 3;
        return P.coef[static_cast<std::size_t>(i)] *
               (resid[b] * resid[b] + resid[b + 1] * resid[b + 1] +
                resid[b + 2] * resid[b + 2]);
    });
    const double tv = tv_mean(tex.data(), P.size);
    if (grad) {
        grad->assign(tex.size(), 0.0);
        const std::int64_t ntex = static_cast<std::int64_t>(P.size) * P.size;
        par::for_each(ntex, [&](std::int64_t t) {
            double g0 = 0, g1 = 0, g2 = 0;
            for (std::int64_t e = P.row[static_cast<std::size_t>(t)];
                 e < P.row[static_cast<std::size_t>(t) + 1]; ++e) {
                const std::int64_t s = P.entry_slot[static_cast<std::size_t>(e)];
                const double k = 2.0 * P.coef[static_cast<std::size_t>(s)] *
                                 P.entry_w[static_cast<std::size_t>(e)];
                const std::size_t b = static_cast<std::size_t>(s) * 3;
                g0 += k * resid[b];
                g1 += k * resid[b + 1];
                g2 += k * resid[b + 2];
            }
            const std::size_t b = static_cast<std::size_t>(t) * 3;
            (*grad)[b] = g0;
            (*grad)[b + 1] = g1;
            (*grad)[b + 2] = g2;
        });
        tv_grad_add(tex.data(), P.size, cfg.lambda_tv, *grad);
    }
    return recon + cfg.lambda_tv * tv;
}

// Chart rectangles used by the diffusion fill: the UV bounding box of each
// part label (whole mesh when unlabeled).
std::vector<Box2> label_uv_boxes(const TriMesh& mesh) {
    const int nparts =
        mesh.has_labels()
            ? 1 + *std::max_element(mesh.part_labels.begin(),
                                    mesh.part_labels.end())
            : 1;
    std::vector<Box2> boxes(static_cast<std::size_t>(nparts));
    std::vector<bool> seen(static_cast<std::size_t>(nparts), false);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const int p = mesh.has_labels() ? mesh.part_labels[v] : 0;
        Box2& b = boxes[static_cast<std::size_t>(p)];
        if (!seen[static_cast<std::size_t>(p)]) {
            b.lo = b.hi = mesh.uvs[v];
            seen[static_cast<std::size_t>(p)] = true;
        } else {
            b.lo = b.lo.cwiseMin(mesh.uvs[v]);
            b.hi = b.hi.cwiseMax(mesh.uvs[v]);
        }
    }
    std::vector<Box2> out;
    for (std::size_t p = 0; p < boxes.size(); ++p) {
        if (seen[p]) out.push_back(boxes[p]);
    }
    return out;
}

// Jacobi diffusion of unobserved texels from observed ones, each chart
// processed independently inside its (one-texel dilated) rectangle.
void diffuse_unobserved(std::vector<double>& tex, const BakeProblem& P,
                        const std::vector<Box2>& charts) {
    struct Rect {
        int r0, r1, c0, c1;
        bool inside(int r, int c) const {
            return r >= r0 && r <= r1 && c >= c0 && c <= c1;
        }
    };
    const int size = P.size;
    auto lo_texel = [size](double uv) {
        return std::max(0, static_cast<int>(std::ceil(uv * size - 0.5)) - 1);
    };
    auto hi_texel = [size](double uv) {
        return std::min(size - 1,
                        static_cast<int>(std::floor(uv * size - 0.5)) + 1);
    };

    std::vector<int> texel_rect(static_cast<std::size_t>(size) * size, -1);
    std::vector<Rect> rects;
    std::vector<std::int64_t> fill;  // unobserved texels, all charts
    for (const Box2& b : charts) {
        const Rect rect{lo_texel(b.lo.y()), hi_texel(b.hi.y()),
                        lo_texel(b.lo.x()), hi_texel(b.hi.x())};
        if (rect.r0 > rect.r1 || rect.c0 > rect.c1) continue;
        const int id = static_cast<int>(rects.size());
        rects.push_back(rect);
        bool any_observed = false;
        for (int r = rect.r0; r <= rect.r1; ++r) {
            for (int c = rect.c0; c <= rect.c1; ++c) {
                const std::int64_t t = static_cast<std::int64_t>(r) * size + c;
                texel_rect[static_cast<std::size_t>(t)] = id;
                any_observed |= P.observed[static_cast<std::size_t>(t)] != 0;
            }
        }
        if (!any_observed) continue;  // nothing to diffuse from
        for (int r = rect.r0; r <= rect.r1; ++r) {
            for (int c = rect.c0; c <= rect.c1; ++c) {
                const std::int64_t t = static_cast<std::int64_t>(r) * size + c;
                if (!P.observed[static_cast<std::size_t>(t)]) fill.push_back(t);
            }
        }
    }
    if (fill.empty()) return;

    const std::int64_t nfill = static_cast<std::int64_t>(fill.size());
    std::vector<double> cur(static_cast<std::size_t>(nfill) * 3);
    std::vector<double> nxt(cur.size());
    std::vector<std::int64_t> slot(static_cast<std::size_t>(size) * size, -1);
    for (std::int64_t i = 0; i < nfill; ++i) {
        slot[static_cast<std::size_t>(fill[static_cast<std::size_t>(i)])] = i;
        for (int ch = 0; ch < 3; ++ch) {
            cur[static_cast<std::size_t>(i) * 3 + ch] =
                tex[static_cast<std::size_t>(fill[static_cast<std::size_t>(i)]) *
                        3 +
                    ch];
        }
    }
    auto value = [&](std::int64_t t, int ch, const std::vector<double>& u) {
        const std::int64_t s = slot[static_cast<std::size_t>(t)];
        return s >= 0 ? u[static_cast<std::size_t>(s) * 3 + ch]
                      : tex[static_cast<std::size_t>(t) * 3 + ch];
    };
    constexpr int kSweeps = 64;
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
        par::for_each(nfill, [&](std::int64_t i) {
            const std::int64_t t = fill[static_cast<std::size_t>(i)];
            const int r = static_cast<int>(t / size);
            const int c = static_cast<int>(t % size);
            const Rect& rect =
                rects[static_cast<std::size_t>(texel_rect[static_cast<std::size_t>(t)])];
            const int dr[4] = {-1, 1, 0, 0};
            const int dc[4] = {0, 0, -1, 1};
            double acc[3] = {0, 0, 0};
            int cnt = 0;
            for (int k = 0; k < 4; ++k) {
                const int rr = r + dr[k], cc = c + dc[k];
                if (!rect.inside(rr, cc)) continue;
                const std::int64_t tt = static_cast<std::int64_t>(rr) * size + cc;
                for (int ch = 0; ch < 3; ++ch) acc[ch] += value(tt, ch, cur);
                ++cnt;
            }
            for (int ch = 0; ch < 3; ++ch) {
                nxt[static_cast<std::size_t>(i) * 3 + ch] =
                    cnt > 0 ? acc[ch] / cnt
                            : cur[static_cast<std::size_t>(i) * 3 + ch];
            }
        });
        cur.swap(nxt);
    }
    for (std::int64_t i = 0; i < nfill; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            tex[static_cast<std::size_t>(fill[static_cast<std::size_t>(i)]) * 3 +
                ch] = cur[static_cast<std::size_t>(i) * 3 + ch];
        }
    }
}

}  // namespace

double bake_objective(const TriMesh& mesh, const std::vector<ColorView>& views,
                      const TexConfig& cfg, const std::vector<double>& texels,
                      std::vector<double>* grad) {
    const BakeProblem P = build_bake_problem(mesh, views, cfg);
    const std::size_t want =
        static_cast<std::size_t>(P.size) * P.size * 3;
    if (texels.size() != want) {
        throw validation_error("bake_objective: texel buffer has " +
                               std::to_string(texels.size()) +
                               " values, expected " + std::to_string(want));
    }
    std::vector<double> resid(static_cast<std::size_t>(P.nslots) * 3);
    return eval_objective(P, cfg, texels, grad, resid);
}

std::pair<TextureAtlas, BakeReport> bake(const TriMesh& mesh,
                                         const std::vector<ColorView>& views,
                                         const TexConfig& cfg) {
    const BakeProblem P = build_bake_problem(mesh, views, cfg);
    const std::int64_t ntex = static_cast<std::int64_t>(P.size) * P.size;

    std::vector<double> tex(static_cast<std::size_t>(ntex) * 3);
    switch (cfg.init) {
        case TexConfig::Init::mid_gray:
            std::fill(tex.begin(), tex.end(), 0.5);
            break;
        case TexConfig::Init::zero:
            std::fill(tex.begin(), tex.end(), 0.0);
            break;
        case TexConfig::Init::seeded_uniform: {
            Rng rng = Rng(cfg.seed).derive("texture-init");
            for (double& t : tex) t = rng.uniform();
            break;
        }
    }

    AdamConfig opt;
    opt.lr = cfg.lr;
    Adam adam(tex.size(), opt);
    BakeReport rep;
    rep.loss_trace.reserve(static_cast<std::size_t>(cfg.iters) + 1);
    std::vector<double> grad;
    std::vector<double> resid(static_cast<std::size_t>(P.nslots) * 3);
    for (int it = 0;; ++it) {
        const bool last = it == cfg.iters;
        rep.loss_trace.push_back(
            eval_objective(P, cfg, tex, last ? nullptr : &grad, resid));
        if (last) break;
        adam.step(tex, grad);
        par::for_each(static_cast<std::int64_t>(tex.size()), [&](std::int64_t i) {
            tex[static_cast<std::size_t>(i)] =
                std::clamp(tex[static_cast<std::size_t>(i)], 0.0, 1.0);
        });
    }

    // Final residuals are still in `resid`; report per-view PSNR from them.
    const int nviews = static_cast<int>(views.size());
    for (int v = 0; v < nviews; ++v) {
        const std::int64_t begin = P.view_begin[static_cast<std::size_t>(v)];
        const std::int64_t m =
            P.view_begin[static_cast<std::size_t>(v) + 1] - begin;
        if (m <= 0) {
            rep.view_psnr.push_back(0.0);
            continue;
        }
        const double sq = par::block_sum(m, [&](std::int64_t i) {
            const std::size_t b = static_cast<std::size_t>(begin + i) * 3;
            return resid[b] * resid[b] + resid[b + 1] * resid[b + 1] +
                   resid[b + 2] * resid[b + 2];
        });
        const double mse = sq / (static_cast<double>(m) * 3.0);
        rep.view_psnr.push_back(
            mse > 0 ? std::min(99.0, 10.0 * std::log10(1.0 / mse)) : 99.0);
    }
    rep.observed_texels = par::block_sum(ntex, [&](std::int64_t t) {
        return P.observed[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
    });

    const std::vector<Box2> charts = label_uv_boxes(mesh);
    diffuse_unobserved(tex, P, charts);

    TextureAtlas atlas(P.size, 0.0f);
    for (std::size_t i = 0; i < tex.size(); ++i) {
        atlas.texels[i] = static_cast<float>(tex[i]);
    }
    atlas.chart_boxes = charts;
    return {std::move(atlas), std::move(rep)};
}

}  // namespace carve
