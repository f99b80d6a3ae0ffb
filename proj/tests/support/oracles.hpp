#pragma once

// Independent reference computations used to cross-check the library:
// finite-difference gradient probes, closed-form signed distances, and
// plain-loop reimplementations of the scalar losses. Everything here is
// deliberately written with naive serial loops so it shares no code path
// with the implementations under test.

#include <carve/atlas.hpp>
#include <carve/image.hpp>
#include <carve/mesh.hpp>
#include <carve/rng.hpp>

#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

// Central-difference gradient check. `f` is evaluated at perturbed copies of
// `x`; `grad` is the analytic gradient being validated. Only the entries in
// `probes` are checked. Relative error uses max(|analytic|, |numeric|, floor)
// as the denominator so near-zero pairs do not produce spurious blowups.
struct FdReport {
  double max_rel_err = 0.0;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

FdReport check_gradient(const std::function<double(const std::vector<double>&)>& f,
                        const std::vector<double>& x,
                        const std::vector<double>& grad,
                        const std::vector<std::size_t>& probes,
                        double h,
                        double floor = 1e-7);

// Deterministically picks `count` distinct indices whose |grad| exceeds
// `min_abs` (falls back to the largest entries if fewer qualify).
std::vector<std::size_t> pick_support_indices(const std::vector<double>& grad,
                                              std::size_t count,
                                              carve::Rng& rng,
                                              double min_abs = 1e-9);

// Closed-form signed distances (negative inside).
double sphere_sdf(const carve::Vec3& p, const carve::Vec3& center, double radius);
double capsule_sdf(const carve::Vec3& p, const carve::Vec3& a, const carve::Vec3& b,
                   double radius);

// Unsigned distance from `p` to the surface of an axis-aligned ellipsoid
// centered at the origin with semi-axes `radii`, via bisection on the
// standard one-parameter closest-point equation.
double ellipsoid_surface_distance(const carve::Vec3& radii, const carve::Vec3& p);

// Plain-loop losses, independent of the library accumulation kernels.
double brute_normal_loss(const carve::ImagePlane& rendered,
                         const carve::ImagePlane& target,
                         const carve::ImagePlane& mask);
double brute_tv(const carve::TextureAtlas& atlas);
double brute_masked_mse(const carve::ImagePlane& got, const carve::ImagePlane& want,
                        const carve::ImagePlane& mask);

}  // namespace oracle
