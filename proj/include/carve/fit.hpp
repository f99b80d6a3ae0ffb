#pragma once

#include <vector>

#include "carve/optim.hpp"
#include "carve/sampling.hpp"
#include "carve/tet_grid.hpp"

namespace carve {

// Value of the grid SDF at an arbitrary point inside the bounds, by
// barycentric interpolation within the containing tetrahedron of the
// undeformed lattice (offsets must be zero; the supervision stage fits the
// scalar field only). Piecewise linear and continuous. Throws
// validation_error when p lies outside the grid box.
double interpolate_sdf(const TetGrid& grid, const Vec3& p);

// The four lattice corners and barycentric weights that interpolate p.
struct InterpStencil {
    int corner[4];
    double weight[4];
};
InterpStencil interpolation_stencil(const TetGrid& grid, const Vec3& p);

struct FitReport {
    std::vector<double> loss_trace;  // loss_trace[0] = loss before any step
    double final_rmse = 0.0;         // over the supervision samples
    int iterations = 0;
};

// Fits grid.sdf so the interpolated field matches the sample annotations,
// minimizing the sum of squared residuals with Adam (grid offsets stay
// frozen at zero and must be zero on entry). Gradients are accumulated
// through a precomputed vertex->samples gather, so results are identical
// for any thread count. Samples outside the grid box are an error.
FitReport fit_sdf(TetGrid& grid, const std::vector<SamplePoint>& samples, int iters,
                  double lr);

// Root-mean-square error of the interpolated field against held-out samples.
double sdf_rmse(const TetGrid& grid, const std::vector<SamplePoint>& samples);

// Gradient of the summed squared residuals with respect to grid.sdf —
// the exact quantity fit_sdf steps on each iteration, exposed so gradient
// audits can probe the fitting objective end to end.
std::vector<double> fit_sdf_gradient(const TetGrid& grid,
                                     const std::vector<SamplePoint>& samples);

}  // namespace carve
