#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"
#include "ctgeo/projector.hpp"
#include "ctgeo/quality.hpp"

namespace ctgeo {

/**
 * Homogeneous detector coordinates recorded by the backprojector, one
 * (u, v) pair per (view, pixel), stored view-major: u[view * npix + pixel].
 * The backward pass reads w = u / v and the dehomogenization Jacobian
 * (1/v, -u/v^2) from here instead of reprojecting.
 */
struct SampledPositions {
    int n_views = 0;
    ImageGrid grid;
    std::vector<double> u;
    std::vector<double> v;

    std::size_t pixels() const { return grid.size(); }
    std::size_t entries() const { return u.size() + v.size(); }
};

/// dL/dP, one 2x3 block per view.
struct GeometryGradient {
    std::vector<Mat2x3> blocks;
};

struct MotionGradient {
    std::vector<double> d_alpha; ///< per rad
    std::vector<double> d_tx;    ///< per mm
    std::vector<double> d_ty;    ///< per mm

    /// max |component| over all views and groups.
    double max_abs() const;
};

struct TapedReconstruction {
    Image image;
    SampledPositions positions;
    BackprojectStats stats;
};

/// backproject() that also records the sampling positions. The image is
/// bitwise identical to backproject().
TapedReconstruction backproject_with_tape(const Sinogram& filtered, const Geometry& geom,
                                          const ImageGrid& grid);

/// In-place variant reusing the storage in out (the tape is large:
/// 2 * N * nx * ny doubles).
void backproject_with_tape(const Sinogram& filtered, const Geometry& geom,
                           const ImageGrid& grid, TapedReconstruction& out);

/**
 * Per-row derivative along the detector in units of 1 / detector index:
 * second-order central differences inside, second-order one-sided stencils
 * (-3 D0 + 4 D1 - D2) / 2 and its mirror at the ends. Needs n_det >= 3.
 */
Sinogram detector_derivative(const Sinogram& filtered);

struct BackwardStats {
    std::uint64_t degenerate_rays = 0;
};

/**
 * Propagates dL/dI into dL/dP. For every view j and pixel (x, y) whose ray
 * lands inside the detector:
 *
 *   dL/dP_j += s * dL/dI(x, y) * d*_j(w) * (1/v, -u/v^2) * [[x y 1 0 0 0], [0 0 0 x y 1]]
 *
 * where d*_j is dstar interpolated linearly at w = u / v and s is the
 * backprojection scale. Degenerate rays contribute zero and are counted.
 * Views are reduced independently, pixels in ascending order, so the result
 * does not depend on the thread count.
 */
GeometryGradient backward_geometry(const Image& grad_image, const SampledPositions& positions,
                                   const Sinogram& dstar, const Geometry& geom,
                                   const ImageGrid& grid, BackwardStats* stats = nullptr);

/**
 * Chain rule through P*_i = P_i M(alpha_i, tx_i, ty_i): each component is the
 * Frobenius product of grad_p[i] with P_i dM/dtheta.
 */
MotionGradient backward_motion(const GeometryGradient& grad_p, const Geometry& base_geom,
                               const MotionParams& params);

/// Default forward-difference steps for entries (0,0) (0,1) (0,2) (1,0) (1,1)
/// (1,2). Absolute values, tuned for SID ~ 1e3 mm and SDD / spacing ~ 1e3.
inline constexpr std::array<double, 6> kDefaultGradcheckSteps{1e-4, 1e-4, 1e-2,
                                                              1e-7, 1e-7, 1e-5};

struct GradcheckEntry {
    int view = 0;
    int row = 0;
    int col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double h = 0.0;
    double rel_err = 0.0;
};

struct GradcheckReport {
    double loss = 0.0;
    std::vector<GradcheckEntry> entries; ///< view-major, then entry row, col
    std::array<double, 6> max_rel_err{};
    std::array<double, 6> mean_rel_err{};

    double worst() const;
};

/// |a - n| / max(|a|, |n|), or |a - n| when both magnitudes are below 1e-12.
double gradcheck_relative_error(double analytic, double numeric);

/**
 * Compares the analytic dL/dP with forward differences (L(P + h e) - L(P)) / h
 * for every view and every entry. Only view j's summand of the
 * backprojection depends on P_j, so each perturbed image is formed by
 * replacing that summand; no gradient code is used on the numeric side.
 */
GradcheckReport gradcheck(const ImageObjective& loss, const Geometry& geom,
                          const Sinogram& filtered, const ImageGrid& grid,
                          const std::array<double, 6>& h = kDefaultGradcheckSteps);

} // namespace ctgeo
