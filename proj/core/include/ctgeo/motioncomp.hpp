#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ctgeo/diffgeo.hpp"
#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"
#include "ctgeo/projector.hpp"
#include "ctgeo/quality.hpp"

namespace ctgeo {

enum class ObjectiveKind { mse_to_reference, autofocus };

struct CompensationConfig {
    int iterations = 500;
    double lr_rot = 0.1;    ///< step per unit of rad-gradient
    double lr_trans = 100.0; ///< step per unit of mm-gradient
    ObjectiveKind objective = ObjectiveKind::mse_to_reference;
    AutofocusMetric metric = AutofocusMetric::total_variation;
    AutofocusOptions autofocus;
    int log_every = 0; ///< 0 disables progress callbacks

    void validate() const;
};

struct TraceRow {
    int iter = 0;
    double loss = 0.0;
    std::optional<double> ssim;
    std::optional<double> mse;
    std::optional<double> rpe;
};

struct CompensationTrace {
    std::vector<TraceRow> rows; ///< state before each update
    TraceRow final_state;       ///< state after the last update
    MotionParams params;        ///< recovered annihilating parameters
};

struct CompensationResult {
    Image image; ///< reconstruction with the final parameters
    MotionParams params;
    CompensationTrace trace;
};

/// Optional ground truth used only for trace metrics.
struct GroundTruth {
    std::optional<Image> image;       ///< enables ssim / mse columns
    std::optional<Geometry> geometry; ///< enables the rpe column
};

using ProgressCallback = std::function<void(const TraceRow&)>;

/**
 * Gradient descent on per-view rigid corrections theta = (alpha, tx, ty),
 * starting from zero. Each iteration builds P*_i = P_i M(theta_i), backprojects
 * with a tape, evaluates the objective, runs backward_geometry and
 * backward_motion and takes a plain step with separate rotation and
 * translation step sizes. The raw sinogram is filtered once up front; its
 * weighting depends only on intrinsics, which right-multiplication by M
 * leaves untouched.
 *
 * Throws InvalidParameter when the MSE objective is requested without a
 * reference image.
 */
CompensationResult compensate(const Sinogram& raw, const Geometry& perturbed,
                              const ImageGrid& grid, const CompensationConfig& cfg,
                              const std::optional<Image>& reference = std::nullopt,
                              const GroundTruth& truth = {},
                              const ProgressCallback& progress = {});

/// Objective value and motion gradient at given parameters (one iteration's
/// worth of work, exposed for gradient checks).
struct MotionEvaluation {
    double loss = 0.0;
    Image image;
    MotionGradient gradient;
};

MotionEvaluation evaluate_motion(const Sinogram& filtered, const Geometry& perturbed,
                                 const ImageGrid& grid, const MotionParams& params,
                                 const ImageObjective& objective);

struct Measurement {
    Sinogram sinogram; ///< projected with the true geometry
    Geometry geometry; ///< the geometry a reconstruction would assume
};

/**
 * Simulates an acquisition whose assumed geometry is corrupted by motion:
 * the sinogram comes from the unperturbed geometry, the returned geometry is
 * P_i M(motion_i). The annihilating correction is invert(motion).
 */
Measurement perturb_and_measure(const Image& img, const Geometry& geom,
                                const MotionParams& motion);

} // namespace ctgeo
