#pragma once

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"

namespace ctgeo {

/// A scalar objective value and its gradient with respect to every pixel.
struct LossValueGrad {
    double value = 0.0;
    Image grad;
};

/// Any differentiable scalar functional of a reconstruction. Learned quality
/// metrics plug in here as well as the closed-form ones below.
using ImageObjective = std::function<LossValueGrad(const Image&)>;

/// mean((img - ref)^2), gradient 2 (img - ref) / (nx ny).
LossValueGrad mse_loss(const Image& img, const Image& ref);

/// mean(img), gradient 1 / (nx ny).
LossValueGrad mean_intensity_loss(const Image& img);

enum class AutofocusMetric { entropy, total_variation, gradient_variance };

/// Accepts "entropy", "tv"/"total_variation", "gradvar"/"gradient_variance";
/// throws InvalidParameter otherwise.
AutofocusMetric parse_autofocus_metric(std::string_view name);

struct AutofocusOptions {
    int bins = 64;
    double bandwidth_bins = 1.0; ///< Gaussian kernel sigma in bin widths
    /// Histogram support; NaN means [min, max] of the image being scored.
    /// Fix it when the objective is optimized, otherwise the bins move with
    /// the image and the closed-form gradient no longer applies.
    double hist_lo = std::numeric_limits<double>::quiet_NaN();
    double hist_hi = std::numeric_limits<double>::quiet_NaN();
    double tv_epsilon = 1e-6; ///< added to the squared forward-difference magnitude
};

/**
 * Autofocus objectives (lower is sharper):
 *  - entropy: Shannon entropy of a Gaussian soft histogram,
 *  - total_variation: mean of sqrt(|grad I|^2 + eps) - sqrt(eps),
 *  - gradient_variance: minus the variance of sqrt(|grad I|^2 + eps).
 * Forward differences are zero on the last row and column.
 */
LossValueGrad autofocus_loss(const Image& img, AutofocusMetric metric,
                             const AutofocusOptions& opts = {});

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over all fully contained windows, with dynamic range
/// max(ref) - min(ref). Throws InvalidParameter for flat references or
/// images smaller than the window.
double ssim(const Image& img, const Image& ref, const SsimOptions& opts = {});

/// Mean squared difference (evaluation metric, no gradient).
double mse(const Image& img, const Image& ref);

using ProbePoint = std::array<double, 2>;

/// 5x5 points evenly spanning the central 50% of the grid's field of view.
std::vector<ProbePoint> default_probe_points(const ImageGrid& grid);

/**
 * Reprojection error in mm: mean over views and probes of
 * |w_est - w_gt| * det_spacing.
 */
double rpe(const Geometry& est, const Geometry& gt, std::span<const ProbePoint> probes);

} // namespace ctgeo
