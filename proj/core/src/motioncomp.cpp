#include "ctgeo/motioncomp.hpp"

#include <algorithm>
#include <cmath>

#include "ctgeo/diffgeo.hpp"
#include "ctgeo/errors.hpp"

namespace ctgeo {

void CompensationConfig::validate() const {
    if (iterations < 1) {
        throw InvalidParameter("iterations must be >= 1");
    }
    if (!(lr_rot >= 0.0) || !(lr_trans >= 0.0)) {
        throw InvalidParameter("step sizes must be non-negative");
    }
    if (log_every < 0) {
        throw InvalidParameter("log_every must be >= 0");
    }
}

MotionEvaluation evaluate_motion(const Sinogram& filtered, const Geometry& perturbed,
                                 const ImageGrid& grid, const MotionParams& params,
                                 const ImageObjective& objective) {
    const Geometry current = apply_motion(perturbed, params);
    TapedReconstruction rec = backproject_with_tape(filtered, current, grid);
    LossValueGrad lg = objective(rec.image);
    const Sinogram dstar = detector_derivative(filtered);
    const GeometryGradient gp = backward_geometry(lg.grad, rec.positions, dstar, current, grid);
    return {lg.value, std::move(rec.image), backward_motion(gp, perturbed, params)};
}

namespace {

ImageObjective make_objective(const CompensationConfig& cfg, const std::optional<Image>& reference,
                              const Image& initial) {
    if (cfg.objective == ObjectiveKind::mse_to_reference) {
        if (!reference) {
            throw InvalidParameter("the mse_to_reference objective needs a reference image");
        }
        initial.require_same_grid(*reference);
        return [ref = *reference](const Image& img) { return mse_loss(img, ref); };
    }
    AutofocusOptions opts = cfg.autofocus;
    if (cfg.metric == AutofocusMetric::entropy && (std::isnan(opts.hist_lo) || std::isnan(opts.hist_hi))) {
        // Freeze the histogram support at the initial reconstruction.
        const auto [mn, mx] = std::minmax_element(initial.data.begin(), initial.data.end());
        opts.hist_lo = *mn;
        opts.hist_hi = *mx;
    }
    return [metric = cfg.metric, opts](const Image& img) { return autofocus_loss(img, metric, opts); };
}

TraceRow measure(int iter, double loss, const Image& img, const Geometry& current,
                 const GroundTruth& truth, const std::vector<ProbePoint>& probes) {
    TraceRow row;
    row.iter = iter;
    row.loss = loss;
    if (truth.image) {
        row.ssim = ssim(img, *truth.image);
        row.mse = mse(img, *truth.image);
    }
    if (truth.geometry) {
        row.rpe = rpe(current, *truth.geometry, probes);
    }
    return row;
}

} // namespace

CompensationResult compensate(const Sinogram& raw, const Geometry& perturbed,
                              const ImageGrid& grid, const CompensationConfig& cfg,
                              const std::optional<Image>& reference, const GroundTruth& truth,
                              const ProgressCallback& progress) {
    cfg.validate();
    perturbed.validate();
    raw.require_matches(perturbed);
    if (truth.geometry && truth.geometry->n_views() != perturbed.n_views()) {
        throw ShapeMismatch("ground-truth geometry has a different number of views");
    }

    const Sinogram filtered = ramp_filter(raw, perturbed);
    const Sinogram dstar = detector_derivative(filtered);
    const auto probes = default_probe_points(grid);
    const std::size_t n = perturbed.n_views();

    MotionParams theta = MotionParams::zeros(n);
    TapedReconstruction rec;
    backproject_with_tape(filtered, perturbed, grid, rec);
    const ImageObjective objective = make_objective(cfg, reference, rec.image);

    CompensationResult result;
    result.trace.rows.reserve(static_cast<std::size_t>(cfg.iterations));
    Geometry current = perturbed;
    for (int t = 0; t < cfg.iterations; ++t) {
        if (t > 0) {
            current = apply_motion(perturbed, theta);
            backproject_with_tape(filtered, current, grid, rec);
        }
        const LossValueGrad lg = objective(rec.image);
        const GeometryGradient gp = backward_geometry(lg.grad, rec.positions, dstar, current, grid);
        const MotionGradient mg = backward_motion(gp, perturbed, theta);

        result.trace.rows.push_back(measure(t, lg.value, rec.image, current, truth, probes));
        if (progress && cfg.log_every > 0 && (t % cfg.log_every == 0)) {
            progress(result.trace.rows.back());
        }

        for (std::size_t i = 0; i < n; ++i) {
            theta.alpha[i] -= cfg.lr_rot * mg.d_alpha[i];
            theta.tx[i] -= cfg.lr_trans * mg.d_tx[i];
            theta.ty[i] -= cfg.lr_trans * mg.d_ty[i];
        }
    }

    current = apply_motion(perturbed, theta);
    result.image = backproject(filtered, current, grid);
    result.trace.final_state =
        measure(cfg.iterations, objective(result.image).value, result.image, current, truth, probes);
    result.params = theta;
    result.trace.params = theta;
    return result;
}

Measurement perturb_and_measure(const Image& img, const Geometry& geom,
                                const MotionParams& motion) {
    return {forward_project(img, geom), apply_motion(geom, motion)};
}

} // namespace ctgeo
