#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"

namespace ctgeo {

enum class SinogramKind { raw, filtered };

/// View-major detector readings: data[view * n_det + m].
struct Sinogram {
    int n_views = 0;
    int n_det = 0;
    double det_spacing = 0.0; ///< mm
    SinogramKind kind = SinogramKind::raw;
    std::vector<double> data;

    Sinogram() = default;
    Sinogram(int views, int det, double spacing, SinogramKind k)
        : n_views(views), n_det(det), det_spacing(spacing), kind(k),
          data(static_cast<std::size_t>(views) * static_cast<std::size_t>(det), 0.0) {}

    std::span<double> row(int view) {
        return {data.data() + static_cast<std::size_t>(view) * n_det, static_cast<std::size_t>(n_det)};
    }
    std::span<const double> row(int view) const {
        return {data.data() + static_cast<std::size_t>(view) * n_det, static_cast<std::size_t>(n_det)};
    }
    double& at(int view, int m) { return data[static_cast<std::size_t>(view) * n_det + m]; }
    double at(int view, int m) const { return data[static_cast<std::size_t>(view) * n_det + m]; }

    /// Throws ShapeMismatch unless n_views/n_det/det_spacing agree with geom.
    void require_matches(const Geometry& geom) const;
};

/// Diagnostics gathered by the backprojector.
struct BackprojectStats {
    std::uint64_t degenerate_rays = 0; ///< (view, pixel) pairs with |v| <= kDivEpsilon
};

/**
 * Line integrals (value * mm) along the ray from each view's source through
 * each detector element, by ray marching with bilinear interpolation. The
 * rays are read off the projection matrices: the source is the null vector
 * of P and detector index m lies on the line (row0 - m * row1) . (x, y, 1) = 0,
 * so perturbed geometries project correctly as well.
 */
Sinogram forward_project(const Image& img, const Geometry& geom);

/**
 * Cosine pre-weighting followed by Ram-Lak filtering of each detector row.
 * The convolution is linear (zero padded to a power of two >= 2M) and uses
 * the closed-form discrete kernel h[0] = 1/4, h[odd n] = -1/(pi n)^2 in
 * detector-index units. Rows are scaled by magnification / det_spacing^2 so
 * that backproject() yields gray values close to the attenuation scale.
 * The per-view weighting depends only on the intrinsics and the isocenter
 * depth read from geom.
 */
Sinogram ramp_filter(const Sinogram& raw, const Geometry& geom);

/**
 * I(x, y) = pi / N * det_spacing * sum_i d_i(u_i / v_i) with (u_i, v_i) =
 * P_i (x, y, 1) and d_i linear interpolation of the filtered row i. Rays that
 * land outside [0, M - 1] contribute 0; degenerate rays contribute 0 and are
 * counted in stats.
 */
Image backproject(const Sinogram& filtered, const Geometry& geom, const ImageGrid& grid,
                  BackprojectStats* stats = nullptr);

/// ramp_filter then backproject.
Image reconstruct(const Sinogram& raw, const Geometry& geom, const ImageGrid& grid);

/// The backprojection normalization pi / N * det_spacing.
double backprojection_scale(const Geometry& geom);

/// Linear interpolation of a detector row at continuous index w; 0 outside
/// [0, M - 1].
inline double interpolate_detector(const double* row, int n_det, double w) {
    if (!(w >= 0.0 && w <= static_cast<double>(n_det - 1))) {
        return 0.0;
    }
    int m = static_cast<int>(w);
    if (m > n_det - 2) {
        m = n_det - 2;
    }
    const double t = w - m;
    return (1.0 - t) * row[m] + t * row[m + 1];
}

} // namespace ctgeo
