#pragma once

#include <array>

#include "ctgeo/image.hpp"

namespace ctgeo {

/// One ellipse of an analytic phantom in normalized coordinates, where the
/// unit square [-1, 1]^2 spans the shorter side of the image grid.
struct Ellipse {
    double x0;
    double y0;
    double a;         ///< semi-axis along the rotated x direction
    double b;         ///< semi-axis along the rotated y direction
    double phi_deg;   ///< counterclockwise rotation
    int intensity_cs; ///< additive intensity in hundredths (exact summation)
};

/**
 * The ten-ellipse Shepp-Logan table as published by Shepp & Logan (1974)
 * with the Kak & Slaney layout. The contrast-enhanced variant replaces the
 * intensity column with Toft's modified values (1, -0.8, -0.2, -0.2, 0.1...),
 * which keeps every pixel >= 0 and spreads the soft-tissue features over a
 * wider gray range.
 */
const std::array<Ellipse, 10>& shepp_logan_table(bool contrast_enhanced);

/// Rasterizes the phantom by evaluating the ellipse sum at each pixel center
/// of a grid centered on the isocenter.
Image shepp_logan(int nx, int ny, double spacing, bool contrast_enhanced);

/// Same as above on an arbitrary grid, with the given half-width (mm) mapped
/// to normalized coordinate 1.
Image shepp_logan(const ImageGrid& grid, double half_width_mm, bool contrast_enhanced);

/// Uniform disk of the given radius and value centered at (cx, cy) mm.
Image disk(const ImageGrid& grid, double cx, double cy, double radius, double value);

} // namespace ctgeo
