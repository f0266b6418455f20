#include "ctgeo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctgeo/errors.hpp"

namespace ctgeo {

namespace {

constexpr std::array<Ellipse, 10> kStandard{{
    {0.0, 0.0, 0.69, 0.92, 0.0, 200},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -98},
    {0.22, 0.0, 0.11, 0.31, -18.0, -2},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -2},
    {0.0, 0.35, 0.21, 0.25, 0.0, 1},
    {0.0, 0.1, 0.046, 0.046, 0.0, 1},
    {0.0, -0.1, 0.046, 0.046, 0.0, 1},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 1},
    {0.0, -0.605, 0.023, 0.023, 0.0, 1},
    {0.06, -0.605, 0.023, 0.046, 0.0, 1},
}};

constexpr std::array<Ellipse, 10> kModified{{
    {0.0, 0.0, 0.69, 0.92, 0.0, 100},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -80},
    {0.22, 0.0, 0.11, 0.31, -18.0, -20},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -20},
    {0.0, 0.35, 0.21, 0.25, 0.0, 10},
    {0.0, 0.1, 0.046, 0.046, 0.0, 10},
    {0.0, -0.1, 0.046, 0.046, 0.0, 10},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 10},
    {0.0, -0.605, 0.023, 0.023, 0.0, 10},
    {0.06, -0.605, 0.023, 0.046, 0.0, 10},
}};

} // namespace

const std::array<Ellipse, 10>& shepp_logan_table(bool contrast_enhanced) {
    return contrast_enhanced ? kModified : kStandard;
}

Image shepp_logan(int nx, int ny, double spacing, bool contrast_enhanced) {
    const ImageGrid grid = ImageGrid::centered(nx, ny, spacing);
    return shepp_logan(grid, 0.5 * spacing * std::min(nx, ny), contrast_enhanced);
}

Image shepp_logan(const ImageGrid& grid, double half_width_mm, bool contrast_enhanced) {
    grid.validate();
    if (!(half_width_mm > 0.0)) {
        throw InvalidParameter("phantom half-width must be positive");
    }
    const auto& table = shepp_logan_table(contrast_enhanced);
    std::array<double, 10> cos_phi{}, sin_phi{};
    for (std::size_t e = 0; e < table.size(); ++e) {
        const double phi = table[e].phi_deg * std::numbers::pi / 180.0;
        cos_phi[e] = std::cos(phi);
        sin_phi[e] = std::sin(phi);
    }

    Image img(grid);
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < grid.ny; ++iy) {
        const double yn = grid.y(iy) / half_width_mm;
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double xn = grid.x(ix) / half_width_mm;
            int sum_cs = 0;
            for (std::size_t e = 0; e < table.size(); ++e) {
                const Ellipse& el = table[e];
                const double dx = xn - el.x0;
                const double dy = yn - el.y0;
                const double xr = dx * cos_phi[e] + dy * sin_phi[e];
                const double yr = -dx * sin_phi[e] + dy * cos_phi[e];
                if ((xr * xr) / (el.a * el.a) + (yr * yr) / (el.b * el.b) <= 1.0) {
                    sum_cs += el.intensity_cs;
                }
            }
            img.at(ix, iy) = sum_cs / 100.0;
        }
    }
    return img;
}

Image disk(const ImageGrid& grid, double cx, double cy, double radius, double value) {
    grid.validate();
    Image img(grid);
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double dx = grid.x(ix) - cx;
            const double dy = grid.y(iy) - cy;
            if (dx * dx + dy * dy <= radius * radius) {
                img.at(ix, iy) = value;
            }
        }
    }
    return img;
}

} // namespace ctgeo
