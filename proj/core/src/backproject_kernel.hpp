#pragma once

// Shared by backproject() and backproject_with_tape() so both produce the
// same bits.

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <vector>

#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"
#include "ctgeo/projector.hpp"

namespace ctgeo::detail {

template <bool Record>
std::uint64_t backproject_kernel(const Sinogram& filtered, const Geometry& geom,
                                 const ImageGrid& grid, Image& img, double* tape_u,
                                 double* tape_v) {
    const int n_views = filtered.n_views;
    const int n_det = filtered.n_det;
    const double scale = backprojection_scale(geom);
    const auto& mats = geom.matrices;
    const double* rows = filtered.data.data();
    const std::size_t npix = grid.size();

    std::uint64_t degenerate = 0;
    // Views are the middle loop so each pixel still sums in ascending view
    // order while tape writes stay contiguous.
#pragma omp parallel reduction(+ : degenerate)
    {
        std::vector<double> acc(static_cast<std::size_t>(grid.nx));
        std::vector<double> xs(static_cast<std::size_t>(grid.nx));
        for (int ix = 0; ix < grid.nx; ++ix) {
            xs[ix] = grid.x(ix);
        }
#pragma omp for schedule(static)
        for (int iy = 0; iy < grid.ny; ++iy) {
            const double y = grid.y(iy);
            const std::size_t row0 = static_cast<std::size_t>(iy) * grid.nx;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int i = 0; i < n_views; ++i) {
                const ProjectionMatrix& p = mats[i];
                const double* det_row = rows + static_cast<std::size_t>(i) * n_det;
                for (int ix = 0; ix < grid.nx; ++ix) {
                    const double x = xs[ix];
                    const double u = p(0, 0) * x + p(0, 1) * y + p(0, 2);
                    const double v = p(1, 0) * x + p(1, 1) * y + p(1, 2);
                    if constexpr (Record) {
                        const std::size_t k = static_cast<std::size_t>(i) * npix + row0 + ix;
                        tape_u[k] = u;
                        tape_v[k] = v;
                    }
                    if (!(std::abs(v) > kDivEpsilon)) {
                        ++degenerate;
                        continue;
                    }
                    acc[ix] += interpolate_detector(det_row, n_det, u / v);
                }
            }
            for (int ix = 0; ix < grid.nx; ++ix) {
                img.data[row0 + ix] = acc[ix] * scale;
            }
        }
    }
    return degenerate;
}

} // namespace ctgeo::detail
