#pragma once

// Slow, independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"
#include "ctgeo/projector.hpp"

namespace oracle {

// Discrete Ram-Lak kernel in detector-index units.
inline double ram_lak(int d) {
    if (d == 0) {
        return 0.25;
    }
    if (d % 2 == 0) {
        return 0.0;
    }
    return -1.0 / (std::numbers::pi * std::numbers::pi * d * d);
}

// Cosine weighting, O(M^2) linear convolution and magnification scaling for
// a circular scan with the given source distances.
inline ctgeo::Sinogram ramp_filter_direct(const ctgeo::Sinogram& raw, double sid, double sdd) {
    const int m_count = raw.n_det;
    const double ds = raw.det_spacing;
    const double center = 0.5 * (m_count - 1);
    ctgeo::Sinogram out(raw.n_views, m_count, ds, ctgeo::SinogramKind::filtered);
    for (int i = 0; i < raw.n_views; ++i) {
        std::vector<double> q(static_cast<std::size_t>(m_count));
        for (int k = 0; k < m_count; ++k) {
            const double s = (k - center) * ds;
            q[k] = raw.at(i, k) * sdd / std::sqrt(sdd * sdd + s * s);
        }
        for (int m = 0; m < m_count; ++m) {
            double acc = 0.0;
            for (int k = 0; k < m_count; ++k) {
                acc += ram_lak(m - k) * q[k];
            }
            out.at(i, m) = acc * (sdd / sid) / (ds * ds);
        }
    }
    return out;
}

// Triple loop: pixel rows, pixel columns, views in ascending order.
inline ctgeo::Image backproject_naive(const ctgeo::Sinogram& s, const ctgeo::Geometry& g,
                                      const ctgeo::ImageGrid& grid) {
    ctgeo::Image img(grid);
    const int m_count = s.n_det;
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double x = grid.origin_x + ix * grid.spacing;
            const double y = grid.origin_y + iy * grid.spacing;
            double acc = 0.0;
            for (int i = 0; i < s.n_views; ++i) {
                const auto& p = g.matrices[i];
                const double u = p(0, 0) * x + p(0, 1) * y + p(0, 2);
                const double v = p(1, 0) * x + p(1, 1) * y + p(1, 2);
                if (std::abs(v) <= 1e-9) {
                    continue;
                }
                const double w = u / v;
                if (w < 0.0 || w > m_count - 1) {
                    continue;
                }
                const int lo = std::min(static_cast<int>(std::floor(w)), m_count - 2);
                const double t = w - lo;
                acc += (1.0 - t) * s.at(i, lo) + t * s.at(i, lo + 1);
            }
            img.at(ix, iy) = acc * (std::numbers::pi / s.n_views * s.det_spacing);
        }
    }
    return img;
}

} // namespace oracle
