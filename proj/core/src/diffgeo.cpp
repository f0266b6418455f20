#include "ctgeo/diffgeo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "backproject_kernel.hpp"
#include "ctgeo/errors.hpp"

namespace ctgeo {

double MotionGradient::max_abs() const {
    double m = 0.0;
    for (const auto* group : {&d_alpha, &d_tx, &d_ty}) {
        for (double g : *group) {
            m = std::max(m, std::abs(g));
        }
    }
    return m;
}

void backproject_with_tape(const Sinogram& filtered, const Geometry& geom,
                           const ImageGrid& grid, TapedReconstruction& out) {
    geom.validate();
    grid.validate();
    filtered.require_matches(geom);
    if (filtered.kind != SinogramKind::filtered) {
        throw InvalidParameter("backproject_with_tape expects a filtered sinogram");
    }
    const std::size_t n_entries = geom.n_views() * grid.size();
    if (!(out.image.grid == grid) || out.image.data.size() != grid.size()) {
        out.image = Image(grid);
    }
    out.positions.n_views = static_cast<int>(geom.n_views());
    out.positions.grid = grid;
    out.positions.u.resize(n_entries);
    out.positions.v.resize(n_entries);
    out.stats = {};
    out.stats.degenerate_rays = detail::backproject_kernel<true>(
        filtered, geom, grid, out.image, out.positions.u.data(), out.positions.v.data());
}

TapedReconstruction backproject_with_tape(const Sinogram& filtered, const Geometry& geom,
                                          const ImageGrid& grid) {
    TapedReconstruction out;
    backproject_with_tape(filtered, geom, grid, out);
    return out;
}

Sinogram detector_derivative(const Sinogram& filtered) {
    const int m_count = filtered.n_det;
    if (m_count < 3) {
        throw InvalidParameter("detector derivative needs at least 3 elements, got " +
                               std::to_string(m_count));
    }
    Sinogram out(filtered.n_views, m_count, filtered.det_spacing, filtered.kind);
    for (int i = 0; i < filtered.n_views; ++i) {
        const auto d = filtered.row(i);
        auto o = out.row(i);
        o[0] = (-3.0 * d[0] + 4.0 * d[1] - d[2]) / 2.0;
        for (int m = 1; m + 1 < m_count; ++m) {
            o[m] = (d[m + 1] - d[m - 1]) / 2.0;
        }
        const int last = m_count - 1;
        o[last] = (3.0 * d[last] - 4.0 * d[last - 1] + d[last - 2]) / 2.0;
    }
    return out;
}

GeometryGradient backward_geometry(const Image& grad_image, const SampledPositions& positions,
                                   const Sinogram& dstar, const Geometry& geom,
                                   const ImageGrid& grid, BackwardStats* stats) {
    const std::size_t npix = grid.size();
    const int n_views = static_cast<int>(geom.n_views());
    if (grad_image.data.size() != npix || grad_image.grid.nx != grid.nx ||
        grad_image.grid.ny != grid.ny) {
        throw ShapeMismatch("image gradient does not match the reconstruction grid");
    }
    if (positions.n_views != n_views || !(positions.grid == grid) ||
        positions.u.size() != npix * n_views || positions.v.size() != npix * n_views) {
        throw ShapeMismatch("sampled positions do not match geometry and grid");
    }
    if (dstar.n_views != n_views || dstar.n_det != geom.n_det ||
        dstar.data.size() != static_cast<std::size_t>(n_views) * geom.n_det) {
        throw ShapeMismatch("detector derivative does not match the geometry");
    }

    const int n_det = geom.n_det;
    const double scale = backprojection_scale(geom);
    GeometryGradient out;
    out.blocks.assign(static_cast<std::size_t>(n_views), Mat2x3{});

    std::vector<double> xs(static_cast<std::size_t>(grid.nx));
    std::vector<double> ys(static_cast<std::size_t>(grid.ny));
    for (int ix = 0; ix < grid.nx; ++ix) {
        xs[ix] = grid.x(ix);
    }
    for (int iy = 0; iy < grid.ny; ++iy) {
        ys[iy] = grid.y(iy);
    }

    std::uint64_t degenerate = 0;
#pragma omp parallel for schedule(dynamic, 1) reduction(+ : degenerate)
    for (int j = 0; j < n_views; ++j) {
        const double* u = positions.u.data() + static_cast<std::size_t>(j) * npix;
        const double* v = positions.v.data() + static_cast<std::size_t>(j) * npix;
        const double* row = dstar.data.data() + static_cast<std::size_t>(j) * n_det;
        // sum_a * (x, y, 1) feeds row 0, sum_b * (x, y, 1) feeds row 1.
        double ax = 0.0, ay = 0.0, a1 = 0.0, bx = 0.0, by = 0.0, b1 = 0.0;
        for (int iy = 0; iy < grid.ny; ++iy) {
            const double y = ys[iy];
            for (int ix = 0; ix < grid.nx; ++ix) {
                const std::size_t k = static_cast<std::size_t>(iy) * grid.nx + ix;
                const double vj = v[k];
                if (!(std::abs(vj) > kDivEpsilon)) {
                    ++degenerate;
                    continue;
                }
                const double gi = grad_image.data[k];
                if (gi == 0.0) {
                    continue;
                }
                const double w = u[k] / vj;
                if (!(w >= 0.0 && w <= static_cast<double>(n_det - 1))) {
                    continue;
                }
                const double g = gi * interpolate_detector(row, n_det, w);
                const double a = g / vj;
                const double b = -g * w / vj;
                const double x = xs[ix];
                ax += a * x;
                ay += a * y;
                a1 += a;
                bx += b * x;
                by += b * y;
                b1 += b;
            }
        }
        out.blocks[j] = {{{scale * ax, scale * ay, scale * a1}, {scale * bx, scale * by, scale * b1}}};
    }
    if (stats != nullptr) {
        stats->degenerate_rays += degenerate;
    }
    return out;
}

MotionGradient backward_motion(const GeometryGradient& grad_p, const Geometry& base_geom,
                               const MotionParams& params) {
    const std::size_t n = base_geom.n_views();
    if (grad_p.blocks.size() != n || params.n_views() != n || params.tx.size() != n ||
        params.ty.size() != n) {
        throw ShapeMismatch("backward_motion: gradient, geometry and motion disagree on the "
                            "number of views");
    }
    MotionGradient out;
    out.d_alpha.resize(n);
    out.d_tx.resize(n);
    out.d_ty.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ProjectionMatrix& p = base_geom.matrices[i];
        const Mat2x3& g = grad_p.blocks[i];
        const double c = std::cos(params.alpha[i]);
        const double s = std::sin(params.alpha[i]);
        // dM/dalpha = [[-s, -c, 0], [c, -s, 0], [0, 0, 0]]
        double da = 0.0;
        for (int r = 0; r < 2; ++r) {
            const double col0 = -s * p(r, 0) + c * p(r, 1);
            const double col1 = -c * p(r, 0) - s * p(r, 1);
            da += g[r][0] * col0 + g[r][1] * col1;
        }
        out.d_alpha[i] = da;
        // dM/dtx = e_02, dM/dty = e_12: only the last column of P dM is nonzero.
        out.d_tx[i] = g[0][2] * p(0, 0) + g[1][2] * p(1, 0);
        out.d_ty[i] = g[0][2] * p(0, 1) + g[1][2] * p(1, 1);
    }
    return out;
}

double gradcheck_relative_error(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    if (mag < 1e-12) {
        return diff;
    }
    return diff / mag;
}

double GradcheckReport::worst() const {
    return *std::max_element(max_rel_err.begin(), max_rel_err.end());
}

GradcheckReport gradcheck(const ImageObjective& loss, const Geometry& geom,
                          const Sinogram& filtered, const ImageGrid& grid,
                          const std::array<double, 6>& h) {
    for (double step : h) {
        if (!(step > 0.0)) {
            throw InvalidParameter("gradcheck steps must be positive");
        }
    }
    const TapedReconstruction base = backproject_with_tape(filtered, geom, grid);
    const LossValueGrad l0 = loss(base.image);
    const Sinogram dstar = detector_derivative(filtered);
    const GeometryGradient analytic =
        backward_geometry(l0.grad, base.positions, dstar, geom, grid);

    const int n_views = static_cast<int>(geom.n_views());
    const int n_det = geom.n_det;
    const std::size_t npix = grid.size();
    const double scale = backprojection_scale(geom);

    GradcheckReport report;
    report.loss = l0.value;
    report.entries.resize(static_cast<std::size_t>(n_views) * 6);

    Image perturbed(grid);
    for (int j = 0; j < n_views; ++j) {
        const double* row = filtered.data.data() + static_cast<std::size_t>(j) * n_det;
        // Current summand of view j at every pixel.
        std::vector<double> old_term(npix, 0.0);
        for (std::size_t k = 0; k < npix; ++k) {
            const double u = base.positions.u[static_cast<std::size_t>(j) * npix + k];
            const double v = base.positions.v[static_cast<std::size_t>(j) * npix + k];
            old_term[k] = std::abs(v) > kDivEpsilon ? interpolate_detector(row, n_det, u / v) : 0.0;
        }
        for (int e = 0; e < 6; ++e) {
            const int r = e / 3;
            const int c = e % 3;
            ProjectionMatrix p = geom.matrices[j];
            p(r, c) += h[e];
            const double h_eff = p(r, c) - geom.matrices[j](r, c);
#pragma omp parallel for schedule(static)
            for (int iy = 0; iy < grid.ny; ++iy) {
                const double y = grid.y(iy);
                for (int ix = 0; ix < grid.nx; ++ix) {
                    const std::size_t k = static_cast<std::size_t>(iy) * grid.nx + ix;
                    const auto hv = p.project(grid.x(ix), y);
                    const double term = std::abs(hv.v) > kDivEpsilon
                                            ? interpolate_detector(row, n_det, hv.u / hv.v)
                                            : 0.0;
                    perturbed.data[k] = base.image.data[k] + scale * (term - old_term[k]);
                }
            }
            const double l1 = loss(perturbed).value;
            GradcheckEntry& entry = report.entries[static_cast<std::size_t>(j) * 6 + e];
            entry.view = j;
            entry.row = r;
            entry.col = c;
            entry.h = h_eff;
            entry.analytic = analytic.blocks[j][r][c];
            entry.numeric = (l1 - l0.value) / h_eff;
            entry.rel_err = gradcheck_relative_error(entry.analytic, entry.numeric);
        }
    }

    for (int e = 0; e < 6; ++e) {
        double mx = 0.0, sum = 0.0;
        for (int j = 0; j < n_views; ++j) {
            const double re = report.entries[static_cast<std::size_t>(j) * 6 + e].rel_err;
            mx = std::max(mx, re);
            sum += re;
        }
        report.max_rel_err[e] = mx;
        report.mean_rel_err[e] = sum / n_views;
    }
    return report;
}

} // namespace ctgeo
