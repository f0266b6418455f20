#include "ctgeo/projector.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "backproject_kernel.hpp"
#include "ctgeo/errors.hpp"

namespace ctgeo {

void Sinogram::require_matches(const Geometry& geom) const {
    if (static_cast<std::size_t>(n_views) != geom.n_views() || n_det != geom.n_det) {
        throw ShapeMismatch("sinogram is " + std::to_string(n_views) + "x" +
                            std::to_string(n_det) + " but geometry has " +
                            std::to_string(geom.n_views()) + " views of " +
                            std::to_string(geom.n_det) + " elements");
    }
    if (det_spacing != geom.det_spacing) {
        throw ShapeMismatch("sinogram detector spacing differs from geometry");
    }
    if (data.size() != static_cast<std::size_t>(n_views) * static_cast<std::size_t>(n_det)) {
        throw ShapeMismatch("sinogram payload size does not match its shape");
    }
}

double backprojection_scale(const Geometry& geom) {
    return std::numbers::pi / static_cast<double>(geom.n_views()) * geom.det_spacing;
}

namespace {

// Bilinear sample with zero outside the pixel-center lattice.
double sample_bilinear(const Image& img, double x, double y) {
    const ImageGrid& g = img.grid;
    const double fx = (x - g.origin_x) / g.spacing;
    const double fy = (y - g.origin_y) / g.spacing;
    const double flx = std::floor(fx);
    const double fly = std::floor(fy);
    const int ix = static_cast<int>(flx);
    const int iy = static_cast<int>(fly);
    const double tx = fx - flx;
    const double ty = fy - fly;

    auto value = [&](int i, int j) -> double {
        if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) {
            return 0.0;
        }
        return img.at(i, j);
    };
    const double top = (1.0 - tx) * value(ix, iy) + tx * value(ix + 1, iy);
    const double bot = (1.0 - tx) * value(ix, iy + 1) + tx * value(ix + 1, iy + 1);
    return (1.0 - ty) * top + ty * bot;
}

// Clips the parametric line s + t d (t >= 0) to an axis-aligned box.
bool clip_to_box(double sx, double sy, double dx, double dy, double xlo, double xhi,
                 double ylo, double yhi, double& t0, double& t1) {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::infinity();
    auto slab = [&](double s, double d, double lo, double hi) {
        if (d == 0.0) {
            return s > lo && s < hi;
        }
        double a = (lo - s) / d;
        double b = (hi - s) / d;
        if (a > b) {
            std::swap(a, b);
        }
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        return t0 < t1;
    };
    return slab(sx, dx, xlo, xhi) && slab(sy, dy, ylo, yhi);
}

} // namespace

Sinogram forward_project(const Image& img, const Geometry& geom) {
    img.grid.validate();
    geom.validate();
    if (img.data.size() != img.grid.size()) {
        throw ShapeMismatch("image payload does not match its grid");
    }

    const int n_views = static_cast<int>(geom.n_views());
    const int n_det = geom.n_det;
    Sinogram sino(n_views, n_det, geom.det_spacing, SinogramKind::raw);

    const ImageGrid& g = img.grid;
    const double xlo = g.origin_x - g.spacing;
    const double xhi = g.origin_x + g.nx * g.spacing;
    const double ylo = g.origin_y - g.spacing;
    const double yhi = g.origin_y + g.ny * g.spacing;

    std::vector<ViewParameters> views(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i) {
        views[i] = decompose_view(geom.matrices[i]);
    }

    const long long n_rays = static_cast<long long>(n_views) * n_det;
#pragma omp parallel for schedule(dynamic, 64)
    for (long long ray = 0; ray < n_rays; ++ray) {
        const int i = static_cast<int>(ray / n_det);
        const int m = static_cast<int>(ray % n_det);
        const ProjectionMatrix& p = geom.matrices[i];
        const ViewParameters& vp = views[i];

        // Points on the ray satisfy (row0 - m * row1) . (x, y, 1) = 0.
        const double a = p(0, 0) - m * p(1, 0);
        const double b = p(0, 1) - m * p(1, 1);
        double dx = -b;
        double dy = a;
        const double norm = std::hypot(dx, dy);
        dx /= norm;
        dy /= norm;
        if (p(1, 0) * dx + p(1, 1) * dy < 0.0) {
            dx = -dx;
            dy = -dy;
        }

        double t0 = 0.0, t1 = 0.0;
        if (!clip_to_box(vp.source[0], vp.source[1], dx, dy, xlo, xhi, ylo, yhi, t0, t1)) {
            continue;
        }
        const double iso_pixel = std::abs(vp.origin_depth / vp.focal_px);
        const double step_target = std::min(0.5 * g.spacing, 0.5 * iso_pixel);
        const double length = t1 - t0;
        const long long n_steps = std::max(1LL, static_cast<long long>(std::ceil(length / step_target)));
        const double step = length / static_cast<double>(n_steps);

        double acc = 0.0;
        for (long long k = 0; k < n_steps; ++k) {
            const double t = t0 + (static_cast<double>(k) + 0.5) * step;
            acc += sample_bilinear(img, vp.source[0] + t * dx, vp.source[1] + t * dy);
        }
        sino.at(i, m) = acc * step;
    }
    return sino;
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex mtx;
    return mtx;
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

using RealBuffer = std::unique_ptr<double, FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwDeleter>;
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

int padded_length(int n_det) {
    int len = 1;
    while (len < 2 * n_det) {
        len <<= 1;
    }
    return len;
}

} // namespace

Sinogram ramp_filter(const Sinogram& raw, const Geometry& geom) {
    geom.validate();
    raw.require_matches(geom);
    if (raw.kind != SinogramKind::raw) {
        throw InvalidParameter("ramp_filter expects a raw sinogram");
    }

    const int n_det = raw.n_det;
    const int len = padded_length(n_det);
    const int n_freq = len / 2 + 1;

    RealBuffer real(static_cast<double*>(fftw_malloc(sizeof(double) * len)));
    ComplexBuffer spec(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_freq)));
    Plan forward, backward;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        forward.reset(fftw_plan_dft_r2c_1d(len, real.get(), spec.get(), FFTW_ESTIMATE));
        backward.reset(fftw_plan_dft_c2r_1d(len, spec.get(), real.get(), FFTW_ESTIMATE));
    }

    // Kernel spectrum: h[d] for |d| <= M - 1, wrapped circularly.
    std::fill(real.get(), real.get() + len, 0.0);
    real.get()[0] = 0.25;
    for (int d = 1; d < n_det; d += 2) {
        const double h = -1.0 / (std::numbers::pi * std::numbers::pi * d * d);
        real.get()[d] = h;
        real.get()[len - d] = h;
    }
    fftw_execute(forward.get());
    std::vector<double> kernel(static_cast<std::size_t>(n_freq));
    for (int k = 0; k < n_freq; ++k) {
        // Real and even kernel: the imaginary part is rounding noise.
        kernel[k] = spec.get()[k][0];
    }

    Sinogram out(raw.n_views, n_det, raw.det_spacing, SinogramKind::filtered);
    std::vector<double> weights(static_cast<std::size_t>(n_det));
    for (int i = 0; i < raw.n_views; ++i) {
        const ViewParameters vp = decompose_view(geom.matrices[i]);
        for (int m = 0; m < n_det; ++m) {
            const double tan_angle = (m - vp.principal_px) / vp.focal_px;
            weights[m] = 1.0 / std::sqrt(1.0 + tan_angle * tan_angle);
        }
        const double magnification = vp.focal_px * raw.det_spacing / vp.origin_depth;
        const double row_scale = magnification / (raw.det_spacing * raw.det_spacing) / len;

        const auto in = raw.row(i);
        std::fill(real.get(), real.get() + len, 0.0);
        for (int m = 0; m < n_det; ++m) {
            real.get()[m] = weights[m] * in[m];
        }
        fftw_execute(forward.get());
        for (int k = 0; k < n_freq; ++k) {
            spec.get()[k][0] *= kernel[k];
            spec.get()[k][1] *= kernel[k];
        }
        fftw_execute(backward.get());
        auto dst = out.row(i);
        for (int m = 0; m < n_det; ++m) {
            dst[m] = real.get()[m] * row_scale;
        }
    }
    return out;
}

Image backproject(const Sinogram& filtered, const Geometry& geom, const ImageGrid& grid,
                  BackprojectStats* stats) {
    geom.validate();
    grid.validate();
    filtered.require_matches(geom);
    if (filtered.kind != SinogramKind::filtered) {
        throw InvalidParameter("backproject expects a filtered sinogram");
    }

    Image img(grid);
    const std::uint64_t degenerate =
        detail::backproject_kernel<false>(filtered, geom, grid, img, nullptr, nullptr);
    if (stats != nullptr) {
        stats->degenerate_rays += degenerate;
    }
    return img;
}

Image reconstruct(const Sinogram& raw, const Geometry& geom, const ImageGrid& grid) {
    return backproject(ramp_filter(raw, geom), geom, grid);
}

} // namespace ctgeo
