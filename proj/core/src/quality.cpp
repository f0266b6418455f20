#include "ctgeo/quality.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctgeo/errors.hpp"

namespace ctgeo {

LossValueGrad mse_loss(const Image& img, const Image& ref) {
    img.require_same_grid(ref);
    const std::size_t n = img.data.size();
    LossValueGrad out{0.0, Image(img.grid)};
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = img.data[k] - ref.data[k];
        sum += d * d;
        out.grad.data[k] = 2.0 * d / static_cast<double>(n);
    }
    out.value = sum / static_cast<double>(n);
    return out;
}

LossValueGrad mean_intensity_loss(const Image& img) {
    const std::size_t n = img.data.size();
    LossValueGrad out{0.0, Image(img.grid)};
    double sum = 0.0;
    for (double v : img.data) {
        sum += v;
    }
    out.value = sum / static_cast<double>(n);
    std::fill(out.grad.data.begin(), out.grad.data.end(), 1.0 / static_cast<double>(n));
    return out;
}

double mse(const Image& img, const Image& ref) { return mse_loss(img, ref).value; }

AutofocusMetric parse_autofocus_metric(std::string_view name) {
    if (name == "entropy") {
        return AutofocusMetric::entropy;
    }
    if (name == "tv" || name == "total_variation") {
        return AutofocusMetric::total_variation;
    }
    if (name == "gradvar" || name == "gradient_variance") {
        return AutofocusMetric::gradient_variance;
    }
    throw InvalidParameter("unknown autofocus metric '" + std::string(name) + "'");
}

namespace {

LossValueGrad soft_entropy(const Image& img, const AutofocusOptions& opts) {
    if (opts.bins < 2 || !(opts.bandwidth_bins > 0.0)) {
        throw InvalidParameter("entropy needs >= 2 bins and a positive bandwidth");
    }
    double lo = opts.hist_lo;
    double hi = opts.hist_hi;
    if (std::isnan(lo) || std::isnan(hi)) {
        const auto [mn, mx] = std::minmax_element(img.data.begin(), img.data.end());
        lo = *mn;
        hi = *mx;
    }
    if (!(hi > lo)) {
        hi = lo + 1.0;
    }
    const int bins = opts.bins;
    const double width = (hi - lo) / bins;
    const double sigma = opts.bandwidth_bins * width;
    const long long n = static_cast<long long>(img.data.size());

    std::vector<double> centers(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        centers[b] = lo + (b + 0.5) * width;
    }

    std::vector<double> q(static_cast<std::size_t>(bins), 0.0);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < bins; ++b) {
        double acc = 0.0;
        for (long long k = 0; k < n; ++k) {
            const double z = (img.data[k] - centers[b]) / sigma;
            acc += std::exp(-0.5 * z * z);
        }
        q[b] = acc;
    }
    double total = 0.0;
    for (double v : q) {
        total += v;
    }

    double entropy = 0.0;
    std::vector<double> log_p(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) {
        if (q[b] > 0.0) {
            const double p = q[b] / total;
            log_p[b] = std::log(p);
            entropy -= p * log_p[b];
        }
    }

    // dH/dq_b = (-log p_b - H) / Q
    std::vector<double> dq(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) {
        if (q[b] > 0.0) {
            dq[b] = (-log_p[b] - entropy) / total;
        }
    }

    LossValueGrad out{entropy, Image(img.grid)};
#pragma omp parallel for schedule(static)
    for (long long k = 0; k < n; ++k) {
        double g = 0.0;
        for (int b = 0; b < bins; ++b) {
            const double z = (img.data[k] - centers[b]) / sigma;
            g += dq[b] * std::exp(-0.5 * z * z) * (-z / sigma);
        }
        out.grad.data[k] = g;
    }
    return out;
}

struct ForwardDiffs {
    std::vector<double> dx, dy, mag;
};

ForwardDiffs forward_diffs(const Image& img, double eps) {
    const int nx = img.grid.nx;
    const int ny = img.grid.ny;
    ForwardDiffs f;
    f.dx.assign(img.data.size(), 0.0);
    f.dy.assign(img.data.size(), 0.0);
    f.mag.assign(img.data.size(), 0.0);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const std::size_t k = static_cast<std::size_t>(iy) * nx + ix;
            const double dx = ix + 1 < nx ? img.data[k + 1] - img.data[k] : 0.0;
            const double dy = iy + 1 < ny ? img.data[k + nx] - img.data[k] : 0.0;
            f.dx[k] = dx;
            f.dy[k] = dy;
            f.mag[k] = std::sqrt(dx * dx + dy * dy + eps);
        }
    }
    return f;
}

// Pulls per-pixel sensitivities c_k = dL/dmag_k back onto the image.
Image pull_back(const ImageGrid& grid, const ForwardDiffs& f, const std::vector<double>& c) {
    const int nx = grid.nx;
    const int ny = grid.ny;
    Image g(grid);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const std::size_t k = static_cast<std::size_t>(iy) * nx + ix;
            const double ax = c[k] * f.dx[k] / f.mag[k];
            const double ay = c[k] * f.dy[k] / f.mag[k];
            if (ix + 1 < nx) {
                g.data[k + 1] += ax;
                g.data[k] -= ax;
            }
            if (iy + 1 < ny) {
                g.data[k + nx] += ay;
                g.data[k] -= ay;
            }
        }
    }
    return g;
}

LossValueGrad total_variation(const Image& img, double eps) {
    const ForwardDiffs f = forward_diffs(img, eps);
    const double n = static_cast<double>(img.data.size());
    const double floor = std::sqrt(eps);
    double sum = 0.0;
    for (double m : f.mag) {
        sum += m - floor;
    }
    std::vector<double> c(img.data.size(), 1.0 / n);
    return {sum / n, pull_back(img.grid, f, c)};
}

LossValueGrad gradient_variance(const Image& img, double eps) {
    const ForwardDiffs f = forward_diffs(img, eps);
    const double n = static_cast<double>(img.data.size());
    double mean = 0.0;
    for (double m : f.mag) {
        mean += m;
    }
    mean /= n;
    double var = 0.0;
    for (double m : f.mag) {
        var += (m - mean) * (m - mean);
    }
    var /= n;
    // d(-var)/dmag_k = -2 (mag_k - mean) / n; the mean's own derivative cancels.
    std::vector<double> c(img.data.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = -2.0 * (f.mag[k] - mean) / n;
    }
    return {-var, pull_back(img.grid, f, c)};
}

} // namespace

LossValueGrad autofocus_loss(const Image& img, AutofocusMetric metric,
                             const AutofocusOptions& opts) {
    if (img.data.empty()) {
        throw InvalidParameter("autofocus loss on an empty image");
    }
    switch (metric) {
    case AutofocusMetric::entropy:
        return soft_entropy(img, opts);
    case AutofocusMetric::total_variation:
        return total_variation(img, opts.tv_epsilon);
    case AutofocusMetric::gradient_variance:
        return gradient_variance(img, opts.tv_epsilon);
    }
    throw InvalidParameter("unknown autofocus metric");
}

namespace {

// Separable "valid" Gaussian filtering; output is (nx - w + 1) x (ny - w + 1).
std::vector<double> filter_valid(const std::vector<double>& src, int nx, int ny,
                                 const std::vector<double>& kernel) {
    const int w = static_cast<int>(kernel.size());
    const int ox = nx - w + 1;
    const int oy = ny - w + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ox) * ny);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < ox; ++ix) {
            double acc = 0.0;
            for (int t = 0; t < w; ++t) {
                acc += kernel[t] * src[static_cast<std::size_t>(iy) * nx + ix + t];
            }
            tmp[static_cast<std::size_t>(iy) * ox + ix] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ox) * oy);
    for (int iy = 0; iy < oy; ++iy) {
        for (int ix = 0; ix < ox; ++ix) {
            double acc = 0.0;
            for (int t = 0; t < w; ++t) {
                acc += kernel[t] * tmp[static_cast<std::size_t>(iy + t) * ox + ix];
            }
            out[static_cast<std::size_t>(iy) * ox + ix] = acc;
        }
    }
    return out;
}

} // namespace

double ssim(const Image& img, const Image& ref, const SsimOptions& opts) {
    img.require_same_grid(ref);
    const int nx = img.grid.nx;
    const int ny = img.grid.ny;
    const int w = opts.window;
    if (nx < w || ny < w) {
        throw InvalidParameter("image smaller than the " + std::to_string(w) + "x" +
                               std::to_string(w) + " SSIM window");
    }
    const auto [mn, mx] = std::minmax_element(ref.data.begin(), ref.data.end());
    const double range = *mx - *mn;
    if (!(range > 0.0)) {
        throw InvalidParameter("SSIM reference has zero dynamic range");
    }

    std::vector<double> kernel(static_cast<std::size_t>(w));
    double ksum = 0.0;
    for (int t = 0; t < w; ++t) {
        const double d = t - 0.5 * (w - 1);
        kernel[t] = std::exp(-d * d / (2.0 * opts.sigma * opts.sigma));
        ksum += kernel[t];
    }
    for (double& k : kernel) {
        k /= ksum;
    }

    const std::size_t n = img.data.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t k = 0; k < n; ++k) {
        aa[k] = img.data[k] * img.data[k];
        bb[k] = ref.data[k] * ref.data[k];
        ab[k] = img.data[k] * ref.data[k];
    }
    const auto mu_a = filter_valid(img.data, nx, ny, kernel);
    const auto mu_b = filter_valid(ref.data, nx, ny, kernel);
    const auto e_aa = filter_valid(aa, nx, ny, kernel);
    const auto e_bb = filter_valid(bb, nx, ny, kernel);
    const auto e_ab = filter_valid(ab, nx, ny, kernel);

    const double c1 = (opts.k1 * range) * (opts.k1 * range);
    const double c2 = (opts.k2 * range) * (opts.k2 * range);
    double sum = 0.0;
    for (std::size_t k = 0; k < mu_a.size(); ++k) {
        const double ma = mu_a[k];
        const double mb = mu_b[k];
        const double va = e_aa[k] - ma * ma;
        const double vb = e_bb[k] - mb * mb;
        const double cov = e_ab[k] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(mu_a.size());
}

std::vector<ProbePoint> default_probe_points(const ImageGrid& grid) {
    const double cx = grid.origin_x + 0.5 * grid.spacing * (grid.nx - 1);
    const double cy = grid.origin_y + 0.5 * grid.spacing * (grid.ny - 1);
    const double half_x = 0.25 * grid.spacing * grid.nx;
    const double half_y = 0.25 * grid.spacing * grid.ny;
    std::vector<ProbePoint> probes;
    probes.reserve(25);
    for (int j = 0; j < 5; ++j) {
        for (int i = 0; i < 5; ++i) {
            probes.push_back({cx - half_x + i * 0.5 * half_x, cy - half_y + j * 0.5 * half_y});
        }
    }
    return probes;
}

double rpe(const Geometry& est, const Geometry& gt, std::span<const ProbePoint> probes) {
    if (est.n_views() != gt.n_views()) {
        throw ShapeMismatch("RPE needs geometries with equal view counts");
    }
    if (probes.empty() || gt.n_views() == 0) {
        throw InvalidParameter("RPE needs at least one view and one probe point");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < gt.n_views(); ++i) {
        for (const auto& pt : probes) {
            const auto he = est.matrices[i].project(pt[0], pt[1]);
            const auto hg = gt.matrices[i].project(pt[0], pt[1]);
            sum += std::abs(dehomogenize(he.u, he.v) - dehomogenize(hg.u, hg.v));
        }
    }
    return sum / static_cast<double>(gt.n_views() * probes.size()) * gt.det_spacing;
}

} // namespace ctgeo
