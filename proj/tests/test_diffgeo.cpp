#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "ctgeo/diffgeo.hpp"
#include "ctgeo/errors.hpp"
#include "ctgeo/phantom.hpp"
#include "ctgeo/quality.hpp"
#include "oracles.hpp"

using namespace ctgeo;

namespace {

struct Scene {
    Geometry geom;
    ImageGrid grid;
    Sinogram filtered;
};

Scene small_scene(int n = 32, int views = 24, int n_det = 128) {
    Scene s;
    s.geom = make_circular_geometry(views, 1000, 2000, n_det, 2.0);
    const Image ph = shepp_logan(n, n, 2.0, true);
    s.grid = ph.grid;
    s.filtered = ramp_filter(forward_project(ph, s.geom), s.geom);
    return s;
}

Image random_image(const ImageGrid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Image img(grid);
    for (double& v : img.data) {
        v = d(rng);
    }
    return img;
}

double linear_interp(std::span<const double> row, double w) {
    const int m = static_cast<int>(row.size());
    if (w < 0.0 || w > m - 1) {
        return 0.0;
    }
    const int lo = std::min(static_cast<int>(std::floor(w)), m - 2);
    const double t = w - lo;
    return (1.0 - t) * row[lo] + t * row[lo + 1];
}

} // namespace

TEST(Tape, ImageEqualsPlainBackprojectionBitwise) {
    const Scene s = small_scene();
    const auto geom = apply_motion(s.geom, sample_random_motion(24, 3.0, 0.05, 3));
    const TapedReconstruction t = backproject_with_tape(s.filtered, geom, s.grid);
    const Image plain = backproject(s.filtered, geom, s.grid);
    ASSERT_EQ(t.image.data.size(), plain.data.size());
    for (std::size_t k = 0; k < plain.data.size(); ++k) {
        EXPECT_EQ(t.image.data[k], plain.data[k]);
    }
}

TEST(Tape, ShapeAndIsocenterPositions) {
    const auto geom = make_circular_geometry(10, 1000, 2000, 64, 2.0);
    const ImageGrid grid = ImageGrid::centered(7, 5, 1.0);
    const Sinogram f(10, 64, 2.0, SinogramKind::filtered);
    const TapedReconstruction t = backproject_with_tape(f, geom, grid);
    EXPECT_EQ(t.positions.u.size() + t.positions.v.size(), 2u * 10u * 35u);
    EXPECT_EQ(t.positions.entries(), 2u * 10u * 35u);
    const std::size_t center = 2 * 7 + 3;
    for (int i = 0; i < 10; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * 35 + center;
        EXPECT_NEAR(t.positions.u[k] / t.positions.v[k], 31.5, 1e-12);
    }
}

TEST(DetectorDerivative, ExactOnLinearRows) {
    Sinogram s(2, 9, 1.0, SinogramKind::filtered);
    for (int m = 0; m < 9; ++m) {
        s.at(0, m) = 1.5 * m - 4.0;
        s.at(1, m) = 7.0;
    }
    const Sinogram d = detector_derivative(s);
    for (int m = 0; m < 9; ++m) {
        EXPECT_NEAR(d.at(0, m), 1.5, 1e-14);
        EXPECT_EQ(d.at(1, m), 0.0);
    }
}

TEST(DetectorDerivative, SecondOrderOnQuadratics) {
    Sinogram s(1, 11, 1.0, SinogramKind::filtered);
    for (int m = 0; m < 11; ++m) {
        s.at(0, m) = static_cast<double>(m * m);
    }
    const Sinogram d = detector_derivative(s);
    for (int m = 0; m < 11; ++m) {
        EXPECT_EQ(d.at(0, m), 2.0 * m);
    }
}

TEST(DetectorDerivative, NeedsThreeElements) {
    EXPECT_THROW(detector_derivative(Sinogram(1, 2, 1.0, SinogramKind::filtered)),
                 InvalidParameter);
    EXPECT_NO_THROW(detector_derivative(Sinogram(1, 3, 1.0, SinogramKind::filtered)));
}

TEST(BackwardGeometry, ZeroUpstreamGradientGivesZero) {
    const Scene s = small_scene();
    const auto t = backproject_with_tape(s.filtered, s.geom, s.grid);
    const auto g = backward_geometry(Image(s.grid), t.positions, detector_derivative(s.filtered),
                                     s.geom, s.grid);
    for (const auto& b : g.blocks) {
        for (const auto& row : b) {
            for (double v : row) {
                EXPECT_EQ(v, 0.0);
            }
        }
    }
}

TEST(BackwardGeometry, ConstantSinogramHasNoGradient) {
    const auto geom = make_circular_geometry(16, 1000, 2000, 256, 2.0);
    const ImageGrid grid = ImageGrid::centered(20, 20, 1.0);
    Sinogram f(16, 256, 2.0, SinogramKind::filtered);
    std::fill(f.data.begin(), f.data.end(), 3.0);
    const auto t = backproject_with_tape(f, geom, grid);
    const auto g = backward_geometry(random_image(grid, 1), t.positions, detector_derivative(f),
                                     geom, grid);
    for (const auto& b : g.blocks) {
        for (const auto& row : b) {
            for (double v : row) {
                EXPECT_LT(std::abs(v), 1e-12);
            }
        }
    }
}

TEST(BackwardGeometry, LinearInUpstreamGradient) {
    const Scene s = small_scene();
    const auto t = backproject_with_tape(s.filtered, s.geom, s.grid);
    const Sinogram ds = detector_derivative(s.filtered);
    const Image a = random_image(s.grid, 2), b = random_image(s.grid, 3);
    Image mix(s.grid);
    for (std::size_t k = 0; k < mix.data.size(); ++k) {
        mix.data[k] = 2.0 * a.data[k] - 3.0 * b.data[k];
    }
    const auto ga = backward_geometry(a, t.positions, ds, s.geom, s.grid);
    const auto gb = backward_geometry(b, t.positions, ds, s.geom, s.grid);
    const auto gm = backward_geometry(mix, t.positions, ds, s.geom, s.grid);
    for (std::size_t j = 0; j < gm.blocks.size(); ++j) {
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) {
                const double expected = 2.0 * ga.blocks[j][r][c] - 3.0 * gb.blocks[j][r][c];
                EXPECT_NEAR(gm.blocks[j][r][c], expected, 1e-12 * std::max(1.0, std::abs(expected)));
            }
        }
    }
}

TEST(BackwardGeometry, SinglePixelMatchesHandFormula) {
    const Scene s = small_scene();
    const auto geom = apply_motion(s.geom, sample_random_motion(24, 3.0, 0.05, 8));
    const auto t = backproject_with_tape(s.filtered, geom, s.grid);
    const Sinogram ds = detector_derivative(s.filtered);
    const int px = 13, py = 19;
    Image gi(s.grid);
    gi.at(px, py) = 0.7;
    const auto g = backward_geometry(gi, t.positions, ds, geom, s.grid);

    // Hand-built central differences, independent of detector_derivative.
    const double x = s.grid.x(px), y = s.grid.y(py);
    const double scale = std::numbers::pi / 24 * 2.0;
    for (int j = 0; j < 24; ++j) {
        const auto row = s.filtered.row(j);
        std::vector<double> d(row.size());
        const int m = static_cast<int>(row.size());
        for (int k = 1; k + 1 < m; ++k) {
            d[k] = 0.5 * (row[k + 1] - row[k - 1]);
        }
        d[0] = 0.5 * (-3 * row[0] + 4 * row[1] - row[2]);
        d[m - 1] = 0.5 * (3 * row[m - 1] - 4 * row[m - 2] + row[m - 3]);
        const auto& p = geom.matrices[j];
        const double u = p(0, 0) * x + p(0, 1) * y + p(0, 2);
        const double v = p(1, 0) * x + p(1, 1) * y + p(1, 2);
        const double w = u / v;
        const double dstar = linear_interp(d, w);
        const double dw_du = 1.0 / v, dw_dv = -u / (v * v);
        const double xs[3] = {x, y, 1.0};
        for (int c = 0; c < 3; ++c) {
            const double e0 = scale * 0.7 * dstar * dw_du * xs[c];
            const double e1 = scale * 0.7 * dstar * dw_dv * xs[c];
            EXPECT_NEAR(g.blocks[j][0][c], e0, 1e-12 * std::max(1.0, std::abs(e0)));
            EXPECT_NEAR(g.blocks[j][1][c], e1, 1e-12 * std::max(1.0, std::abs(e1)));
        }
    }
}

TEST(BackwardGeometry, ScalesWithSinogram) {
    const Scene s = small_scene();
    Sinogram f2 = s.filtered;
    for (double& v : f2.data) {
        v *= 4.0;
    }
    const auto t = backproject_with_tape(s.filtered, s.geom, s.grid);
    const Image gi = random_image(s.grid, 5);
    const auto a = backward_geometry(gi, t.positions, detector_derivative(s.filtered), s.geom, s.grid);
    const auto b = backward_geometry(gi, t.positions, detector_derivative(f2), s.geom, s.grid);
    for (std::size_t j = 0; j < a.blocks.size(); ++j) {
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(b.blocks[j][r][c], 4.0 * a.blocks[j][r][c],
                            1e-12 * std::max(1.0, std::abs(b.blocks[j][r][c])));
            }
        }
    }
}

TEST(BackwardGeometry, DegenerateRaysCountedNotThrown) {
    const auto geom = make_circular_geometry(2, 10, 20, 16, 1.0);
    Sinogram f(2, 16, 1.0, SinogramKind::filtered);
    for (int m = 0; m < 16; ++m) {
        f.at(0, m) = f.at(1, m) = m * 0.1;
    }
    const ImageGrid grid{1, 1, 1.0, 0.0, -10.0};
    const auto t = backproject_with_tape(f, geom, grid);
    Image gi(grid);
    gi.data[0] = 1.0;
    BackwardStats stats;
    const auto g = backward_geometry(gi, t.positions, detector_derivative(f), geom, grid, &stats);
    EXPECT_EQ(stats.degenerate_rays, 1u);
    for (double v : g.blocks[0][0]) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(BackwardGeometry, ShapeMismatchThrows) {
    const Scene s = small_scene();
    const auto t = backproject_with_tape(s.filtered, s.geom, s.grid);
    const Image wrong(ImageGrid::centered(8, 8, 1.0));
    EXPECT_THROW(backward_geometry(wrong, t.positions, detector_derivative(s.filtered), s.geom, s.grid),
                 ShapeMismatch);
}

TEST(BackwardMotion, FrobeniusProductWithMotionDerivative) {
    // A fixed upstream block G turns L(theta) = <G, P M(theta)> into a function
    // with exact derivative <G, P dM/dtheta>; compare against central
    // differences of that scalar.
    const auto geom = make_circular_geometry(5, 1000, 2000, 64, 2.0);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    GeometryGradient gp;
    gp.blocks.resize(5);
    for (auto& b : gp.blocks) {
        for (auto& row : b) {
            for (double& v : row) {
                v = d(rng);
            }
        }
    }
    const MotionParams theta = sample_random_motion(5, 4.0, 0.3, 6);
    const MotionGradient mg = backward_motion(gp, geom, theta);
    auto scalar = [&](int i, double a, double tx, double ty) {
        const ProjectionMatrix q = apply_rigid_motion(geom.matrices[i], a, tx, ty);
        double s = 0.0;
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) {
                s += gp.blocks[i][r][c] * q(r, c);
            }
        }
        return s;
    };
    for (int i = 0; i < 5; ++i) {
        const double a = theta.alpha[i], tx = theta.tx[i], ty = theta.ty[i];
        const double h = 1e-6;
        const double na = (scalar(i, a + h, tx, ty) - scalar(i, a - h, tx, ty)) / (2 * h);
        const double nx = (scalar(i, a, tx + h, ty) - scalar(i, a, tx - h, ty)) / (2 * h);
        const double ny = (scalar(i, a, tx, ty + h) - scalar(i, a, tx, ty - h)) / (2 * h);
        EXPECT_NEAR(mg.d_alpha[i], na, 1e-6 * std::max(1.0, std::abs(na)));
        EXPECT_NEAR(mg.d_tx[i], nx, 1e-6 * std::max(1.0, std::abs(nx)));
        EXPECT_NEAR(mg.d_ty[i], ny, 1e-6 * std::max(1.0, std::abs(ny)));
    }
    EXPECT_THROW(backward_motion(gp, geom, MotionParams::zeros(4)), ShapeMismatch);
}

namespace {

// Largest |analytic - numeric| per entry, relative to the largest |numeric|
// of that entry over all views.
std::array<double, 6> curve_errors(const GradcheckReport& r, int n_views) {
    std::array<double, 6> out{};
    for (int e = 0; e < 6; ++e) {
        double amp = 0.0, err = 0.0;
        for (int j = 0; j < n_views; ++j) {
            const auto& x = r.entries[static_cast<std::size_t>(j) * 6 + e];
            amp = std::max(amp, std::abs(x.numeric));
            err = std::max(err, std::abs(x.analytic - x.numeric));
        }
        out[e] = err / amp;
    }
    return out;
}

Sinogram smooth_rows(int views, int n_det, double period) {
    Sinogram f(views, n_det, 2.0, SinogramKind::filtered);
    for (int i = 0; i < views; ++i) {
        for (int m = 0; m < n_det; ++m) {
            f.at(i, m) = std::sin(2 * std::numbers::pi * m / period + i) +
                         0.5 * std::cos(2 * std::numbers::pi * m / (1.7 * period) - 0.3 * i);
        }
    }
    return f;
}

} // namespace

// The analytic path differentiates the rows before interpolating, so it only
// approaches the finite-difference slope of the interpolant as rows get smooth.
TEST(Gradcheck, ConvergesOnSmoothDetectorRows) {
    const int views = 16, n_det = 256;
    const Geometry geom = make_circular_geometry(views, 1000, 2000, n_det, 2.0);
    const ImageGrid grid = ImageGrid::centered(64, 64, 2.0);
    Image ref(grid);
    for (std::size_t k = 0; k < ref.data.size(); ++k) {
        ref.data[k] = std::sin(0.37 * static_cast<double>(k));
    }
    const ImageObjective mse_obj = [&](const Image& img) { return mse_loss(img, ref); };
    for (const ImageObjective& obj : {ImageObjective(mean_intensity_loss), mse_obj}) {
        const auto coarse = curve_errors(gradcheck(obj, geom, smooth_rows(views, n_det, 80), grid), views);
        const auto fine = curve_errors(gradcheck(obj, geom, smooth_rows(views, n_det, 160), grid), views);
        for (int e = 0; e < 6; ++e) {
            EXPECT_LT(fine[e], 2e-3) << "entry " << e;
            EXPECT_LT(fine[e], coarse[e] / 2.0) << "entry " << e;
        }
    }
}

TEST(Gradcheck, ConstantLossHasZeroGradients) {
    const Scene s = small_scene(24, 12, 96);
    const ImageObjective constant = [](const Image& img) {
        return LossValueGrad{1.0, Image(img.grid)};
    };
    const GradcheckReport r = gradcheck(constant, s.geom, s.filtered, s.grid);
    for (const auto& e : r.entries) {
        EXPECT_EQ(e.analytic, 0.0);
        EXPECT_EQ(e.numeric, 0.0);
    }
}

TEST(Gradcheck, HalvingStepIsConsistent) {
    // Forward differences with step h and h/2 differ by O(h); the change is
    // small against the gradient itself.
    const Scene s = small_scene(32, 16, 128);
    const auto r1 = gradcheck(mean_intensity_loss, s.geom, s.filtered, s.grid);
    auto half = kDefaultGradcheckSteps;
    for (double& h : half) {
        h *= 0.5;
    }
    const auto r2 = gradcheck(mean_intensity_loss, s.geom, s.filtered, s.grid, half);
    for (std::size_t k = 0; k < r1.entries.size(); ++k) {
        const auto& a = r1.entries[k];
        const auto& b = r2.entries[k];
        const double mag = std::max(std::abs(a.analytic), 1e-12);
        EXPECT_LT(std::abs(a.numeric - b.numeric) / mag, 1e-3) << "entry " << k;
    }
}

TEST(Gradcheck, RejectsNonPositiveSteps) {
    const Scene s = small_scene(16, 8, 64);
    auto h = kDefaultGradcheckSteps;
    h[2] = 0.0;
    EXPECT_THROW(gradcheck(mean_intensity_loss, s.geom, s.filtered, s.grid, h), InvalidParameter);
}

TEST(Gradcheck, RelativeErrorDefinition) {
    EXPECT_NEAR(gradcheck_relative_error(1.0, 1.001), 0.001 / 1.001, 1e-15);
    EXPECT_DOUBLE_EQ(gradcheck_relative_error(1e-14, -1e-14), 2e-14);
    EXPECT_EQ(gradcheck_relative_error(0.0, 0.0), 0.0);
}
