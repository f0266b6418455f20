#include <benchmark/benchmark.h>

#include "ctgeo/diffgeo.hpp"
#include "ctgeo/motioncomp.hpp"
#include "ctgeo/phantom.hpp"
#include "ctgeo/projector.hpp"
#include "ctgeo/quality.hpp"

using namespace ctgeo;

namespace {

// Square image of side n at 1 mm, 1024 x 2 mm detector, SID 1000, SDD 2000.
struct Scene {
    ImageGrid grid;
    Image phantom;
    Geometry geom;
    Sinogram raw;
    Sinogram filtered;

    Scene(int n, int views)
        : grid(ImageGrid::centered(n, n, 1.0)), phantom(shepp_logan(grid, 0.5 * n, true)),
          geom(make_circular_geometry(views, 1000, 2000, 1024, 2.0)), raw(forward_project(phantom, geom)),
          filtered(ramp_filter(raw, geom)) {}
};

const Scene& scene(int n, int views) {
    static Scene cached(n, views);
    if (cached.grid.nx != n || static_cast<int>(cached.geom.n_views()) != views) {
        cached = Scene(n, views);
    }
    return cached;
}

void set_items(benchmark::State& state, const Scene& s) {
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.geom.n_views()) *
                            static_cast<std::int64_t>(s.grid.size()));
}

} // namespace

static void BM_ForwardProject(benchmark::State& state) {
    const Scene& s = scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_project(s.phantom, s.geom));
    }
}
BENCHMARK(BM_ForwardProject)->Args({256, 360})->Unit(benchmark::kMillisecond);

static void BM_RampFilter(benchmark::State& state) {
    const Scene& s = scene(256, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ramp_filter(s.raw, s.geom));
    }
}
BENCHMARK(BM_RampFilter)->Arg(360)->Unit(benchmark::kMillisecond);

static void BM_Backproject(benchmark::State& state) {
    const Scene& s = scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(backproject(s.filtered, s.geom, s.grid));
    }
    set_items(state, s);
}
BENCHMARK(BM_Backproject)->Args({128, 360})->Args({256, 360})->Unit(benchmark::kMillisecond);

static void BM_BackprojectWithTape(benchmark::State& state) {
    const Scene& s = scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    TapedReconstruction rec;
    for (auto _ : state) {
        backproject_with_tape(s.filtered, s.geom, s.grid, rec);
        benchmark::DoNotOptimize(rec.image.data.data());
    }
    set_items(state, s);
}
BENCHMARK(BM_BackprojectWithTape)->Args({256, 360})->Unit(benchmark::kMillisecond);

static void BM_BackwardGeometry(benchmark::State& state) {
    const Scene& s = scene(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const TapedReconstruction rec = backproject_with_tape(s.filtered, s.geom, s.grid);
    const Sinogram dstar = detector_derivative(s.filtered);
    const LossValueGrad lg = mse_loss(rec.image, s.phantom);
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward_geometry(lg.grad, rec.positions, dstar, s.geom, s.grid));
    }
    set_items(state, s);
}
BENCHMARK(BM_BackwardGeometry)->Args({256, 360})->Unit(benchmark::kMillisecond);

static void BM_CompensationIteration(benchmark::State& state) {
    const Scene& s = scene(256, 360);
    const ImageObjective obj = [&s](const Image& img) { return mse_loss(img, s.phantom); };
    const MotionParams theta = MotionParams::zeros(360);
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_motion(s.filtered, s.geom, s.grid, theta, obj));
    }
}
BENCHMARK(BM_CompensationIteration)->Unit(benchmark::kMillisecond);

static void BM_Ssim(benchmark::State& state) {
    const Scene& s = scene(256, 360);
    const Image rec = backproject(s.filtered, s.geom, s.grid);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ssim(rec, s.phantom));
    }
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
