#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctgeo/diffgeo.hpp"
#include "ctgeo/errors.hpp"
#include "ctgeo/io.hpp"
#include "ctgeo/motioncomp.hpp"
#include "ctgeo/parallel.hpp"
#include "ctgeo/phantom.hpp"
#include "ctgeo/projector.hpp"
#include "ctgeo/quality.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ctgeo;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kMaxCount = 1 << 20;

struct GridFlags {
    int nx = 512;
    int ny = 512;
    double spacing = 1.0;

    void add(CLI::App* cmd) {
        cmd->add_option("--nx", nx, "Image columns")->capture_default_str()->check(CLI::Range(1, kMaxCount));
        cmd->add_option("--ny", ny, "Image rows")->capture_default_str()->check(CLI::Range(1, kMaxCount));
        cmd->add_option("--spacing", spacing, "Pixel spacing in mm")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    }
    ImageGrid grid() const { return ImageGrid::centered(nx, ny, spacing); }
    json to_json() const { return {{"nx", nx}, {"ny", ny}, {"spacing_mm", spacing}}; }
};

// Collects what a command read and wrote, then drops manifest.json next to
// the outputs.
class Manifest {
  public:
    Manifest(std::string command, fs::path out_dir)
        : command_(std::move(command)), out_dir_(std::move(out_dir)),
          start_(std::chrono::steady_clock::now()) {
        fs::create_directories(out_dir_);
    }

    json config;
    std::optional<std::uint64_t> seed;

    void input(const fs::path& p) { inputs_.push_back(p.string()); }
    fs::path output(const std::string& name) {
        outputs_.push_back((out_dir_ / name).string());
        return out_dir_ / name;
    }
    // Raw payloads come with a sidecar.
    fs::path payload(const std::string& name) {
        const fs::path p = output(name);
        outputs_.push_back(io::sidecar_path(p).string());
        return p;
    }

    void write() const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json j;
        j["schema_version"] = io::kSchemaVersion;
        j["command"] = command_;
        j["tool_version"] = CTGEO_VERSION;
        j["config"] = config;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["threads"] = num_threads();
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["wall_time_s"] = wall;
        std::ofstream out(out_dir_ / "manifest.json");
        out << j.dump(2) << '\n';
        if (!out) {
            throw Error("failed writing manifest in '" + out_dir_.string() + "'");
        }
    }

  private:
    std::string command_;
    fs::path out_dir_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) {
        throw Error("no such file: '" + p.string() + "'");
    }
}

Image load_image(Manifest& m, const fs::path& p) {
    require_file(p);
    m.input(p);
    return io::read_image(p);
}

Sinogram load_sinogram(Manifest& m, const fs::path& p) {
    require_file(p);
    m.input(p);
    return io::read_sinogram(p);
}

Geometry load_geometry(Manifest& m, const fs::path& p) {
    require_file(p);
    m.input(p);
    return io::read_geometry(p);
}

// "r0c0=1e-4,r1c2=0.5" overrides of the per-entry gradient-check steps.
std::array<double, 6> parse_steps(const std::string& spec) {
    std::array<double, 6> h = kDefaultGradcheckSteps;
    if (spec.empty()) {
        return h;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        int r = -1, c = -1;
        if (eq != 4 || std::sscanf(item.c_str(), "r%1dc%1d", &r, &c) != 2 || r < 0 || r > 1 ||
            c < 0 || c > 2) {
            throw CLI::ValidationError("--h", "expected rRcC=value, got '" + item + "'");
        }
        double v = 0.0;
        try {
            v = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--h", "bad step in '" + item + "'");
        }
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw CLI::ValidationError("--h", "steps must be positive, got '" + item + "'");
        }
        h[static_cast<std::size_t>(r * 3 + c)] = v;
    }
    return h;
}

struct Window {
    double lo = 0.0;
    double hi = 1.0;
    void add(CLI::App* cmd) {
        cmd->add_option("--window-lo", lo, "PNG gray value mapped to black")->capture_default_str();
        cmd->add_option("--window-hi", hi, "PNG gray value mapped to white")->capture_default_str();
    }
};

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
    GridFlags grid;
    int views = 360;
    double sid = 1000.0;
    double sdd = 2000.0;
    int ndet = 1024;
    double det_spacing = 2.0;
    std::uint64_t seed = 0;
    bool standard = false;
    Window window;
    fs::path out_dir = "ctgeo_out";
};

void run_simulate(const SimulateArgs& a) {
    Manifest m("simulate", a.out_dir);
    m.seed = a.seed;
    m.config = {{"grid", a.grid.to_json()}, {"views", a.views},        {"sid_mm", a.sid},
                {"sdd_mm", a.sdd},          {"n_det", a.ndet},         {"det_spacing_mm", a.det_spacing},
                {"phantom", a.standard ? "shepp_logan" : "shepp_logan_modified"}};
    const ImageGrid grid = a.grid.grid();
    const double half_width = 0.5 * std::min(grid.nx, grid.ny) * grid.spacing;
    const Image phantom = shepp_logan(grid, half_width, !a.standard);
    const Geometry geom = make_circular_geometry(a.views, a.sid, a.sdd, a.ndet, a.det_spacing);
    const Sinogram sino = forward_project(phantom, geom);
    io::write_image(phantom, m.payload("phantom.raw"));
    io::export_png(phantom, a.window.lo, a.window.hi, m.output("phantom.png"));
    io::write_geometry(geom, m.output("geometry.json"));
    io::write_sinogram(sino, m.payload("sinogram.raw"));
    m.write();
}

// ---- perturb ----------------------------------------------------------------

struct PerturbArgs {
    fs::path geometry;
    double max_trans_mm = 3.0;
    double max_rot_deg = 2.865;
    std::uint64_t seed = 0;
    fs::path out_dir = "ctgeo_out";
};

void run_perturb(const PerturbArgs& a) {
    Manifest m("perturb", a.out_dir);
    m.seed = a.seed;
    m.config = {{"max_trans_mm", a.max_trans_mm}, {"max_rot_deg", a.max_rot_deg}};
    const Geometry geom = load_geometry(m, a.geometry);
    const MotionParams motion = sample_random_motion(static_cast<int>(geom.n_views()), a.max_trans_mm,
                                                     a.max_rot_deg * std::numbers::pi / 180.0, a.seed);
    io::write_geometry(apply_motion(geom, motion), m.output("geometry_perturbed.json"));
    io::write_motion(motion, m.output("motion.csv"));
    io::write_motion(invert(motion), m.output("motion_annihilating.csv"));
    m.write();
}

// ---- gradcheck --------------------------------------------------------------

struct GradcheckArgs {
    fs::path sinogram;
    fs::path geometry;
    std::string loss = "mean";
    fs::path reference;
    GridFlags grid;
    std::string h;
    double tol = 1e-3;
    bool plot = false;
    fs::path out_dir = "ctgeo_out";
};

int run_gradcheck(const GradcheckArgs& a) {
    Manifest m("gradcheck", a.out_dir);
    const auto steps = parse_steps(a.h);
    m.config = {{"loss", a.loss},         {"grid", a.grid.to_json()}, {"h", steps},
                {"tol", a.tol},           {"plot", a.plot}};
    const Geometry geom = load_geometry(m, a.geometry);
    const Sinogram sino = load_sinogram(m, a.sinogram);
    const Sinogram filtered = sino.kind == SinogramKind::filtered ? sino : ramp_filter(sino, geom);
    const ImageGrid grid = a.grid.grid();

    ImageObjective obj;
    if (a.loss == "mean") {
        obj = mean_intensity_loss;
    } else if (a.loss == "mse") {
        if (a.reference.empty()) {
            throw CLI::ValidationError("--reference", "required by --loss mse");
        }
        const Image ref = load_image(m, a.reference);
        ref.require_same_grid(Image(grid));
        obj = [ref](const Image& img) { return mse_loss(img, ref); };
    } else {
        const AutofocusMetric metric = parse_autofocus_metric(a.loss);
        AutofocusOptions opts;
        if (metric == AutofocusMetric::entropy) {
            const Image base = backproject(filtered, geom, grid);
            const auto [mn, mx] = std::minmax_element(base.data.begin(), base.data.end());
            opts.hist_lo = *mn;
            opts.hist_hi = *mx;
        }
        obj = [metric, opts](const Image& img) { return autofocus_loss(img, metric, opts); };
    }

    const GradcheckReport r = gradcheck(obj, geom, filtered, grid, steps);
    io::write_gradcheck_csv(r, m.output("gradcheck.csv"));
    if (a.plot) {
        io::write_gradcheck_svg(r, m.output("gradcheck.svg"));
    }
    json summary;
    summary["loss_value"] = r.loss;
    summary["tol"] = a.tol;
    summary["max_rel_err"] = r.max_rel_err;
    summary["mean_rel_err"] = r.mean_rel_err;
    summary["pass"] = r.worst() < a.tol;
    {
        std::ofstream out(m.output("gradcheck_summary.json"));
        out << summary.dump(2) << '\n';
    }
    m.write();

    for (int e = 0; e < 6; ++e) {
        std::cout << "r" << e / 3 << "c" << e % 3 << " max_rel_err " << io::format_double(r.max_rel_err[e])
                  << " mean_rel_err " << io::format_double(r.mean_rel_err[e]) << '\n';
    }
    if (!(r.worst() < a.tol)) {
        std::cerr << "gradcheck: worst relative error " << io::format_double(r.worst())
                  << " is not below --tol " << io::format_double(a.tol) << '\n';
        return kExitRuntime;
    }
    return 0;
}

// ---- compensate -------------------------------------------------------------

struct CompensateArgs {
    fs::path sinogram;
    fs::path geometry;
    std::string objective = "tv";
    int iters = 500;
    double lr_rot = 0.1;
    double lr_trans = 100.0;
    fs::path gt_geometry;
    fs::path gt_image;
    int log_every = 0;
    GridFlags grid;
    Window window;
    fs::path out_dir = "ctgeo_out";
};

void run_compensate(const CompensateArgs& a) {
    Manifest m("compensate", a.out_dir);
    m.config = {{"objective", a.objective}, {"iters", a.iters},         {"lr_rot", a.lr_rot},
                {"lr_trans", a.lr_trans},   {"log_every", a.log_every}, {"grid", a.grid.to_json()}};
    const Sinogram raw = load_sinogram(m, a.sinogram);
    if (raw.kind != SinogramKind::raw) {
        throw InvalidParameter("compensate expects a raw (unfiltered) sinogram");
    }
    const Geometry geom = load_geometry(m, a.geometry);
    const ImageGrid grid = a.grid.grid();

    CompensationConfig cfg;
    cfg.iterations = a.iters;
    cfg.lr_rot = a.lr_rot;
    cfg.lr_trans = a.lr_trans;
    cfg.log_every = a.log_every;
    std::optional<Image> reference;
    if (a.objective.starts_with("mse:")) {
        cfg.objective = ObjectiveKind::mse_to_reference;
        reference = load_image(m, a.objective.substr(4));
    } else if (a.objective == "mse") {
        throw CLI::ValidationError("--objective", "use mse:PATH to name the reference image");
    } else {
        cfg.objective = ObjectiveKind::autofocus;
        cfg.metric = parse_autofocus_metric(a.objective);
    }
    GroundTruth truth;
    if (!a.gt_geometry.empty()) {
        truth.geometry = load_geometry(m, a.gt_geometry);
    }
    if (!a.gt_image.empty()) {
        truth.image = load_image(m, a.gt_image);
    }

    const auto progress = [](const TraceRow& r) {
        std::cerr << "iter " << r.iter << " loss " << io::format_double(r.loss);
        if (r.ssim) {
            std::cerr << " ssim " << io::format_double(*r.ssim);
        }
        if (r.rpe) {
            std::cerr << " rpe " << io::format_double(*r.rpe);
        }
        std::cerr << '\n';
    };
    const CompensationResult res = compensate(raw, geom, grid, cfg, reference, truth, progress);

    io::write_image(res.image, m.payload("compensated.raw"));
    io::export_png(res.image, a.window.lo, a.window.hi, m.output("compensated.png"));
    io::write_motion(res.params, m.output("motion_recovered.csv"));
    io::write_geometry(apply_motion(geom, res.params), m.output("geometry_compensated.json"));
    io::write_trace_csv(res.trace, m.output("trace.csv"));
    m.write();
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
    fs::path image;
    fs::path reference;
    fs::path geometry;
    fs::path gt_geometry;
    int slice = 0;
    fs::path out_dir = "ctgeo_out";
};

void run_evaluate(const EvaluateArgs& a) {
    Manifest m("evaluate", a.out_dir);
    m.config = {{"slice", a.slice}};
    const Image img = load_image(m, a.image);
    const Image ref = load_image(m, a.reference);
    io::MetricSet metrics{{"ssim", ssim(img, ref)}, {"mse", mse(img, ref)}};
    if (a.geometry.empty() != a.gt_geometry.empty()) {
        throw CLI::ValidationError("--geometry", "RPE needs both --geometry and --gt-geometry");
    }
    if (!a.geometry.empty()) {
        const Geometry est = load_geometry(m, a.geometry);
        const Geometry gt = load_geometry(m, a.gt_geometry);
        metrics["rpe"] = rpe(est, gt, default_probe_points(img.grid));
    }
    io::write_metrics_json(metrics, m.output("metrics.json"));
    io::write_metrics_csv(metrics, m.output("metrics.csv"), a.slice);
    m.write();
    for (const auto& [k, v] : metrics) {
        std::cout << k << ' ' << io::format_double(v) << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable fan-beam reconstruction and rigid motion compensation"};
    app.set_version_flag("--version", std::string("ctgeo ") + CTGEO_VERSION);
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Phantom, circular geometry and raw sinogram");
    sim.grid.add(c_sim);
    c_sim->add_option("--views", sim.views, "Projections over 360 degrees")
        ->capture_default_str()
        ->check(CLI::Range(1, kMaxCount));
    c_sim->add_option("--sid", sim.sid, "Source to isocenter distance, mm")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--sdd", sim.sdd, "Source to detector distance, mm")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--ndet", sim.ndet, "Detector elements")
        ->capture_default_str()
        ->check(CLI::Range(2, kMaxCount));
    c_sim->add_option("--det-spacing", sim.det_spacing, "Detector element pitch, mm")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--seed", sim.seed, "Recorded in the manifest; the phantom is deterministic")
        ->capture_default_str();
    c_sim->add_flag("--standard", sim.standard, "Original contrast instead of the enhanced variant");
    sim.window.add(c_sim);
    c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

    PerturbArgs per;
    auto* c_per = app.add_subcommand("perturb", "Corrupt a geometry with random per-view rigid motion");
    c_per->add_option("--geometry", per.geometry, "Geometry JSON")->required();
    c_per->add_option("--max-trans-mm", per.max_trans_mm, "Translation range width, mm (uniform, centered)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    c_per->add_option("--max-rot-deg", per.max_rot_deg, "Rotation range width, degrees (uniform, centered)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    c_per->add_option("--seed", per.seed, "Motion sampling seed")->capture_default_str();
    c_per->add_option("--out-dir", per.out_dir, "Output directory")->capture_default_str();

    GradcheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Analytic vs finite-difference projection-matrix gradients");
    c_gc->add_option("--sinogram", gc.sinogram, "Raw or filtered sinogram payload")->required();
    c_gc->add_option("--geometry", gc.geometry, "Geometry JSON")->required();
    c_gc->add_option("--loss", gc.loss, "Image loss")
        ->capture_default_str()
        ->check(CLI::IsMember({"mean", "mse", "tv", "entropy", "gradvar"}));
    c_gc->add_option("--reference", gc.reference, "Reference image for --loss mse");
    gc.grid.add(c_gc);
    c_gc->set_help_flag("--help", "Print this help message and exit");
    c_gc->add_option("--h", gc.h, "Per-entry forward-difference steps, e.g. r0c0=1e-4,r1c2=1e-5");
    c_gc->add_option("--tol", gc.tol, "Pass threshold on the relative error")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    c_gc->add_flag("--plot", gc.plot, "Also write a 2x3 panel SVG");
    c_gc->add_option("--out-dir", gc.out_dir, "Output directory")->capture_default_str();

    CompensateArgs cp;
    auto* c_cp = app.add_subcommand("compensate", "Gradient-descent rigid motion compensation");
    c_cp->add_option("--sinogram", cp.sinogram, "Raw sinogram payload")->required();
    c_cp->add_option("--geometry", cp.geometry, "Motion-corrupted geometry JSON")->required();
    c_cp->add_option("--objective", cp.objective, "mse:REF_IMAGE, tv, entropy or gradvar")
        ->capture_default_str();
    c_cp->add_option("--iters", cp.iters, "Iterations")->capture_default_str()->check(CLI::Range(1, 1 << 30));
    c_cp->add_option("--lr-rot", cp.lr_rot, "Step size for rotations (radians per gradient unit)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    c_cp->add_option("--lr-trans", cp.lr_trans, "Step size for translations (mm per gradient unit)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    c_cp->add_option("--gt-geometry", cp.gt_geometry, "True geometry; adds an rpe trace column");
    c_cp->add_option("--gt-image", cp.gt_image, "Ground-truth image; adds ssim and mse trace columns");
    c_cp->add_option("--log-every", cp.log_every, "Progress line every N iterations (0 = quiet)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cp.grid.add(c_cp);
    cp.window.add(c_cp);
    c_cp->add_option("--out-dir", cp.out_dir, "Output directory")->capture_default_str();

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "SSIM, MSE and optional RPE report");
    c_ev->add_option("--image", ev.image, "Image to score")->required();
    c_ev->add_option("--reference", ev.reference, "Reference image")->required();
    c_ev->add_option("--geometry", ev.geometry, "Estimated geometry (for RPE)");
    c_ev->add_option("--gt-geometry", ev.gt_geometry, "True geometry (for RPE)");
    c_ev->add_option("--slice", ev.slice, "Slice index written to the CSV")->capture_default_str();
    c_ev->add_option("--out-dir", ev.out_dir, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (threads > 0) {
            set_num_threads(threads);
        }
        if (*c_sim) {
            run_simulate(sim);
        } else if (*c_per) {
            run_perturb(per);
        } else if (*c_gc) {
            return run_gradcheck(gc);
        } else if (*c_cp) {
            run_compensate(cp);
        } else if (*c_ev) {
            run_evaluate(ev);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "ctgeo: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
