#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ctgeo/diffgeo.hpp"
#include "ctgeo/geometry.hpp"
#include "ctgeo/image.hpp"
#include "ctgeo/motioncomp.hpp"
#include "ctgeo/projector.hpp"

namespace ctgeo::io {

inline constexpr const char* kSchemaVersion = "1";

/// Sidecar path for a raw payload: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/**
 * Images and sinograms are stored as raw little-endian float32, row-major
 * (view-major for sinograms), next to a JSON sidecar:
 *   image:    {"schema_version", "nx", "ny", "spacing_mm", "origin_mm": [ox, oy]}
 *   sinogram: {"schema_version", "n_views", "n_det", "det_spacing_mm", "kind"}
 * Values are rounded to float32 on write; a read-write cycle reproduces the
 * files byte for byte.
 */
void write_image(const Image& img, const std::filesystem::path& payload);
Image read_image(const std::filesystem::path& payload);

void write_sinogram(const Sinogram& sino, const std::filesystem::path& payload);
Sinogram read_sinogram(const std::filesystem::path& payload);

/// {"schema_version", "n_det", "det_spacing_mm", "matrices": [[[..3],[..3]], ...]}
void write_geometry(const Geometry& geom, const std::filesystem::path& path);
Geometry read_geometry(const std::filesystem::path& path);

/// CSV with header "view,alpha_rad,tx_mm,ty_mm", one row per view.
void write_motion(const MotionParams& motion, const std::filesystem::path& path);
MotionParams read_motion(const std::filesystem::path& path);

/// 8-bit grayscale PNG, values clamped to [lo, hi] and mapped linearly.
/// The top PNG row is the largest y. Throws InvalidParameter unless lo < hi.
void export_png(const Image& img, double lo, double hi, const std::filesystem::path& path);

/// "view,entry_row,entry_col,analytic,numeric,h,rel_err"
void write_gradcheck_csv(const GradcheckReport& report, const std::filesystem::path& path);

/// 2x3 panel plot (one panel per matrix entry) of analytic vs numeric
/// gradients over views.
void write_gradcheck_svg(const GradcheckReport& report, const std::filesystem::path& path);

/// "iter,loss[,ssim,mse][,rpe]"; metric columns appear when the trace has them.
void write_trace_csv(const CompensationTrace& trace, const std::filesystem::path& path);

/// Evaluation metrics keyed by name (ssim, mse, rpe).
using MetricSet = std::map<std::string, double>;

/// "slice,metric,value" rows plus a JSON object with exactly the metric keys.
void write_metrics_csv(const MetricSet& metrics, const std::filesystem::path& path,
                       int slice = 0);
void write_metrics_json(const MetricSet& metrics, const std::filesystem::path& path);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

} // namespace ctgeo::io
