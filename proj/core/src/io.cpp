#include "ctgeo/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "ctgeo/errors.hpp"

namespace ctgeo::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

fs::path sidecar_path(const fs::path& payload) {
    fs::path p = payload;
    p.replace_extension(".json");
    return p;
}

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "' for reading");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json parse_json(const fs::path& path) {
    const std::string text = slurp(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError("malformed header '" + path.string() + "' at byte " +
                          std::to_string(e.byte) + ": " + e.what());
    }
}

void check_version(const json& j, const fs::path& path) {
    if (!j.is_object() || !j.contains("schema_version")) {
        throw FormatError("malformed header '" + path.string() + "': missing schema_version");
    }
    const json& v = j.at("schema_version");
    if (!v.is_string() || v.get<std::string>() != kSchemaVersion) {
        throw UnsupportedVersion("unsupported schema_version " + v.dump() + " in '" +
                                 path.string() + "' (supported: \"1\")");
    }
}

template <typename T>
T field(const json& j, const char* key, const fs::path& path) {
    if (!j.contains(key)) {
        throw FormatError("malformed header '" + path.string() + "': missing key '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError("malformed header '" + path.string() + "': bad value for '" + key +
                          "': " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

void write_f32(const std::vector<double>& values, const fs::path& path) {
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[k]));
        bytes[4 * k + 0] = static_cast<unsigned char>(bits & 0xFFu);
        bytes[4 * k + 1] = static_cast<unsigned char>((bits >> 8) & 0xFFu);
        bytes[4 * k + 2] = static_cast<unsigned char>((bits >> 16) & 0xFFu);
        bytes[4 * k + 3] = static_cast<unsigned char>((bits >> 24) & 0xFFu);
    }
    auto out = open_out(path, true);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("failed writing '" + path.string() + "'");
    }
}

std::vector<double> read_f32(const fs::path& path, std::size_t count) {
    const std::string bytes = slurp(path);
    const std::size_t expected = count * 4;
    if (bytes.size() < expected) {
        throw TruncatedPayload("truncated payload '" + path.string() + "': expected " +
                               std::to_string(expected) + " bytes, found " +
                               std::to_string(bytes.size()) + " (data ends at byte offset " +
                               std::to_string(bytes.size()) + ")");
    }
    if (bytes.size() > expected) {
        throw ShapeMismatch("payload '" + path.string() + "' has " + std::to_string(bytes.size()) +
                            " bytes but the header describes " + std::to_string(expected) +
                            " (extra data from byte offset " + std::to_string(expected) + ")");
    }
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto b = [&](int i) {
            return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * k + i]));
        };
        const std::uint32_t bits = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
        values[k] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return values;
}

} // namespace

void write_image(const Image& img, const fs::path& payload) {
    img.grid.validate();
    if (img.data.size() != img.grid.size()) {
        throw ShapeMismatch("image payload does not match its grid");
    }
    json j;
    j["schema_version"] = kSchemaVersion;
    j["nx"] = img.grid.nx;
    j["ny"] = img.grid.ny;
    j["spacing_mm"] = img.grid.spacing;
    j["origin_mm"] = {img.grid.origin_x, img.grid.origin_y};
    write_f32(img.data, payload);
    write_text(sidecar_path(payload), j.dump(2) + "\n");
}

Image read_image(const fs::path& payload) {
    const fs::path side = sidecar_path(payload);
    const json j = parse_json(side);
    check_version(j, side);
    ImageGrid g;
    g.nx = field<int>(j, "nx", side);
    g.ny = field<int>(j, "ny", side);
    g.spacing = field<double>(j, "spacing_mm", side);
    const auto origin = field<std::vector<double>>(j, "origin_mm", side);
    if (origin.size() != 2) {
        throw FormatError("malformed header '" + side.string() + "': origin_mm needs 2 values");
    }
    g.origin_x = origin[0];
    g.origin_y = origin[1];
    try {
        g.validate();
    } catch (const InvalidParameter& e) {
        throw FormatError("malformed header '" + side.string() + "': " + e.what());
    }
    Image img;
    img.grid = g;
    img.data = read_f32(payload, g.size());
    return img;
}

void write_sinogram(const Sinogram& sino, const fs::path& payload) {
    if (sino.data.size() != static_cast<std::size_t>(sino.n_views) * sino.n_det) {
        throw ShapeMismatch("sinogram payload does not match its shape");
    }
    json j;
    j["schema_version"] = kSchemaVersion;
    j["n_views"] = sino.n_views;
    j["n_det"] = sino.n_det;
    j["det_spacing_mm"] = sino.det_spacing;
    j["kind"] = sino.kind == SinogramKind::raw ? "raw" : "filtered";
    write_f32(sino.data, payload);
    write_text(sidecar_path(payload), j.dump(2) + "\n");
}

Sinogram read_sinogram(const fs::path& payload) {
    const fs::path side = sidecar_path(payload);
    const json j = parse_json(side);
    check_version(j, side);
    const int n_views = field<int>(j, "n_views", side);
    const int n_det = field<int>(j, "n_det", side);
    const double spacing = field<double>(j, "det_spacing_mm", side);
    const std::string kind = field<std::string>(j, "kind", side);
    if (n_views < 1 || n_det < 1 || !(spacing > 0.0)) {
        throw FormatError("malformed header '" + side.string() + "': invalid shape or spacing");
    }
    SinogramKind k;
    if (kind == "raw") {
        k = SinogramKind::raw;
    } else if (kind == "filtered") {
        k = SinogramKind::filtered;
    } else {
        throw FormatError("malformed header '" + side.string() + "': unknown kind '" + kind + "'");
    }
    Sinogram s(n_views, n_det, spacing, k);
    s.data = read_f32(payload, static_cast<std::size_t>(n_views) * n_det);
    return s;
}

void write_geometry(const Geometry& geom, const fs::path& path) {
    geom.validate();
    json j;
    j["schema_version"] = kSchemaVersion;
    j["n_det"] = geom.n_det;
    j["det_spacing_mm"] = geom.det_spacing;
    json mats = json::array();
    for (const auto& p : geom.matrices) {
        mats.push_back({{p(0, 0), p(0, 1), p(0, 2)}, {p(1, 0), p(1, 1), p(1, 2)}});
    }
    j["matrices"] = std::move(mats);
    write_text(path, j.dump(2) + "\n");
}

Geometry read_geometry(const fs::path& path) {
    const json j = parse_json(path);
    check_version(j, path);
    Geometry g;
    g.n_det = field<int>(j, "n_det", path);
    g.det_spacing = field<double>(j, "det_spacing_mm", path);
    const auto mats = field<std::vector<std::vector<std::vector<double>>>>(j, "matrices", path);
    g.matrices.reserve(mats.size());
    for (std::size_t i = 0; i < mats.size(); ++i) {
        const auto& m = mats[i];
        if (m.size() != 2 || m[0].size() != 3 || m[1].size() != 3) {
            throw FormatError("malformed geometry '" + path.string() + "': matrix " +
                              std::to_string(i) + " is not 2x3");
        }
        g.matrices.emplace_back(Mat2x3{{{m[0][0], m[0][1], m[0][2]}, {m[1][0], m[1][1], m[1][2]}}});
    }
    try {
        g.validate();
    } catch (const InvalidParameter& e) {
        throw FormatError("invalid geometry '" + path.string() + "': " + e.what());
    }
    return g;
}

namespace {

constexpr const char* kMotionHeader = "view,alpha_rad,tx_mm,ty_mm";

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("'" + path.string() + "' line " + std::to_string(line) +
                          ": cannot parse number '" + s + "'");
    }
    return v;
}

} // namespace

void write_motion(const MotionParams& motion, const fs::path& path) {
    motion.validate();
    std::ostringstream out;
    out << kMotionHeader << "\n";
    for (std::size_t i = 0; i < motion.n_views(); ++i) {
        out << i << "," << format_double(motion.alpha[i]) << "," << format_double(motion.tx[i])
            << "," << format_double(motion.ty[i]) << "\n";
    }
    write_text(path, out.str());
}

MotionParams read_motion(const fs::path& path) {
    std::istringstream in(slurp(path));
    std::string line;
    if (!std::getline(in, line) || line != kMotionHeader) {
        throw FormatError("'" + path.string() + "': expected header '" + kMotionHeader + "'");
    }
    MotionParams m;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 4) {
            throw FormatError("'" + path.string() + "' line " + std::to_string(lineno) +
                              ": expected 4 columns");
        }
        if (cells[0] != std::to_string(m.n_views())) {
            throw FormatError("'" + path.string() + "' line " + std::to_string(lineno) +
                              ": views must be numbered 0, 1, 2, ...");
        }
        m.alpha.push_back(parse_double(cells[1], path, lineno));
        m.tx.push_back(parse_double(cells[2], path, lineno));
        m.ty.push_back(parse_double(cells[3], path, lineno));
    }
    m.validate();
    return m;
}

void export_png(const Image& img, double lo, double hi, const fs::path& path) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw InvalidParameter("PNG window needs finite lo < hi");
    }
    const int nx = img.grid.nx;
    const int ny = img.grid.ny;
    std::vector<unsigned char> pixels(img.grid.size());
    for (int iy = 0; iy < ny; ++iy) {
        const int png_row = ny - 1 - iy;
        for (int ix = 0; ix < nx; ++ix) {
            const double t = std::clamp((img.at(ix, iy) - lo) / (hi - lo), 0.0, 1.0);
            pixels[static_cast<std::size_t>(png_row) * nx + ix] =
                static_cast<unsigned char>(std::lround(t * 255.0));
        }
    }

    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(nx), static_cast<png_uint_32>(ny), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < ny; ++r) {
        png_write_row(png, pixels.data() + static_cast<std::size_t>(r) * nx);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_gradcheck_csv(const GradcheckReport& report, const fs::path& path) {
    std::ostringstream out;
    out << "view,entry_row,entry_col,analytic,numeric,h,rel_err\n";
    for (const auto& e : report.entries) {
        out << e.view << "," << e.row << "," << e.col << "," << format_double(e.analytic) << ","
            << format_double(e.numeric) << "," << format_double(e.h) << ","
            << format_double(e.rel_err) << "\n";
    }
    write_text(path, out.str());
}

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

} // namespace

void write_gradcheck_svg(const GradcheckReport& report, const fs::path& path) {
    constexpr double panel_w = 360.0, panel_h = 240.0, margin = 40.0;
    const double width = 3 * panel_w;
    const double height = 2 * panel_h;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (int e = 0; e < 6; ++e) {
        const int r = e / 3;
        const int c = e % 3;
        std::vector<const GradcheckEntry*> pts;
        for (const auto& entry : report.entries) {
            if (entry.row == r && entry.col == c) {
                pts.push_back(&entry);
            }
        }
        const double x0 = c * panel_w + margin;
        const double y0 = r * panel_h + margin;
        const double w = panel_w - 1.5 * margin;
        const double h = panel_h - 2.0 * margin;

        double lo = 0.0, hi = 0.0, h_step = 0.0;
        for (const auto* p : pts) {
            lo = std::min({lo, p->analytic, p->numeric});
            hi = std::max({hi, p->analytic, p->numeric});
            h_step = p->h;
        }
        if (!(hi > lo)) {
            hi = lo + 1.0;
        }
        const double n = std::max<double>(1.0, static_cast<double>(pts.size()) - 1.0);
        auto px = [&](std::size_t k) { return x0 + w * static_cast<double>(k) / n; };
        auto py = [&](double v) { return y0 + h * (hi - v) / (hi - lo); };

        svg << "<g>\n";
        svg << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(y0) << "\" width=\"" << fixed(w)
            << "\" height=\"" << fixed(h) << "\" fill=\"none\" stroke=\"#888\"/>\n";
        svg << "<text x=\"" << fixed(x0) << "\" y=\"" << fixed(y0 - 8.0) << "\">entry (" << r
            << "," << c << "), h = " << sci(h_step) << "</text>\n";
        svg << "<text x=\"" << fixed(x0 - 4.0) << "\" y=\"" << fixed(y0 + 4.0)
            << "\" text-anchor=\"end\" font-size=\"9\">" << sci(hi) << "</text>\n";
        svg << "<text x=\"" << fixed(x0 - 4.0) << "\" y=\"" << fixed(y0 + h)
            << "\" text-anchor=\"end\" font-size=\"9\">" << sci(lo) << "</text>\n";
        for (int series = 0; series < 2; ++series) {
            svg << "<polyline fill=\"none\" stroke=\"" << (series == 0 ? "#1f77b4" : "#ff7f0e")
                << "\" stroke-width=\"1.2\"" << (series == 1 ? " stroke-dasharray=\"4 3\"" : "")
                << " points=\"";
            for (std::size_t k = 0; k < pts.size(); ++k) {
                const double v = series == 0 ? pts[k]->analytic : pts[k]->numeric;
                svg << fixed(px(k)) << "," << fixed(py(v)) << " ";
            }
            svg << "\"/>\n";
        }
        svg << "</g>\n";
    }
    svg << "<text x=\"10\" y=\"" << fixed(height - 8.0)
        << "\">solid: analytic, dashed: forward difference; x axis: view index</text>\n";
    svg << "</svg>\n";
    write_text(path, svg.str());
}

void write_trace_csv(const CompensationTrace& trace, const fs::path& path) {
    const bool has_img = !trace.rows.empty() && trace.rows.front().ssim.has_value();
    const bool has_rpe = !trace.rows.empty() && trace.rows.front().rpe.has_value();
    std::ostringstream out;
    out << "iter,loss";
    if (has_img) {
        out << ",ssim,mse";
    }
    if (has_rpe) {
        out << ",rpe";
    }
    out << "\n";
    for (const auto& row : trace.rows) {
        out << row.iter << "," << format_double(row.loss);
        if (has_img) {
            out << "," << format_double(row.ssim.value_or(NAN)) << ","
                << format_double(row.mse.value_or(NAN));
        }
        if (has_rpe) {
            out << "," << format_double(row.rpe.value_or(NAN));
        }
        out << "\n";
    }
    write_text(path, out.str());
}

void write_metrics_csv(const MetricSet& metrics, const fs::path& path, int slice) {
    std::ostringstream out;
    out << "slice,metric,value\n";
    for (const auto& [name, value] : metrics) {
        out << slice << "," << name << "," << format_double(value) << "\n";
    }
    write_text(path, out.str());
}

void write_metrics_json(const MetricSet& metrics, const fs::path& path) {
    json j = json::object();
    for (const auto& [name, value] : metrics) {
        j[name] = value;
    }
    write_text(path, j.dump(2) + "\n");
}

} // namespace ctgeo::io
