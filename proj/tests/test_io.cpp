#include <gtest/gtest.h>

#include <png.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "ctgeo/errors.hpp"
#include "ctgeo/io.hpp"
#include "ctgeo/phantom.hpp"

using namespace ctgeo;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ctgeo_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

Image random_image(int nx, int ny, unsigned seed) {
    Image img(ImageGrid::centered(nx, ny, 0.75));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 3.0);
    for (double& v : img.data) {
        v = static_cast<float>(d(rng));
    }
    return img;
}

std::vector<unsigned char> read_png_gray(const fs::path& p, int& w, int& h) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, p.string().c_str())) {
        throw std::runtime_error(image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
    png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr);
    w = static_cast<int>(image.width);
    h = static_cast<int>(image.height);
    return buf;
}

} // namespace

TEST_F(IoTest, ImageRoundTripIsBitwise) {
    const Image img = random_image(13, 7, 1);
    io::write_image(img, path("a.raw"));
    const Image back = io::read_image(path("a.raw"));
    EXPECT_EQ(back.grid, img.grid);
    EXPECT_EQ(back.data, img.data);
    io::write_image(back, path("b.raw"));
    EXPECT_EQ(slurp(path("a.raw")), slurp(path("b.raw")));
    EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
    EXPECT_EQ(fs::file_size(path("a.raw")), 13u * 7u * 4u);
}

TEST_F(IoTest, PayloadIsLittleEndianFloat32) {
    Image img(ImageGrid::centered(2, 1, 1.0));
    img.data = {1.0, -2.5};
    io::write_image(img, path("e.raw"));
    const std::string bytes = slurp(path("e.raw"));
    const std::string expected("\x00\x00\x80\x3f\x00\x00\x20\xc0", 8);
    EXPECT_EQ(bytes, expected);
}

TEST_F(IoTest, SidecarCarriesSchemaVersion) {
    io::write_image(random_image(4, 4, 2), path("s.raw"));
    EXPECT_EQ(io::sidecar_path(path("s.raw")), path("s.json"));
    EXPECT_NE(slurp(path("s.json")).find("\"schema_version\": \"1\""), std::string::npos);
}

TEST_F(IoTest, SinogramRoundTrip) {
    Sinogram s(5, 9, 1.25, SinogramKind::filtered);
    for (std::size_t k = 0; k < s.data.size(); ++k) {
        s.data[k] = static_cast<float>(std::sin(0.3 * static_cast<double>(k)));
    }
    io::write_sinogram(s, path("s.raw"));
    const Sinogram back = io::read_sinogram(path("s.raw"));
    EXPECT_EQ(back.n_views, 5);
    EXPECT_EQ(back.n_det, 9);
    EXPECT_EQ(back.det_spacing, 1.25);
    EXPECT_EQ(back.kind, SinogramKind::filtered);
    EXPECT_EQ(back.data, s.data);
}

TEST_F(IoTest, TruncatedPayloadNamesByteCounts) {
    io::write_image(random_image(6, 5, 3), path("t.raw"));
    std::string bytes = slurp(path("t.raw"));
    bytes.resize(bytes.size() - 4);
    spit(path("t.raw"), bytes);
    try {
        io::read_image(path("t.raw"));
        FAIL() << "expected TruncatedPayload";
    } catch (const TruncatedPayload& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("120"), std::string::npos) << msg;
        EXPECT_NE(msg.find("116"), std::string::npos) << msg;
    }
}

TEST_F(IoTest, OversizedPayloadIsShapeMismatch) {
    io::write_image(random_image(3, 3, 4), path("o.raw"));
    spit(path("o.raw"), slurp(path("o.raw")) + std::string(4, '\0'));
    EXPECT_THROW(io::read_image(path("o.raw")), ShapeMismatch);
}

TEST_F(IoTest, UnknownSchemaVersionRejected) {
    io::write_image(random_image(3, 3, 5), path("v.raw"));
    std::string side = slurp(path("v.json"));
    side.replace(side.find("\"1\""), 3, "\"7\"");
    spit(path("v.json"), side);
    EXPECT_THROW(io::read_image(path("v.raw")), UnsupportedVersion);
}

TEST_F(IoTest, MalformedHeaders) {
    io::write_image(random_image(3, 3, 6), path("m.raw"));
    spit(path("m.json"), "{\"schema_version\": \"1\", \"nx\": 3");
    EXPECT_THROW(io::read_image(path("m.raw")), FormatError);
    spit(path("m.json"), "{\"schema_version\": \"1\", \"nx\": 3, \"ny\": 3}");
    EXPECT_THROW(io::read_image(path("m.raw")), FormatError);
    EXPECT_THROW(io::read_image(path("missing.raw")), Error);
}

TEST_F(IoTest, GeometryRoundTrip) {
    Geometry g = make_circular_geometry(7, 1000, 2000, 64, 1.5);
    g.matrices[2](0, 1) = 0.1 + 0.2;
    io::write_geometry(g, path("g.json"));
    const Geometry back = io::read_geometry(path("g.json"));
    EXPECT_EQ(back, g);
    io::write_geometry(back, path("g2.json"));
    EXPECT_EQ(slurp(path("g.json")), slurp(path("g2.json")));
}

TEST_F(IoTest, GeometryRejectsBadMatrix) {
    spit(path("g.json"),
         R"({"schema_version": "1", "n_det": 4, "det_spacing_mm": 1.0, "matrices": [[[1, 2], [0, 0, 1]]]})");
    EXPECT_THROW(io::read_geometry(path("g.json")), FormatError);
}

TEST_F(IoTest, MotionRoundTrip) {
    const MotionParams m = sample_random_motion(11, 3.0, 0.05, 9);
    io::write_motion(m, path("m.csv"));
    EXPECT_EQ(slurp(path("m.csv")).substr(0, 24), "view,alpha_rad,tx_mm,ty_");
    const MotionParams back = io::read_motion(path("m.csv"));
    EXPECT_EQ(back, m);
}

TEST_F(IoTest, MotionRejectsBadRows) {
    spit(path("m.csv"), "view,alpha_rad,tx_mm,ty_mm\n0,0.1,0.2,0.3\n2,0,0,0\n");
    EXPECT_THROW(io::read_motion(path("m.csv")), FormatError);
    spit(path("m.csv"), "view,alpha_rad,tx_mm,ty_mm\n0,abc,0.2,0.3\n");
    EXPECT_THROW(io::read_motion(path("m.csv")), FormatError);
    spit(path("m.csv"), "v,a,b,c\n");
    EXPECT_THROW(io::read_motion(path("m.csv")), FormatError);
}

TEST_F(IoTest, PngWindowEndpoints) {
    Image img(ImageGrid::centered(9, 4, 1.0));
    for (double level : {0.2, 1.7}) {
        for (double& v : img.data) {
            v = level;
        }
        io::export_png(img, 0.2, 1.7, path("p.png"));
        int w = 0, h = 0;
        const auto px = read_png_gray(path("p.png"), w, h);
        EXPECT_EQ(w, 9);
        EXPECT_EQ(h, 4);
        for (unsigned char c : px) {
            EXPECT_EQ(c, level < 1.0 ? 0 : 255);
        }
    }
    EXPECT_THROW(io::export_png(img, 1.0, 1.0, path("bad.png")), InvalidParameter);
}

TEST_F(IoTest, PngTopRowIsLargestY) {
    Image img(ImageGrid::centered(3, 2, 1.0));
    img.at(0, 1) = 1.0;
    io::export_png(img, 0.0, 1.0, path("o.png"));
    int w = 0, h = 0;
    const auto px = read_png_gray(path("o.png"), w, h);
    EXPECT_EQ(px[0], 255);
    EXPECT_EQ(px[3], 0);
}

TEST_F(IoTest, PngIsDeterministic) {
    const Image img = shepp_logan(64, 64, 1.0, true);
    io::export_png(img, 0.0, 1.0, path("a.png"));
    io::export_png(img, 0.0, 1.0, path("b.png"));
    EXPECT_EQ(slurp(path("a.png")), slurp(path("b.png")));
}

TEST_F(IoTest, TraceColumnsFollowGroundTruth) {
    CompensationTrace t;
    t.rows.push_back({0, 1.5, std::nullopt, std::nullopt, std::nullopt});
    io::write_trace_csv(t, path("t.csv"));
    EXPECT_EQ(slurp(path("t.csv")), "iter,loss\n0,1.5\n");
    t.rows[0] = {0, 1.5, 0.25, 0.125, 2.0};
    io::write_trace_csv(t, path("t.csv"));
    EXPECT_EQ(slurp(path("t.csv")), "iter,loss,ssim,mse,rpe\n0,1.5,0.25,0.125,2\n");
}

TEST_F(IoTest, MetricsReports) {
    io::MetricSet m{{"ssim", 1.0}, {"mse", 0.0}};
    io::write_metrics_json(m, path("r.json"));
    const std::string js = slurp(path("r.json"));
    EXPECT_NE(js.find("\"ssim\""), std::string::npos);
    EXPECT_NE(js.find("\"mse\""), std::string::npos);
    EXPECT_EQ(js.find("\"rpe\""), std::string::npos);
    io::write_metrics_csv(m, path("r.csv"));
    EXPECT_EQ(slurp(path("r.csv")), "slice,metric,value\n0,mse,0\n0,ssim,1\n");
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(io::format_double(0.1), "0.1");
    EXPECT_EQ(io::format_double(2.0), "2");
    EXPECT_EQ(std::stod(io::format_double(0.1 + 0.2)), 0.1 + 0.2);
}
