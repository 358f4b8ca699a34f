#include <doctest.h>

#include <cstdio>
#include <png.h>

#include "helpers.hpp"
#include "ptychodr/datasets.hpp"

using namespace ptychodr;

namespace {

void write_test_png(const std::string& path, int rows, int cols) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    REQUIRE(setjmp(png_jmpbuf(png)) == 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c)
            row[static_cast<std::size_t>(c)] = static_cast<unsigned char>((r * cols + c) % 256);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

TEST_CASE("rpp is reproducible per seed and has uniform phases") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::rpp;
    spec.n = 256;
    spec.seed = 7;
    const ObjectImage a = generate(spec);
    const ObjectImage b = generate(spec);
    CHECK((a.grid - b.grid).norm() == 0.0);

    // chi-square over 16 bins of the phases at nonzero pixels; 30.578 is the
    // 99th percentile at 15 degrees of freedom
    std::vector<int> bins(16, 0);
    int count = 0;
    for (Eigen::Index i = 0; i < a.grid.size(); ++i) {
        if (std::abs(a.grid.data()[i]) > 0.0) {
            double phase = std::arg(a.grid.data()[i]);
            if (phase < 0.0) phase += 2.0 * M_PI;
            const int bin = std::min(15, static_cast<int>(phase / (2.0 * M_PI) * 16.0));
            ++bins[static_cast<std::size_t>(bin)];
            ++count;
        }
    }
    const double expected = static_cast<double>(count) / 16.0;
    double chi2 = 0.0;
    for (int v : bins) chi2 += (v - expected) * (v - expected) / expected;
    CHECK(chi2 < 30.578);
}

TEST_CASE("shepp-logan has dark margins and an interior signal") {
    const RealGrid p = shepp_logan(64);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.maxCoeff() <= 1.0);
    CHECK(p.maxCoeff() > 0.5);
    for (int i = 0; i < 64; ++i) {
        CHECK(p(0, i) == 0.0);
        CHECK(p(63, i) == 0.0);
        CHECK(p(i, 0) == 0.0);
        CHECK(p(i, 63) == 0.0);
    }
    CHECK(p(32, 32) > 0.0);
}

TEST_CASE("salted rpp has the right salt fraction") {
    int total_salt = 0;
    const int n = 64;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        PhantomSpec spec;
        spec.kind = PhantomSpec::Kind::salted_rpp;
        spec.n = n;
        spec.seed = static_cast<std::uint64_t>(s);
        const ObjectImage img = generate(spec);
        const Complex salt = spec.salt_value * Complex(1.0, 1.0);
        for (Eigen::Index i = 0; i < img.grid.size(); ++i)
            if (img.grid.data()[i] == salt) ++total_salt;
    }
    const double p = 0.02;
    const double mean = p * n * n * seeds;
    const double sigma = std::sqrt(n * n * seeds * p * (1.0 - p));
    CHECK(std::abs(total_salt - mean) <= 3.0 * sigma);
}

TEST_CASE("synthetic complex image respects the phase range") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::cib_synthetic;
    spec.n = 64;
    const ObjectImage img = generate(spec);
    double max_phase = 0.0;
    double max_mag = 0.0;
    for (Eigen::Index i = 0; i < img.grid.size(); ++i) {
        if (std::abs(img.grid.data()[i]) > 0.0)
            max_phase = std::max(max_phase, std::arg(img.grid.data()[i]));
        max_mag = std::max(max_mag, std::abs(img.grid.data()[i]));
    }
    CHECK(max_phase <= M_PI / 2.0 + 1e-12);
    CHECK(max_phase > M_PI / 4.0);
    CHECK(max_mag <= std::sqrt(2.0) + 1e-12);

    spec.phase_range = 0.4;
    const ObjectImage narrow = generate(spec);
    double narrow_max = 0.0;
    for (Eigen::Index i = 0; i < narrow.grid.size(); ++i)
        narrow_max = std::max(narrow_max, std::arg(narrow.grid.data()[i]));
    CHECK(narrow_max <= 0.4 + 1e-12);
    CHECK(narrow_max > 0.2);
}

TEST_CASE("iid probe: unit modulus, nonvanishing, reproducible") {
    const Probe a = generate_probe(ProbeKind::iid_phase, 16, 0.0, 9);
    const Probe b = generate_probe(ProbeKind::iid_phase, 16, 0.0, 9);
    CHECK((a.grid - b.grid).norm() == 0.0);
    for (Eigen::Index i = 0; i < a.grid.size(); ++i)
        CHECK(std::abs(a.grid.data()[i]) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("correlated probe is smoother than iid") {
    auto mean_neighbor_phase_jump = [](const ComplexGrid& g) {
        double total = 0.0;
        int count = 0;
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            for (Eigen::Index c = 0; c < g.cols(); ++c) {
                if (r + 1 < g.rows()) {
                    total += std::abs(std::arg(g(r, c) * std::conj(g(r + 1, c))));
                    ++count;
                }
                if (c + 1 < g.cols()) {
                    total += std::abs(std::arg(g(r, c) * std::conj(g(r, c + 1))));
                    ++count;
                }
            }
        }
        return total / count;
    };
    double iid_total = 0.0, smooth_total = 0.0;
    for (int s = 0; s < 10; ++s) {
        iid_total += mean_neighbor_phase_jump(
            generate_probe(ProbeKind::iid_phase, 20, 0.0, 200 + static_cast<std::uint64_t>(s)).grid);
        smooth_total += mean_neighbor_phase_jump(
            generate_probe(ProbeKind::correlated, 20, 1.0, 200 + static_cast<std::uint64_t>(s)).grid);
    }
    CHECK(smooth_total * 2.0 <= iid_total);

    const Probe c = generate_probe(ProbeKind::correlated, 12, 0.4, 11);
    for (Eigen::Index i = 0; i < c.grid.size(); ++i)
        CHECK(std::abs(c.grid.data()[i]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pgm io round trip, 8 and 16 bit") {
    RealGrid img(5, 7);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        img.data()[i] = static_cast<double>(i) / static_cast<double>(img.size() - 1);
    write_pgm("ds_test8.pgm", img, 8);
    const RealGrid back8 = read_grayscale("ds_test8.pgm");
    CHECK(back8.rows() == 5);
    CHECK((back8 - img).cwiseAbs().maxCoeff() <= 1.0 / 255.0);
    write_pgm("ds_test16.pgm", img, 16);
    const RealGrid back16 = read_grayscale("ds_test16.pgm");
    CHECK((back16 - img).cwiseAbs().maxCoeff() <= 1.0 / 65535.0);
    std::remove("ds_test8.pgm");
    std::remove("ds_test16.pgm");
}

TEST_CASE("png io and the file-backed complex image") {
    write_test_png("ds_left.png", 24, 24);
    write_test_png("ds_right.png", 24, 24);
    const RealGrid g = read_grayscale("ds_left.png");
    CHECK(g.rows() == 24);
    CHECK(g.maxCoeff() <= 1.0);
    CHECK(g.minCoeff() >= 0.0);

    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::cib;
    spec.n = 24;
    spec.real_image = "ds_left.png";
    spec.imag_image = "ds_right.png";
    const ObjectImage img = generate(spec);
    CHECK(img.grid.rows() == 24);
    std::remove("ds_left.png");
    std::remove("ds_right.png");

    spec.real_image = "missing_image.png";
    CHECK_THROWS_AS((void)generate(spec), IoError);
}
