#include "ptychodr/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <png.h>

#include "ptychodr/errors.hpp"
#include "ptychodr/rng.hpp"

namespace ptychodr {
namespace {

struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
};

// Toft's modified intensity set, so magnitudes land in [0,1].
const Ellipse kSheppLogan[] = {
    {1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
    {-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
    {-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
    {-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
    {0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
    {0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
    {0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
    {0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
    {0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
    {0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
};

RealGrid normalize01(RealGrid g) {
    const double lo = g.minCoeff();
    const double hi = g.maxCoeff();
    if (hi > lo) {
        g = (g.array() - lo) / (hi - lo);
    } else {
        g.setZero();
    }
    return g;
}

// Procedural stand-ins for the usual smooth/textured grayscale pair, so the
// complex test image is reproducible without bundled photographs.
RealGrid synthetic_smooth(int n) {
    RealGrid g(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double y = 2.0 * r / (n - 1.0) - 1.0;
            const double x = 2.0 * c / (n - 1.0) - 1.0;
            double v = 0.9 * std::exp(-((x - 0.25) * (x - 0.25) + (y - 0.1) * (y - 0.1)) / 0.16);
            v += 0.7 * std::exp(-((x + 0.45) * (x + 0.45) + (y + 0.4) * (y + 0.4)) / 0.05);
            v += 0.5 * std::exp(-((x + 0.1) * (x + 0.1) + (y - 0.55) * (y - 0.55)) / 0.02);
            v += 0.2 * (x + 1.0) / 2.0;
            g(r, c) = v;
        }
    }
    return normalize01(std::move(g));
}

RealGrid synthetic_textured(int n) {
    RealGrid g(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double y = 2.0 * r / (n - 1.0) - 1.0;
            const double x = 2.0 * c / (n - 1.0) - 1.0;
            double v = 0.5 + 0.25 * std::sin(2.0 * M_PI * (5.0 * x + 1.5 * std::sin(2.0 * M_PI * y)));
            v += 0.2 * std::cos(2.0 * M_PI * 7.0 * (x * 0.4 + y));
            v += 0.15 * std::sin(2.0 * M_PI * 11.0 * x * y);
            g(r, c) = v;
        }
    }
    return normalize01(std::move(g));
}

ComplexGrid complex_from_pair(const RealGrid& real01, const RealGrid& imag01, double phase_range) {
    check_same_shape(real01.rows(), real01.cols(), imag01.rows(), imag01.cols(), "cib");
    if (phase_range <= 0.0 || phase_range > 2.0 * M_PI)
        throw ConfigError("cib: phase_range must lie in (0, 2 pi]");
    ComplexGrid out(real01.rows(), real01.cols());
    // both parts are nonnegative, so arg lies in [0, pi/2]; rescale that span
    const double stretch = phase_range / (M_PI / 2.0);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const Complex z(real01(r, c), imag01(r, c));
            const double mag = std::abs(z);
            if (mag == 0.0) {
                out(r, c) = Complex(0.0, 0.0);
            } else {
                const double phase = std::arg(z) * stretch;
                out(r, c) = mag * Complex(std::cos(phase), std::sin(phase));
            }
        }
    }
    return out;
}

ComplexGrid random_phases(const RealGrid& magnitudes, Rng& rng) {
    ComplexGrid out(magnitudes.rows(), magnitudes.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const double phase = rng.uniform(0.0, 2.0 * M_PI);
            out(r, c) = magnitudes(r, c) * Complex(std::cos(phase), std::sin(phase));
        }
    }
    return out;
}

RealGrid read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw IoError("not a PGM file: " + path);
    auto next_token = [&in, &path]() {
        std::string tok;
        for (;;) {
            if (!(in >> tok)) throw IoError("truncated PGM header: " + path);
            if (tok[0] == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            return tok;
        }
    };
    const int cols = std::stoi(next_token());
    const int rows = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval <= 0 || maxval > 65535) throw IoError("bad PGM maxval in " + path);

    RealGrid g(rows, cols);
    if (magic == "P2") {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) g(r, c) = std::stod(next_token()) / maxval;
        return g;
    }
    in.get();  // single whitespace after maxval
    const bool wide = maxval > 255;
    std::vector<unsigned char> row(static_cast<std::size_t>(cols) * (wide ? 2 : 1));
    for (int r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated PGM data: " + path);
        for (int c = 0; c < cols; ++c) {
            const double v = wide ? 256.0 * row[2 * static_cast<std::size_t>(c)] +
                                        row[2 * static_cast<std::size_t>(c) + 1]  // big-endian
                                  : static_cast<double>(row[static_cast<std::size_t>(c)]);
            g(r, c) = v / maxval;
        }
    }
    return g;
}

RealGrid read_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("PNG decode failed: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    const png_uint_32 cols = png_get_image_width(png, info);
    const png_uint_32 rows = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray(png, 1, -1.0, -1.0);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int out_depth = png_get_bit_depth(png, info);
    const double maxval = out_depth == 16 ? 65535.0 : 255.0;
    std::vector<unsigned char> row(png_get_rowbytes(png, info));
    RealGrid g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (png_uint_32 r = 0; r < rows; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 c = 0; c < cols; ++c) {
            const double v = out_depth == 16
                                 ? 256.0 * row[2 * static_cast<std::size_t>(c)] +
                                       row[2 * static_cast<std::size_t>(c) + 1]
                                 : static_cast<double>(row[static_cast<std::size_t>(c)]);
            g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v / maxval;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return g;
}

}  // namespace

RealGrid shepp_logan(int n) {
    if (n < 2) throw ConfigError("shepp_logan: need n >= 2");
    RealGrid g = RealGrid::Zero(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double x = 2.0 * c / (n - 1.0) - 1.0;
            const double y = 1.0 - 2.0 * r / (n - 1.0);
            double v = 0.0;
            for (const auto& e : kSheppLogan) {
                const double phi = e.phi_deg * M_PI / 180.0;
                const double dx = x - e.x0;
                const double dy = y - e.y0;
                const double xr = dx * std::cos(phi) + dy * std::sin(phi);
                const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
                if (xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0) v += e.value;
            }
            g(r, c) = std::max(0.0, v);
        }
    }
    return g;
}

ObjectImage generate(const PhantomSpec& spec) {
    if (spec.n < 2) throw ConfigError("generate: need n >= 2");
    ObjectImage image;
    switch (spec.kind) {
        case PhantomSpec::Kind::cib: {
            const RealGrid real01 = read_grayscale(spec.real_image);
            const RealGrid imag01 = read_grayscale(spec.imag_image);
            image.grid = complex_from_pair(real01, imag01, spec.phase_range);
            break;
        }
        case PhantomSpec::Kind::cib_synthetic:
            image.grid = complex_from_pair(synthetic_smooth(spec.n), synthetic_textured(spec.n),
                                           spec.phase_range);
            break;
        case PhantomSpec::Kind::shepp_logan: {
            const RealGrid p = shepp_logan(spec.n);
            image.grid = p.cast<Complex>();
            break;
        }
        case PhantomSpec::Kind::rpp: {
            Rng rng(spec.seed);
            image.grid = random_phases(shepp_logan(spec.n), rng);
            break;
        }
        case PhantomSpec::Kind::salted_rpp: {
            Rng rng(spec.seed);
            image.grid = random_phases(shepp_logan(spec.n), rng);
            const Complex salt = spec.salt_value * Complex(1.0, 1.0);
            for (Eigen::Index r = 0; r < image.grid.rows(); ++r)
                for (Eigen::Index c = 0; c < image.grid.cols(); ++c)
                    if (rng.uniform() < spec.salt_probability) image.grid(r, c) = salt;
            break;
        }
    }
    ensure_finite(image.grid, "generate");
    return image;
}

Probe generate_probe(ProbeKind kind, int m, double correlation, std::uint64_t seed) {
    if (m < 2) throw ConfigError("generate_probe: need m >= 2");
    Probe probe;
    probe.kind = kind;
    Rng rng(seed);
    ComplexGrid iid(m, m);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
            const double theta = rng.uniform(0.0, 2.0 * M_PI);
            iid(r, c) = Complex(std::cos(theta), std::sin(theta));
        }
    }
    if (kind == ProbeKind::iid_phase || kind == ProbeKind::custom) {
        probe.grid = std::move(iid);
        return probe;
    }
    if (correlation <= 0.0 || correlation > 1.0)
        throw ConfigError("generate_probe: correlation must lie in (0, 1]");
    probe.correlation = correlation;
    const int half = static_cast<int>(std::floor(correlation * m));
    ComplexGrid smooth = ComplexGrid::Zero(m, m);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) {
            Complex acc(0.0, 0.0);
            for (int dr = -half; dr <= half; ++dr) {
                const int rr = ((r - dr) % m + m) % m;
                for (int dc = -half; dc <= half; ++dc) acc += iid(rr, ((c - dc) % m + m) % m);
            }
            smooth(r, c) = acc;
        }
    }
    probe.grid = sgn(smooth);  // back to unit modulus, keeps |mu| nonvanishing
    return probe;
}

RealGrid read_grayscale(const std::string& path) {
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == "pgm") return read_pgm(path);
    if (ext == "png") return read_png(path);
    throw IoError("unsupported image format (want .pgm or .png): " + path);
}

void write_pgm(const std::string& path, const RealGrid& values01, int bits) {
    if (bits != 8 && bits != 16) throw ConfigError("write_pgm: bits must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    const int maxval = bits == 8 ? 255 : 65535;
    out << "P5\n" << values01.cols() << " " << values01.rows() << "\n" << maxval << "\n";
    for (Eigen::Index r = 0; r < values01.rows(); ++r) {
        for (Eigen::Index c = 0; c < values01.cols(); ++c) {
            const double clamped = std::clamp(values01(r, c), 0.0, 1.0);
            const auto v = static_cast<unsigned>(std::lround(clamped * maxval));
            if (bits == 16) out.put(static_cast<char>((v >> 8) & 0xff));
            out.put(static_cast<char>(v & 0xff));
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace ptychodr
