#include "ptychodr/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ptychodr/errors.hpp"

namespace ptychodr {
namespace {

std::string make_header(const std::string& descr, const std::vector<std::size_t>& shape) {
    std::ostringstream dict;
    dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) dict << ",";
        if (i + 1 < shape.size()) dict << " ";
    }
    dict << "), }";
    std::string d = dict.str();
    // magic(6) + version(2) + header_len(2) + dict padded to a 64-byte multiple
    std::size_t total = 10 + d.size() + 1;
    std::size_t pad = (64 - total % 64) % 64;
    d.append(pad, ' ');
    d.push_back('\n');
    return d;
}

void write_npy(const std::string& path, const std::string& descr,
               const std::vector<std::size_t>& shape, const void* data, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    const std::string header = make_header(descr, shape);
    const char magic[] = "\x93NUMPY";
    out.write(magic, 6);
    const unsigned char version[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(version), 2);
    const auto hlen = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&hlen), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("write failed: " + path);
}

struct NpyHeader {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
};

NpyHeader read_header(std::ifstream& in, const std::string& path) {
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        throw IoError("not an NPY file: " + path);
    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    std::uint32_t hlen = 0;
    if (version[0] == 1) {
        std::uint16_t h16 = 0;
        in.read(reinterpret_cast<char*>(&h16), 2);
        hlen = h16;
    } else if (version[0] == 2 || version[0] == 3) {
        in.read(reinterpret_cast<char*>(&hlen), 4);
    } else {
        throw IoError("unsupported NPY version in " + path);
    }
    std::string dict(hlen, '\0');
    in.read(dict.data(), hlen);
    if (!in) throw IoError("truncated NPY header: " + path);

    NpyHeader hdr;
    auto find_value = [&dict, &path](const std::string& key) {
        auto pos = dict.find("'" + key + "'");
        if (pos == std::string::npos) throw IoError("NPY header missing " + key + ": " + path);
        pos = dict.find(':', pos);
        return pos + 1;
    };
    {
        auto pos = find_value("descr");
        auto q0 = dict.find('\'', pos);
        auto q1 = dict.find('\'', q0 + 1);
        hdr.descr = dict.substr(q0 + 1, q1 - q0 - 1);
    }
    hdr.fortran_order = dict.find("'fortran_order': True") != std::string::npos;
    {
        auto pos = find_value("shape");
        auto p0 = dict.find('(', pos);
        auto p1 = dict.find(')', p0);
        std::string tup = dict.substr(p0 + 1, p1 - p0 - 1);
        std::istringstream ss(tup);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            std::string trimmed;
            for (char c : tok)
                if (!std::isspace(static_cast<unsigned char>(c))) trimmed.push_back(c);
            if (!trimmed.empty()) hdr.shape.push_back(std::stoull(trimmed));
        }
    }
    return hdr;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

// Collapse a 1D/2D/3D shape onto (rows, cols) with leading axes merged.
void to_rows_cols(const std::vector<std::size_t>& shape, Eigen::Index& rows, Eigen::Index& cols) {
    if (shape.empty()) {
        rows = cols = 1;
    } else if (shape.size() == 1) {
        rows = 1;
        cols = static_cast<Eigen::Index>(shape[0]);
    } else {
        std::size_t lead = 1;
        for (std::size_t i = 0; i + 1 < shape.size(); ++i) lead *= shape[i];
        rows = static_cast<Eigen::Index>(lead);
        cols = static_cast<Eigen::Index>(shape.back());
    }
}

}  // namespace

void save_npy(const std::string& path, const ComplexGrid& grid) {
    write_npy(path, "<c16",
              {static_cast<std::size_t>(grid.rows()), static_cast<std::size_t>(grid.cols())},
              grid.data(), sizeof(Complex) * static_cast<std::size_t>(grid.size()));
}

void save_npy(const std::string& path, const RealGrid& grid) {
    write_npy(path, "<f8",
              {static_cast<std::size_t>(grid.rows()), static_cast<std::size_t>(grid.cols())},
              grid.data(), sizeof(double) * static_cast<std::size_t>(grid.size()));
}

void save_npy_3d(const std::string& path, const RealGrid& grid, std::size_t patterns) {
    if (patterns == 0 || grid.rows() % static_cast<Eigen::Index>(patterns) != 0)
        throw IoError("save_npy_3d: rows not divisible by pattern count");
    const std::size_t r = static_cast<std::size_t>(grid.rows()) / patterns;
    write_npy(path, "<f8", {patterns, r, static_cast<std::size_t>(grid.cols())}, grid.data(),
              sizeof(double) * static_cast<std::size_t>(grid.size()));
}

void save_npy_3d(const std::string& path, const ComplexGrid& grid, std::size_t patterns) {
    if (patterns == 0 || grid.rows() % static_cast<Eigen::Index>(patterns) != 0)
        throw IoError("save_npy_3d: rows not divisible by pattern count");
    const std::size_t r = static_cast<std::size_t>(grid.rows()) / patterns;
    write_npy(path, "<c16", {patterns, r, static_cast<std::size_t>(grid.cols())}, grid.data(),
              sizeof(Complex) * static_cast<std::size_t>(grid.size()));
}

ComplexGrid load_npy_complex(const std::string& path, std::vector<std::size_t>* shape) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    const NpyHeader hdr = read_header(in, path);
    if (hdr.descr != "<c16") throw IoError("expected complex128 ('<c16') in " + path);
    if (hdr.fortran_order) throw IoError("fortran-order NPY not supported: " + path);
    Eigen::Index rows = 0, cols = 0;
    to_rows_cols(hdr.shape, rows, cols);
    ComplexGrid grid(rows, cols);
    in.read(reinterpret_cast<char*>(grid.data()),
            static_cast<std::streamsize>(sizeof(Complex) * element_count(hdr.shape)));
    if (!in) throw IoError("truncated NPY data: " + path);
    if (shape) *shape = hdr.shape;
    return grid;
}

RealGrid load_npy_real(const std::string& path, std::vector<std::size_t>* shape) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    const NpyHeader hdr = read_header(in, path);
    if (hdr.descr != "<f8") throw IoError("expected float64 ('<f8') in " + path);
    if (hdr.fortran_order) throw IoError("fortran-order NPY not supported: " + path);
    Eigen::Index rows = 0, cols = 0;
    to_rows_cols(hdr.shape, rows, cols);
    RealGrid grid(rows, cols);
    in.read(reinterpret_cast<char*>(grid.data()),
            static_cast<std::streamsize>(sizeof(double) * element_count(hdr.shape)));
    if (!in) throw IoError("truncated NPY data: " + path);
    if (shape) *shape = hdr.shape;
    return grid;
}

}  // namespace ptychodr
