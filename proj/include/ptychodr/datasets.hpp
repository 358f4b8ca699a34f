#pragma once

#include <cstdint>
#include <string>

#include "ptychodr/forward.hpp"
#include "ptychodr/grids.hpp"

namespace ptychodr {

// Test-object generators. Magnitudes are scaled to [0,1] before any phase is
// applied; boundaries default to periodic.
struct PhantomSpec {
    enum class Kind {
        cib,            // complex image from two user-supplied grayscale files
        cib_synthetic,  // self-contained stand-in: procedural smooth + textured pair
        shepp_logan,
        rpp,            // randomly phased phantom
        salted_rpp,
    };

    Kind kind = Kind::rpp;
    int n = 64;
    std::string real_image, imag_image;   // cib inputs
    double phase_range = M_PI / 2.0;      // cib phase span, in (0, 2 pi]
    std::uint64_t seed = 0;
    double salt_probability = 0.02;
    double salt_value = 1.0;              // salt pixels become salt_value * (1 + i)
};

ObjectImage generate(const PhantomSpec& spec);

// Ellipse-superposition phantom on an n-grid, values in [0,1], dark margins.
RealGrid shepp_logan(int n);

// Probe synthesis: iid unit-modulus random phases, or the iid field smoothed
// by a box kernel of half-width c*m and renormalized to unit modulus.
Probe generate_probe(ProbeKind kind, int m, double correlation, std::uint64_t seed);

// Grayscale image I/O. Readers normalize to [0,1] and accept PGM (P2/P5,
// 8/16-bit) and grayscale PNG (8/16-bit).
RealGrid read_grayscale(const std::string& path);
void write_pgm(const std::string& path, const RealGrid& values01, int bits = 8);

}  // namespace ptychodr
