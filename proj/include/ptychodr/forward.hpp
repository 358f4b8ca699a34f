#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptychodr/grids.hpp"
#include "ptychodr/rng.hpp"

namespace ptychodr {

// ---------------------------------------------------------------------------
// Domain types

enum class BoundaryKind { periodic, bright, dark };

struct Boundary {
    BoundaryKind kind = BoundaryKind::periodic;
    Complex bright_value{0.0, 0.0};  // used when kind == bright
};

struct ObjectImage {
    ComplexGrid grid;  // n x n
    Boundary boundary;
};

enum class ProbeKind { iid_phase, correlated, custom };

struct Probe {
    ComplexGrid grid;  // m x m, nonvanishing for generated probes
    ProbeKind kind = ProbeKind::custom;
    double correlation = 0.0;  // c in (0,1] for correlated probes
};

enum class PerturbKind { none, rank_one, full_rank };

// Ordered set of integer probe shifts. Shifts are translated so the
// componentwise minimum is (0,0); windows wrap periodically.
struct ScanScheme {
    int tau = 1;
    PerturbKind kind = PerturbKind::none;
    int range = 0;  // |delta| <= range componentwise
    int grid_rows = 0, grid_cols = 0;
    std::uint64_t seed = 0;
    std::vector<Eigen::Vector2i> shifts;  // (row, col) offsets
};

ScanScheme make_scan(int n, int m, int tau, PerturbKind kind, int perturb_range,
                     std::uint64_t seed);

std::string scheme_to_json(const ScanScheme& scheme);
ScanScheme scheme_from_json(const std::string& text);

// Magnitude data, one (2m-1)x(2m-1) diffraction pattern per shift, stacked
// pattern-major: row block p covers rows [p*(2m-1), (p+1)*(2m-1)).
struct MeasurementData {
    RealGrid b;
    int patterns = 0;
    int pattern_size = 0;  // 2m-1
    double nsr = 0.0;      // ||b - |Ax||| / |||Ax|||, 0 for noiseless
};

// The linear measurement operator obtained by freezing one argument of the
// bilinear map F(probe, object): a concatenation of windowed, masked,
// oversampled Fourier transforms. Immutable after construction.
struct MeasurementOp {
    enum class Side { object, probe, masks };

    Side side = Side::object;
    int domain_rows = 0, domain_cols = 0;  // input grid shape
    int window = 0;                        // m_w; patterns are (2m_w-1)^2
    std::vector<Eigen::Vector2i> shifts;
    std::vector<ComplexGrid> factors;  // one m_w x m_w mask per pattern

    RealGrid gram;                  // diagonal of A*A over the domain
    Grid<std::uint8_t> covered;     // 1 where at least one window touches
    ComplexGrid dft;                // (2m_w-1) x m_w forward DFT factor
    bool underdetermined = false;   // N <= 2 * domain size (warned, not fatal)

    int pattern_size() const { return 2 * window - 1; }
    int pattern_count() const { return static_cast<int>(shifts.size()); }
    Eigen::Index transform_rows() const {
        return static_cast<Eigen::Index>(pattern_count()) * pattern_size();
    }
    Eigen::Index transform_size() const { return transform_rows() * pattern_size(); }
};

// Object-side A: probe fixed, object free (n x n -> transform domain).
MeasurementOp make_object_side_op(const ComplexGrid& probe, const ScanScheme& scheme, int n);

// Probe-side B: object fixed, probe free (m x m -> transform domain).
MeasurementOp make_probe_side_op(const ComplexGrid& object, const ScanScheme& scheme, int m);

// Coded-diffraction operator: one full-frame mask per pattern, no shifts.
MeasurementOp make_mask_op(const std::vector<ComplexGrid>& masks);

// ---------------------------------------------------------------------------
// Operator actions

// F0(w) = sum_k exp(-i 2 pi k.w) patch(k) on the (2m-1)^2 grid w_j = j/(2m-1);
// the DFT of the patch zero-padded to (2m-1) x (2m-1).
ComplexGrid oversampled_dft(const ComplexGrid& patch);

ComplexGrid forward(const MeasurementOp& op, const ComplexGrid& x);

// Exact adjoint of forward w.r.t. Re<.,.>.
ComplexGrid adjoint(const MeasurementOp& op, const ComplexGrid& u);

// A+ u = (A*A)^-1 A* u. Pixels no window touches map to `uncovered_fill`;
// a vanishing Gram entry on a covered pixel is an error.
ComplexGrid pseudo_inverse_apply(const MeasurementOp& op, const ComplexGrid& u,
                                 Complex uncovered_fill = Complex(0.0, 0.0));

// Orthogonal projection onto range(A): P_X u = A A+ u.
ComplexGrid project_range(const MeasurementOp& op, const ComplexGrid& u);

// ---------------------------------------------------------------------------
// Measurement synthesis

struct NoiseModel {
    enum class Kind { none, poisson } kind = Kind::none;
    double scale = 1.0;       // photon scale: intensities are scale * |F|^2
    std::uint64_t seed = 0;
};

MeasurementData measure(const MeasurementOp& op, const ComplexGrid& x, const NoiseModel& noise);

// ---------------------------------------------------------------------------
// Scan connectivity

struct ConnectivityReport {
    bool connected = false;
    int num_components = 0;
    std::vector<int> component_of;  // per shift index
};

// Undirected graph on shifts; edge (t,t') iff the two windows share at least
// two support pixels.
ConnectivityReport connectivity_graph(const ScanScheme& scheme, const Grid<std::uint8_t>& support,
                                      int m);

}  // namespace ptychodr
