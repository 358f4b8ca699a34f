#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ptychodr/forward.hpp"
#include "ptychodr/grids.hpp"
#include "ptychodr/solvers.hpp"

namespace ptychodr {

// Blind recovery alternates a DRS inner loop for the object (probe frozen)
// with one for the probe (object frozen), warm-starting both transform-domain
// iterates across epochs.

struct BrightEnforce {
    bool on = false;
    Complex value{0.0, 0.0};
    int frame_width = 0;  // pixels pinned along each image edge
};

struct BlindConfig {
    Method method = Method::gaussian_drs;  // gaussian-drs or poisson-drs
    double rho = 1.0;
    double rho_probe = -1.0;  // < 0: reuse rho for the probe loop
    double inner_tol = 1e-4;
    int inner_cap = 60;
    int max_epochs = 100;
    double ppc_delta = 0.5;
    BrightEnforce bright;
    double stagnation_tol = 1e-6;  // relative RR change over stagnation_window epochs
    int stagnation_window = 5;
    int checkpoint_every = 0;  // 0 = off
    std::string checkpoint_dir;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double re = -1.0;        // object error modulo scale + ramp; -1 without truth
    double re2 = -1.0;       // object error modulo constant phase
    double rr = 0.0;         // data residual with the current estimates
    double probe_re = -1.0;  // probe error modulo scale + conjugate ramp
};

struct BlindState {
    ObjectImage object;
    Probe probe;
    ComplexGrid u, v;  // transform-domain warm starts (object loop, probe loop)
    int epoch = 0;
    double probe_norm0 = 0.0;  // scale normalization target
    std::vector<EpochRecord> trace;
};

struct BlindTruth {
    const ComplexGrid* object = nullptr;
    const ComplexGrid* probe = nullptr;
};

// Probe initializer: the true probe times a linear phase ramp of slope
// ramp_k (period n_period) and i.i.d. phase noise uniform on (-delta pi,
// delta pi). With delta = 1/2 the result stays within a quarter turn of the
// truth pointwise while its norm error sits near 0.85.
Probe ppc_init(const ComplexGrid& true_probe, double delta, const Eigen::Vector2i& ramp_k,
               int n_period, std::uint64_t seed);

// Object/warm-start initializer: u = b (.) random phases, f = A+ u.
BlindState init_blind(const RealGrid& b, const ScanScheme& scheme, int n, Probe probe,
                      const BlindConfig& config);

// One object-then-probe sweep; appends metrics to the trace. With
// inner_cap == 0 the estimates are left untouched.
void epoch(BlindState& state, const RealGrid& b, const ScanScheme& scheme,
           const BlindConfig& config, const BlindTruth& truth = {});

// Full loop: epochs until the data residual stagnates or max_epochs.
BlindState run_blind(const RealGrid& b, const ScanScheme& scheme, int n,
                     const BlindConfig& config, Probe probe_init,
                     const BlindTruth& truth = {});

// Per-epoch trace with columns epoch,re,re2,rr,probe_re.
void save_blind_trace_csv(const std::string& path, const std::vector<EpochRecord>& trace);

}  // namespace ptychodr
