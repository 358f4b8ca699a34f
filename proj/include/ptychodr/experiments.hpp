#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ptychodr/blind.hpp"
#include "ptychodr/config.hpp"
#include "ptychodr/forward.hpp"
#include "ptychodr/spectral.hpp"

namespace ptychodr {

// Experiment pipeline: every stage reads/writes plain files so runs are
// scriptable and byte-reproducible for a fixed config + seed (manifests
// carry the only timestamp).

// Synthesizes truth + measurements. Writes b.npy, scheme.json (ptycho) or
// masks.npy (two-pattern), truth_object.npy, truth_probe.npy, manifest.json.
void cmd_simulate(const ExperimentConfig& config);

// Non-blind reconstruction from a simulate directory: trace.csv,
// estimate_object.npy, magnitude/phase PGMs, summary.json.
void cmd_reconstruct(const ExperimentConfig& config, const std::string& data_dir);

// Blind reconstruction (object + probe): blind_trace.csv, estimate NPYs and
// PGMs, summary.json.
void cmd_blind(const ExperimentConfig& config, const std::string& data_dir);

// One reconstruction per parameter value (worker threads), aggregated into
// sweep.csv; per-run failures are recorded and the sweep continues.
void cmd_sweep(const ExperimentConfig& config, const std::string& param,
               const std::vector<double>& values);

// Spectral analysis at the simulated truth: spectral_report.json and, in
// dense mode, eigenstructure_report.json.
void cmd_spectral(const ExperimentConfig& config, const std::string& data_dir);

// ---------------------------------------------------------------------------
// Pieces shared by the commands and the test suites

struct SimulatedInstance {
    ObjectImage truth_object;
    Probe truth_probe;            // empty grid for two-pattern instances
    std::vector<ComplexGrid> masks;  // two-pattern only
    ScanScheme scheme;
    MeasurementOp op;             // operator at the truth probe
    MeasurementData data;
};

// Builds the full instance in memory (no files).
SimulatedInstance simulate_instance(const ExperimentConfig& config);

// Chooses a Poisson photon scale so the measured NSR lands near the target.
double calibrate_poisson_scale(const MeasurementOp& op, const ComplexGrid& truth,
                               double nsr_target);

// write-then-rename so partial files never appear under the final name
void atomic_write_text(const std::string& path, const std::string& contents);

}  // namespace ptychodr
