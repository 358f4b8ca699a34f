#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ptychodr/blind.hpp"
#include "ptychodr/datasets.hpp"
#include "ptychodr/forward.hpp"
#include "ptychodr/solvers.hpp"

namespace ptychodr {

// ---------------------------------------------------------------------------
// Minimal TOML reader covering the experiment schema: [section] headers,
// string/integer/float/boolean scalars, flat arrays, and # comments.

struct TomlValue {
    enum class Kind { string, number, boolean, array } kind = Kind::string;
    std::string str;
    double number = 0.0;
    bool boolean = false;
    std::vector<TomlValue> items;
};

class TomlTable {
public:
    static TomlTable parse(const std::string& text);
    static TomlTable parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_array(const std::string& key) const;

    const std::map<std::string, TomlValue>& values() const { return values_; }

private:
    std::map<std::string, TomlValue> values_;  // dotted keys: "section.key"
};

// ---------------------------------------------------------------------------
// Experiment description: simulate -> reconstruct -> analyze

enum class MeasurementKind { ptycho, two_pattern };

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string scale = "desk";

    // object
    PhantomSpec object;
    double magnitude_scale = 1.0;  // multiply object magnitudes (e.g. 255)
    int bright_frame = 0;          // truth frame width pinned to bright_value
    double bright_value = 0.0;

    // probe
    ProbeKind probe_kind = ProbeKind::iid_phase;
    int m = 16;
    double probe_correlation = 0.4;

    // scan
    MeasurementKind measurement = MeasurementKind::ptycho;
    PerturbKind scan_kind = PerturbKind::full_rank;
    int tau = 8;
    int perturb_range = 2;

    // noise
    NoiseModel::Kind noise_kind = NoiseModel::Kind::none;
    double noise_scale = 1e6;
    double nsr_target = 0.0;  // > 0: calibrate the scale toward this NSR

    // non-blind solver
    SolverConfig solver;

    // blind solver
    BlindConfig blind;
    Eigen::Vector2i ppc_ramp{0, 0};

    // output
    std::string out_dir = "out";
    bool write_images = true;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_toml(const TomlTable& table);

    void apply_scale_preset(const std::string& name);
    void validate() const;
};

}  // namespace ptychodr
