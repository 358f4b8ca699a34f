#include "ptychodr/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ptychodr/datasets.hpp"
#include "ptychodr/errors.hpp"
#include "ptychodr/metrics.hpp"
#include "ptychodr/npy.hpp"
#include "ptychodr/rng.hpp"
#include "ptychodr/solvers.hpp"

namespace fs = std::filesystem;

namespace ptychodr {
namespace {

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&tt));
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

template <typename WriteFn>
void atomic_file(const std::string& path, WriteFn&& write) {
    const std::string tmp = path + ".tmp";
    write(tmp);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " into place: " + ec.message());
}

std::vector<ComplexGrid> two_pattern_masks(int n, std::uint64_t seed) {
    std::vector<ComplexGrid> masks;
    masks.push_back(ComplexGrid::Constant(n, n, Complex(1.0, 0.0)));  // plane wave
    Rng rng(child_seed(seed, "cdp-mask"));
    ComplexGrid coded(n, n);
    for (Eigen::Index r = 0; r < coded.rows(); ++r) {
        for (Eigen::Index c = 0; c < coded.cols(); ++c) {
            const double theta = rng.uniform(0.0, 2.0 * M_PI);
            coded(r, c) = Complex(std::cos(theta), std::sin(theta));
        }
    }
    masks.push_back(std::move(coded));
    return masks;
}

void write_image_pair(const std::string& dir, const std::string& stem, const ComplexGrid& grid) {
    RealGrid magnitude = grid.cwiseAbs();
    const double peak = magnitude.maxCoeff();
    if (peak > 0.0) magnitude /= peak;
    atomic_file(dir + "/" + stem + "_magnitude.pgm",
                [&](const std::string& p) { write_pgm(p, magnitude, 8); });
    RealGrid phase(grid.rows(), grid.cols());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        phase.data()[i] = (std::arg(grid.data()[i]) + M_PI) / (2.0 * M_PI);
    atomic_file(dir + "/" + stem + "_phase.pgm",
                [&](const std::string& p) { write_pgm(p, phase, 16); });
}

struct LoadedInstance {
    RealGrid b;
    int patterns = 0;
    ComplexGrid truth_object;
    ComplexGrid truth_probe;
    ScanScheme scheme;
    MeasurementKind kind = MeasurementKind::ptycho;
    std::vector<ComplexGrid> masks;
    int n = 0, m = 0;
    double nsr = 0.0;

    MeasurementOp make_truth_op() const {
        if (kind == MeasurementKind::two_pattern) return make_mask_op(masks);
        return make_object_side_op(truth_probe, scheme, n);
    }
};

LoadedInstance load_instance(const std::string& dir) {
    LoadedInstance inst;
    std::ifstream manifest_in(dir + "/manifest.json");
    if (!manifest_in) throw IoError("missing manifest.json in " + dir + "; run simulate first");
    nlohmann::json manifest;
    manifest_in >> manifest;
    inst.n = manifest.at("n").get<int>();
    inst.m = manifest.at("m").get<int>();
    inst.nsr = manifest.value("nsr", 0.0);
    const std::string kind = manifest.value("measurement", "ptycho");
    inst.kind = kind == "two-pattern" ? MeasurementKind::two_pattern : MeasurementKind::ptycho;

    std::vector<std::size_t> shape;
    inst.b = load_npy_real(dir + "/b.npy", &shape);
    inst.patterns = shape.size() == 3 ? static_cast<int>(shape[0]) : 1;
    inst.truth_object = load_npy_complex(dir + "/truth_object.npy");

    if (inst.kind == MeasurementKind::two_pattern) {
        std::vector<std::size_t> mask_shape;
        const ComplexGrid stacked = load_npy_complex(dir + "/masks.npy", &mask_shape);
        const auto count = static_cast<Eigen::Index>(mask_shape.at(0));
        const auto rows = stacked.rows() / count;
        for (Eigen::Index p = 0; p < count; ++p)
            inst.masks.push_back(stacked.block(p * rows, 0, rows, stacked.cols()));
    } else {
        inst.truth_probe = load_npy_complex(dir + "/truth_probe.npy");
        std::ifstream scheme_in(dir + "/scheme.json");
        if (!scheme_in) throw IoError("missing scheme.json in " + dir);
        std::ostringstream buf;
        buf << scheme_in.rdbuf();
        inst.scheme = scheme_from_json(buf.str());
    }
    return inst;
}

nlohmann::json run_summary(const LoadedInstance& inst, const MeasurementOp& op,
                           const ComplexGrid& estimate, const std::vector<double>& re_series) {
    nlohmann::json summary;
    summary["terminal_re"] = metrics::re(inst.truth_object, estimate).first;
    summary["terminal_re2"] = metrics::re2(inst.truth_object, estimate);
    summary["terminal_rr"] = metrics::rr(inst.b, op, estimate);
    double r2 = 0.0;
    if (const auto rate = fit_geometric_rate(re_series, 0.5, 1e-13, &r2)) {
        summary["fitted_rate"] = *rate;
        summary["fit_r_squared"] = r2;
    }
    return summary;
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& contents) {
    atomic_file(path, [&](const std::string& tmp) {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot open for write: " + tmp);
        out << contents;
        if (!out) throw IoError("write failed: " + tmp);
    });
}

double calibrate_poisson_scale(const MeasurementOp& op, const ComplexGrid& truth,
                               double nsr_target) {
    if (nsr_target <= 0.0) throw ConfigError("nsr_target must be > 0");
    // var(sqrt(Poisson(I))) ~ 1/4, so NSR^2 ~ N / (4 s ||A f||^2)
    const ComplexGrid fx = forward(op, truth);
    const double energy = fx.squaredNorm();
    const auto count = static_cast<double>(fx.size());
    return count / (4.0 * nsr_target * nsr_target * energy);
}

SimulatedInstance simulate_instance(const ExperimentConfig& config) {
    config.validate();
    SimulatedInstance inst;

    PhantomSpec object_spec = config.object;
    object_spec.seed = child_seed(config.seed, "object");
    inst.truth_object = generate(object_spec);
    if (config.magnitude_scale != 1.0) inst.truth_object.grid *= config.magnitude_scale;
    if (config.bright_frame > 0) {
        const Complex value(config.bright_value, 0.0);
        const auto n = inst.truth_object.grid.rows();
        const auto w = static_cast<Eigen::Index>(config.bright_frame);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c)
                if (r < w || r >= n - w || c < w || c >= n - w)
                    inst.truth_object.grid(r, c) = value;
        inst.truth_object.boundary = Boundary{BoundaryKind::bright, value};
    }

    if (config.measurement == MeasurementKind::two_pattern) {
        inst.masks = two_pattern_masks(config.object.n, config.seed);
        inst.op = make_mask_op(inst.masks);
    } else {
        inst.truth_probe = generate_probe(config.probe_kind, config.m, config.probe_correlation,
                                          child_seed(config.seed, "probe"));
        inst.scheme = make_scan(config.object.n, config.m, config.tau, config.scan_kind,
                                config.perturb_range, child_seed(config.seed, "scan"));
        inst.op = make_object_side_op(inst.truth_probe.grid, inst.scheme, config.object.n);
    }

    NoiseModel noise;
    noise.kind = config.noise_kind;
    noise.seed = child_seed(config.seed, "noise");
    if (config.noise_kind == NoiseModel::Kind::poisson) {
        noise.scale = config.nsr_target > 0.0
                          ? calibrate_poisson_scale(inst.op, inst.truth_object.grid,
                                                    config.nsr_target)
                          : config.noise_scale;
    }
    inst.data = measure(inst.op, inst.truth_object.grid, noise);
    return inst;
}

void cmd_simulate(const ExperimentConfig& config) {
    const SimulatedInstance inst = simulate_instance(config);
    ensure_dir(config.out_dir);
    const std::string& dir = config.out_dir;

    atomic_file(dir + "/b.npy", [&](const std::string& p) {
        save_npy_3d(p, inst.data.b, static_cast<std::size_t>(inst.data.patterns));
    });
    atomic_file(dir + "/truth_object.npy",
                [&](const std::string& p) { save_npy(p, inst.truth_object.grid); });
    if (config.measurement == MeasurementKind::two_pattern) {
        ComplexGrid stacked(inst.masks.size() * inst.masks[0].rows(), inst.masks[0].cols());
        for (std::size_t i = 0; i < inst.masks.size(); ++i)
            stacked.block(static_cast<Eigen::Index>(i) * inst.masks[0].rows(), 0,
                          inst.masks[0].rows(), inst.masks[0].cols()) = inst.masks[i];
        atomic_file(dir + "/masks.npy", [&](const std::string& p) {
            save_npy_3d(p, stacked, inst.masks.size());
        });
    } else {
        atomic_file(dir + "/truth_probe.npy",
                    [&](const std::string& p) { save_npy(p, inst.truth_probe.grid); });
        atomic_write_text(dir + "/scheme.json", scheme_to_json(inst.scheme));
    }

    nlohmann::json manifest;
    manifest["n"] = config.object.n;
    manifest["m"] = config.measurement == MeasurementKind::two_pattern ? config.object.n : config.m;
    manifest["tau"] = config.tau;
    manifest["seed"] = config.seed;
    manifest["scale"] = config.scale;
    manifest["measurement"] =
        config.measurement == MeasurementKind::two_pattern ? "two-pattern" : "ptycho";
    manifest["patterns"] = inst.data.patterns;
    manifest["noise"] = config.noise_kind == NoiseModel::Kind::poisson ? "poisson" : "none";
    manifest["nsr"] = inst.data.nsr;
    manifest["timestamp"] = iso_timestamp();
    atomic_write_text(dir + "/manifest.json", manifest.dump(2));
}

void cmd_reconstruct(const ExperimentConfig& config, const std::string& data_dir) {
    const LoadedInstance inst = load_instance(data_dir);
    const MeasurementOp op = inst.make_truth_op();
    ensure_dir(config.out_dir);

    const ComplexGrid u0 = random_range_init(op, child_seed(config.seed, "init"));
    const SolverState state = run(config.solver, op, inst.b, u0, &inst.truth_object);
    const ObjectImage estimate = extract_object(state.u, op);

    atomic_file(config.out_dir + "/trace.csv",
                [&](const std::string& p) { save_trace_csv(p, state.trace); });
    atomic_file(config.out_dir + "/estimate_object.npy",
                [&](const std::string& p) { save_npy(p, estimate.grid); });
    if (config.write_images) write_image_pair(config.out_dir, "estimate", estimate.grid);

    std::vector<double> re_series;
    for (const auto& pt : state.trace)
        if (pt.re >= 0.0) re_series.push_back(pt.re);
    nlohmann::json summary = run_summary(inst, op, estimate.grid, re_series);
    summary["method"] = method_name(config.solver.method);
    summary["rho"] = config.solver.rho;
    summary["beta"] = config.solver.beta;
    summary["iterations"] = state.iterations;
    summary["nsr"] = inst.nsr;
    atomic_write_text(config.out_dir + "/summary.json", summary.dump(2));
}

void cmd_blind(const ExperimentConfig& config, const std::string& data_dir) {
    const LoadedInstance inst = load_instance(data_dir);
    if (inst.kind == MeasurementKind::two_pattern)
        throw ConfigError("blind reconstruction needs a ptychographic instance");
    ensure_dir(config.out_dir);

    BlindConfig blind = config.blind;
    blind.rng_seed = child_seed(config.seed, "blind");
    if (blind.checkpoint_every > 0 && blind.checkpoint_dir.empty())
        blind.checkpoint_dir = config.out_dir;

    const Probe probe_start =
        ppc_init(inst.truth_probe, blind.ppc_delta, config.ppc_ramp, inst.n,
                 child_seed(config.seed, "ppc"));
    BlindTruth truth;
    truth.object = &inst.truth_object;
    truth.probe = &inst.truth_probe;
    const BlindState state = run_blind(inst.b, inst.scheme, inst.n, blind, probe_start, truth);

    atomic_file(config.out_dir + "/blind_trace.csv",
                [&](const std::string& p) { save_blind_trace_csv(p, state.trace); });
    atomic_file(config.out_dir + "/estimate_object.npy",
                [&](const std::string& p) { save_npy(p, state.object.grid); });
    atomic_file(config.out_dir + "/estimate_probe.npy",
                [&](const std::string& p) { save_npy(p, state.probe.grid); });
    if (config.write_images) {
        write_image_pair(config.out_dir, "estimate", state.object.grid);
        write_image_pair(config.out_dir, "probe", state.probe.grid);
    }

    std::vector<double> re_series;
    for (const auto& r : state.trace)
        if (r.re >= 0.0) re_series.push_back(r.re);
    nlohmann::json summary;
    summary["method"] = method_name(blind.method);
    summary["rho"] = blind.rho;
    summary["epochs"] = state.epoch;
    summary["nsr"] = inst.nsr;
    if (!state.trace.empty()) {
        summary["terminal_re"] = state.trace.back().re;
        summary["terminal_re2"] = state.trace.back().re2;
        summary["terminal_rr"] = state.trace.back().rr;
        summary["terminal_probe_re"] = state.trace.back().probe_re;
    }
    double r2 = 0.0;
    if (const auto rate = fit_geometric_rate(re_series, 0.25, 1e-13, &r2)) {
        summary["fitted_epoch_rate"] = *rate;
        summary["fit_r_squared"] = r2;
    }
    atomic_write_text(config.out_dir + "/summary.json", summary.dump(2));
}

void cmd_sweep(const ExperimentConfig& config, const std::string& param,
               const std::vector<double>& values) {
    ensure_dir(config.out_dir);
    if (param != "rho" && param != "beta" && param != "nsr-scale" && param != "tau" && param != "c")
        throw ConfigError("sweep param must be one of rho, beta, nsr-scale, tau, c");

    struct Row {
        double value = 0.0;
        double terminal_re = -1.0;
        double fitted_rate = -1.0;
        double predicted_rate = -1.0;
        std::string status = "ok";
    };
    std::vector<Row> rows(values.size());

    // one shared lambda2 powers the predicted-rate column for rho sweeps
    double lambda2 = -1.0;
    if (param == "rho" && config.noise_kind == NoiseModel::Kind::none) {
        try {
            const SimulatedInstance base = simulate_instance(config);
            const spectral::LinearizationPoint point =
                spectral::linearization_point(base.op, base.truth_object.grid);
            lambda2 = spectral::spectral_gap(point, base.op, spectral::GapMode::power);
        } catch (const Error&) {
            lambda2 = -1.0;  // prediction column stays empty
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= values.size()) return;
            Row& row = rows[i];
            row.value = values[i];
            try {
                ExperimentConfig local = config;
                local.out_dir = config.out_dir + "/run_" + std::to_string(i);
                if (param == "rho") {
                    local.solver.rho = values[i];
                    local.blind.rho = values[i];
                } else if (param == "beta") {
                    local.solver.beta = values[i];
                    local.solver.method = Method::raar;
                } else if (param == "nsr-scale") {
                    local.noise_kind = NoiseModel::Kind::poisson;
                    local.nsr_target = 0.0;
                    local.noise_scale = values[i];
                } else if (param == "tau") {
                    local.tau = static_cast<int>(values[i]);
                } else if (param == "c") {
                    local.probe_kind = ProbeKind::correlated;
                    local.probe_correlation = values[i];
                }
                cmd_simulate(local);
                cmd_reconstruct(local, local.out_dir);

                std::ifstream in(local.out_dir + "/summary.json");
                nlohmann::json summary;
                in >> summary;
                row.terminal_re = summary.value("terminal_re", -1.0);
                row.fitted_rate = summary.value("fitted_rate", -1.0);
                if (param == "rho" && lambda2 > 0.0)
                    row.predicted_rate = spectral::predicted_second_singular(lambda2, values[i]);
            } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
            }
        }
    };
    const unsigned worker_count =
        std::max(1u, std::min(std::thread::hardware_concurrency(),
                              static_cast<unsigned>(values.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < worker_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::ostringstream csv;
    csv.precision(17);
    csv << "value,terminal_re,fitted_rate,predicted_rate,status\n";
    for (const auto& row : rows) {
        csv << row.value << ",";
        if (row.terminal_re >= 0.0) csv << row.terminal_re;
        csv << ",";
        if (row.fitted_rate >= 0.0) csv << row.fitted_rate;
        csv << ",";
        if (row.predicted_rate >= 0.0) csv << row.predicted_rate;
        csv << "," << row.status << "\n";
    }
    atomic_write_text(config.out_dir + "/sweep.csv", csv.str());
}

void cmd_spectral(const ExperimentConfig& config, const std::string& data_dir) {
    const LoadedInstance inst = load_instance(data_dir);
    const MeasurementOp op = inst.make_truth_op();
    ensure_dir(config.out_dir);

    const spectral::LinearizationPoint point =
        spectral::linearization_point(op, inst.truth_object);

    std::vector<double> rho_grid;
    for (double rho = 0.0; rho <= 1.5 + 1e-9; rho += 0.05) rho_grid.push_back(rho);

    const bool dense_fits = 2 * op.transform_size() <= 20000;
    const spectral::SpectralReport report = spectral::analyze(
        point, op, dense_fits ? spectral::GapMode::dense : spectral::GapMode::power, rho_grid);
    atomic_write_text(config.out_dir + "/spectral_report.json", spectral::report_to_json(report));

    if (dense_fits) {
        const spectral::EigenstructureReport eig = spectral::verify_eigenstructure(point, op);
        nlohmann::json j;
        j["eta1_error"] = eig.eta1_error;
        j["pairing_error"] = eig.pairing_error;
        j["xi_relation_error"] = eig.xi_relation_error;
        j["block_error"] = eig.block_error;
        j["lambda_top"] = eig.lambda_top;
        j["lambda_bottom"] = eig.lambda_bottom;
        j["all_ok"] = eig.all_ok();
        atomic_write_text(config.out_dir + "/eigenstructure_report.json", j.dump(2));
    }
}

}  // namespace ptychodr
