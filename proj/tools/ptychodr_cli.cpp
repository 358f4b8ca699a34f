// Experiment driver: simulate measurements, reconstruct (non-blind or
// blind), sweep a parameter, or run the spectral analysis at the truth.
//
// Usage:
//   ptychodr simulate    --config cfg.toml [--seed N] [--out DIR] [--scale desk|paper]
//   ptychodr reconstruct --config cfg.toml --data DIR [--method NAME] [--rho X] [--beta X]
//   ptychodr blind       --config cfg.toml --data DIR [--method NAME] [--rho X]
//   ptychodr sweep       --config cfg.toml --param rho --values 0.1,0.3,1.0
//   ptychodr spectral    --config cfg.toml --data DIR
//
// Flags override file values. Exit codes: 0 success, 2 config error,
// 3 numerical failure, 4 I/O error.

#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptychodr/config.hpp"
#include "ptychodr/errors.hpp"
#include "ptychodr/experiments.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> scale;
    std::optional<std::string> method;
    std::optional<double> rho;
    std::optional<double> beta;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "TOML experiment config")->required();
    cmd->add_option("--seed", flags.seed, "override the experiment seed");
    cmd->add_option("--out", flags.out_dir, "override the output directory");
    cmd->add_option("--scale", flags.scale, "size preset: desk or paper");
    cmd->add_option("--method", flags.method, "override the solver method");
    cmd->add_option("--rho", flags.rho, "override the relaxation parameter");
    cmd->add_option("--beta", flags.beta, "override the RAAR beta");
}

ptychodr::ExperimentConfig build_config(const CommonFlags& flags) {
    ptychodr::TomlTable table = ptychodr::TomlTable::parse_file(flags.config_path);
    ptychodr::ExperimentConfig config = ptychodr::ExperimentConfig::from_toml(table);
    if (flags.scale) {
        // re-apply file values on top of the new preset
        config.apply_scale_preset(*flags.scale);
        ptychodr::ExperimentConfig file_values = ptychodr::ExperimentConfig::from_toml(table);
        if (table.has("object.n")) config.object.n = file_values.object.n;
        if (table.has("probe.m")) config.m = file_values.m;
        if (table.has("scan.tau")) config.tau = file_values.tau;
        if (table.has("scan.perturb_range")) config.perturb_range = file_values.perturb_range;
    }
    if (flags.seed) config.seed = *flags.seed;
    if (flags.out_dir) config.out_dir = *flags.out_dir;
    if (flags.method) {
        config.solver.method = ptychodr::method_from_name(*flags.method);
        if (*flags.method == "gaussian-drs" || *flags.method == "poisson-drs")
            config.blind.method = config.solver.method;
    }
    if (flags.rho) {
        config.solver.rho = *flags.rho;
        config.blind.rho = *flags.rho;
    }
    if (flags.beta) config.solver.beta = *flags.beta;
    config.validate();
    return config;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phase retrieval and blind ptychography experiment runner"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string data_dir;
    std::string sweep_param = "rho";
    std::string sweep_values;

    CLI::App* simulate = app.add_subcommand("simulate", "synthesize truth and measurements");
    add_common(simulate, flags);

    CLI::App* reconstruct = app.add_subcommand("reconstruct", "non-blind reconstruction");
    add_common(reconstruct, flags);
    reconstruct->add_option("--data", data_dir, "simulate output directory")->required();

    CLI::App* blind = app.add_subcommand("blind", "blind object + probe reconstruction");
    add_common(blind, flags);
    blind->add_option("--data", data_dir, "simulate output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "reconstruct across a parameter list");
    add_common(sweep, flags);
    sweep->add_option("--param", sweep_param, "rho, beta, nsr-scale, tau, or c");
    sweep->add_option("--values", sweep_values, "comma-separated parameter values")->required();

    CLI::App* spectral = app.add_subcommand("spectral", "spectral analysis at the truth");
    add_common(spectral, flags);
    spectral->add_option("--data", data_dir, "simulate output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const ptychodr::ExperimentConfig config = build_config(flags);
        if (simulate->parsed()) {
            ptychodr::cmd_simulate(config);
        } else if (reconstruct->parsed()) {
            ptychodr::cmd_reconstruct(config, data_dir);
        } else if (blind->parsed()) {
            ptychodr::cmd_blind(config, data_dir);
        } else if (sweep->parsed()) {
            ptychodr::cmd_sweep(config, sweep_param, parse_values(sweep_values));
        } else if (spectral->parsed()) {
            ptychodr::cmd_spectral(config, data_dir);
        }
    } catch (const ptychodr::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ptychodr::NumericalFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const ptychodr::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
