#include "ptychodr/blind.hpp"

#include <cmath>
#include <fstream>

#include "ptychodr/errors.hpp"
#include "ptychodr/metrics.hpp"
#include "ptychodr/npy.hpp"
#include "ptychodr/rng.hpp"

namespace ptychodr {
namespace {

void pin_bright_frame(ComplexGrid& f, const BrightEnforce& bright) {
    const auto n = f.rows();
    const auto w = static_cast<Eigen::Index>(bright.frame_width);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < f.cols(); ++c) {
            if (r < w || r >= n - w || c < w || c >= f.cols() - w) f(r, c) = bright.value;
        }
    }
}

SolverConfig inner_config(const BlindConfig& config, double rho) {
    SolverConfig inner;
    inner.method = config.method;
    inner.rho = rho;
    inner.max_iters = config.inner_cap;
    inner.tol = config.inner_tol;
    inner.record_every = std::max(1, config.inner_cap);  // endpoints only
    return inner;
}

}  // namespace

void BlindConfig::validate() const {
    if (method != Method::gaussian_drs && method != Method::poisson_drs)
        throw ConfigError("blind: inner method must be gaussian-drs or poisson-drs");
    if (ppc_delta < 0.0 || ppc_delta > 0.5)
        throw ConfigError("blind: ppc_delta must lie in (0, 1/2]");
    if (inner_cap < 0) throw ConfigError("blind: inner_cap must be >= 0");
    if (max_epochs < 0) throw ConfigError("blind: max_epochs must be >= 0");
    if (stagnation_window < 1) throw ConfigError("blind: stagnation_window must be >= 1");
    const double probe_rho = rho_probe < 0.0 ? rho : rho_probe;
    if (method == Method::poisson_drs && (rho <= 0.0 || probe_rho <= 0.0))
        throw ConfigError("blind: poisson-drs requires rho > 0");
}

Probe ppc_init(const ComplexGrid& true_probe, double delta, const Eigen::Vector2i& ramp_k,
               int n_period, std::uint64_t seed) {
    if (delta < 0.0 || delta > 0.5) throw ConfigError("ppc_init: delta must lie in (0, 1/2]");
    if (n_period < 1) throw ConfigError("ppc_init: n_period must be >= 1");
    Rng rng(seed);
    Probe probe;
    probe.kind = ProbeKind::custom;
    probe.grid.resize(true_probe.rows(), true_probe.cols());
    for (Eigen::Index r = 0; r < true_probe.rows(); ++r) {
        for (Eigen::Index c = 0; c < true_probe.cols(); ++c) {
            const double ramp = 2.0 * M_PI *
                                (ramp_k.x() * static_cast<double>(r) +
                                 ramp_k.y() * static_cast<double>(c)) /
                                static_cast<double>(n_period);
            const double noise = rng.uniform(-delta * M_PI, delta * M_PI);
            probe.grid(r, c) =
                true_probe(r, c) * Complex(std::cos(ramp + noise), std::sin(ramp + noise));
        }
    }
    return probe;
}

BlindState init_blind(const RealGrid& b, const ScanScheme& scheme, int n, Probe probe,
                      const BlindConfig& config) {
    config.validate();
    BlindState state;
    state.probe = std::move(probe);
    state.probe_norm0 = state.probe.grid.norm();

    Rng rng(child_seed(config.rng_seed, "blind-object-init"));
    ComplexGrid u(b.rows(), b.cols());
    for (Eigen::Index r = 0; r < b.rows(); ++r) {
        for (Eigen::Index c = 0; c < b.cols(); ++c) {
            const double theta = rng.uniform(0.0, 2.0 * M_PI);
            u(r, c) = b(r, c) * Complex(std::cos(theta), std::sin(theta));
        }
    }
    state.u = u;
    state.v = std::move(u);

    const MeasurementOp a1 = make_object_side_op(state.probe.grid, scheme, n);
    const Complex fill = config.bright.on ? config.bright.value : Complex(0.0, 0.0);
    state.object.grid = pseudo_inverse_apply(a1, state.u, fill);
    if (config.bright.on) {
        state.object.boundary = Boundary{BoundaryKind::bright, config.bright.value};
        pin_bright_frame(state.object.grid, config.bright);
    }
    return state;
}

void epoch(BlindState& state, const RealGrid& b, const ScanScheme& scheme,
           const BlindConfig& config, const BlindTruth& truth) {
    config.validate();
    const int n = static_cast<int>(state.object.grid.rows());
    const int m = static_cast<int>(state.probe.grid.rows());
    if ((state.probe.grid.cwiseAbs().array() == 0.0).any())
        throw SingularGramError("blind epoch: probe estimate has a zero entry");

    const double probe_rho = config.rho_probe < 0.0 ? config.rho : config.rho_probe;
    const Complex fill = config.bright.on ? config.bright.value : Complex(0.0, 0.0);

    // object update with the probe frozen
    const MeasurementOp a_k = make_object_side_op(state.probe.grid, scheme, n);
    if (config.inner_cap > 0) {
        const SolverState inner = run(inner_config(config, config.rho), a_k, b, state.u);
        state.u = inner.u;
        state.object.grid = pseudo_inverse_apply(a_k, state.u, fill);
        if (config.bright.on) pin_bright_frame(state.object.grid, config.bright);
    }

    // probe update with the object frozen
    const MeasurementOp b_k = make_probe_side_op(state.object.grid, scheme, m);
    if (config.inner_cap > 0) {
        const SolverState inner = run(inner_config(config, probe_rho), b_k, b, state.v);
        state.v = inner.u;
        state.probe.grid = pseudo_inverse_apply(b_k, state.v);
    }

    EpochRecord record;
    record.epoch = state.epoch + 1;
    record.rr = metrics::rr(b, b_k, state.probe.grid);

    // fold the scaling ambiguity back into the probe norm (reporting only;
    // the forward product is unchanged). Bright pinning already fixes the
    // scale, so it takes precedence.
    if (!config.bright.on && config.inner_cap > 0) {
        const double norm = state.probe.grid.norm();
        if (norm > 0.0 && state.probe_norm0 > 0.0) {
            const double s = state.probe_norm0 / norm;
            state.probe.grid *= s;
            state.object.grid /= s;
        }
    }

    if (truth.object) {
        record.re = metrics::re(*truth.object, state.object.grid).first;
        record.re2 = metrics::re2(*truth.object, state.object.grid);
    }
    if (truth.probe) record.probe_re = metrics::probe_re(*truth.probe, state.probe.grid).first;

    state.epoch += 1;
    state.trace.push_back(record);

    if (config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
        const std::string tag = "_epoch" + std::to_string(state.epoch) + ".npy";
        save_npy(config.checkpoint_dir + "/object" + tag, state.object.grid);
        save_npy(config.checkpoint_dir + "/probe" + tag, state.probe.grid);
        save_npy(config.checkpoint_dir + "/u" + tag, state.u);
        save_npy(config.checkpoint_dir + "/v" + tag, state.v);
    }
}

BlindState run_blind(const RealGrid& b, const ScanScheme& scheme, int n,
                     const BlindConfig& config, Probe probe_init, const BlindTruth& truth) {
    config.validate();
    BlindState state = init_blind(b, scheme, n, std::move(probe_init), config);
    for (int k = 0; k < config.max_epochs; ++k) {
        epoch(state, b, scheme, config, truth);
        const int w = config.stagnation_window;
        if (state.epoch > w) {
            const double now = state.trace.back().rr;
            const double then = state.trace[state.trace.size() - 1 - static_cast<std::size_t>(w)].rr;
            const double change = std::abs(then - now) / std::max(then, 1e-300);
            if (change < config.stagnation_tol) break;
        }
    }
    return state;
}

void save_blind_trace_csv(const std::string& path, const std::vector<EpochRecord>& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "epoch,re,re2,rr,probe_re\n";
    out.precision(17);
    for (const auto& r : trace) {
        out << r.epoch << ",";
        if (r.re >= 0.0) out << r.re;
        out << ",";
        if (r.re2 >= 0.0) out << r.re2;
        out << "," << r.rr << ",";
        if (r.probe_re >= 0.0) out << r.probe_re;
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace ptychodr
