#include "ptychodr/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ptychodr/errors.hpp"
#include "ptychodr/metrics.hpp"
#include "ptychodr/rng.hpp"

namespace ptychodr {
namespace {

constexpr double kDivergenceGuard = 1e3;  // abort when ||u|| exceeds this times ||b||
constexpr double kBoundSlack = 1e-6;

ComplexGrid pointwise_poisson_update(const ComplexGrid& u, const ComplexGrid& rx,
                                     const RealGrid& b, double rho) {
    ComplexGrid out(u.rows(), u.cols());
    const double c1 = 1.0 / (rho + 2.0);
    const double c2 = rho / (2.0 * (rho + 2.0));
    const double c3 = 8.0 * (2.0 + rho) / (rho * rho);
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            const double mag2 = std::norm(rx(r, c));
            const double root = std::sqrt(mag2 + c3 * b(r, c) * b(r, c));
            out(r, c) = 0.5 * u(r, c) - c1 * rx(r, c) + c2 * root * sgn(rx(r, c));
        }
    }
    return out;
}

// One iteration given the precomputed range projection of u.
ComplexGrid apply_update(Method method, const ComplexGrid& u, const ComplexGrid& px,
                         const MeasurementOp& op, const RealGrid& b, double rho, double beta) {
    const ComplexGrid rx = 2.0 * px - u;
    switch (method) {
        case Method::aar:
            return u + project_magnitude(rx, b) - px;
        case Method::apr:
            rho = 1.0;
            [[fallthrough]];
        case Method::admm_gaussian:
        case Method::gaussian_drs:
            return u / (rho + 1.0) + ((rho - 1.0) / (rho + 1.0)) * px +
                   project_magnitude(rx, b) / (rho + 1.0);
        case Method::poisson_drs:
            return pointwise_poisson_update(u, rx, b, rho);
        case Method::raar:
            return beta * (u + project_magnitude(rx, b) - px) +
                   (1.0 - beta) * project_magnitude(u, b);
        case Method::ap:
            return project_range(op, project_magnitude(u, b));
    }
    throw ConfigError("unknown method");
}

bool norm_bound_applies(Method method, double rho) {
    return (method == Method::gaussian_drs || method == Method::admm_gaussian) && rho > 0.0;
}

}  // namespace

Method method_from_name(const std::string& name) {
    if (name == "aar") return Method::aar;
    if (name == "gaussian-drs") return Method::gaussian_drs;
    if (name == "poisson-drs") return Method::poisson_drs;
    if (name == "raar") return Method::raar;
    if (name == "apr") return Method::apr;
    if (name == "ap") return Method::ap;
    if (name == "admm-gaussian") return Method::admm_gaussian;
    throw ConfigError("unknown method: " + name);
}

std::string method_name(Method method) {
    switch (method) {
        case Method::aar: return "aar";
        case Method::gaussian_drs: return "gaussian-drs";
        case Method::poisson_drs: return "poisson-drs";
        case Method::raar: return "raar";
        case Method::apr: return "apr";
        case Method::ap: return "ap";
        case Method::admm_gaussian: return "admm-gaussian";
    }
    return "?";
}

void SolverConfig::validate() const {
    if (max_iters < 0) throw ConfigError("solver: max_iters must be >= 0");
    if (record_every < 1) throw ConfigError("solver: record_every must be >= 1");
    if (method == Method::poisson_drs && rho <= 0.0)
        throw ConfigError("solver: poisson-drs requires rho > 0");
    if ((method == Method::gaussian_drs || method == Method::admm_gaussian) && rho < 0.0)
        throw ConfigError("solver: rho must be >= 0");
    if (method == Method::admm_gaussian && rho == 0.0)
        throw ConfigError("solver: admm-gaussian requires rho > 0");
    if (method == Method::raar && (beta < 0.5 || beta > 1.0))
        throw ConfigError("solver: raar requires beta in [1/2, 1]");
}

ComplexGrid step_aar(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b) {
    return apply_update(Method::aar, u, project_range(op, u), op, b, 0.0, 0.0);
}

ComplexGrid step_gaussian_drs(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                              double rho) {
    if (rho < 0.0) throw ConfigError("step_gaussian_drs: rho must be >= 0");
    return apply_update(Method::gaussian_drs, u, project_range(op, u), op, b, rho, 0.0);
}

ComplexGrid step_poisson_drs(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                             double rho) {
    if (rho <= 0.0) throw ConfigError("step_poisson_drs: rho must be > 0");
    return apply_update(Method::poisson_drs, u, project_range(op, u), op, b, rho, 0.0);
}

ComplexGrid step_raar(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                      double beta) {
    if (beta < 0.5 || beta > 1.0) throw ConfigError("step_raar: beta must lie in [1/2, 1]");
    return apply_update(Method::raar, u, project_range(op, u), op, b, 0.0, beta);
}

ComplexGrid step_ap(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b) {
    return project_range(op, project_magnitude(u, b));
}

ComplexGrid random_range_init(const MeasurementOp& op, std::uint64_t seed) {
    Rng rng(seed);
    ComplexGrid g(op.domain_rows, op.domain_cols);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
        for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = Complex(rng.normal(), rng.normal());
    return forward(op, g);
}

SolverState run(const SolverConfig& config, const MeasurementOp& op, const RealGrid& b,
                const ComplexGrid& u0, const ComplexGrid* truth_object) {
    config.validate();
    check_same_shape(u0.rows(), u0.cols(), op.transform_rows(), op.pattern_size(), "run");
    ensure_finite(u0, "run: u0");

    const double b_norm = b.norm();
    const int burn_in = std::max(50, config.max_iters / 2);
    const bool check_bound = norm_bound_applies(config.method, config.rho);
    const double bound =
        check_bound ? b_norm / std::min(config.rho, 1.0) * (1.0 + kBoundSlack) : 0.0;

    SolverState state;
    state.u = u0;
    double prev_rr = -1.0;

    auto record = [&](int k, double rr_value) {
        TracePoint pt;
        pt.iter = k;
        pt.rr = rr_value;
        pt.norm_u = state.u.norm();
        if (truth_object) {
            const ObjectImage est = extract_object(state.u, op);
            pt.re = metrics::re2(*truth_object, est.grid);
        }
        state.trace.push_back(pt);
    };

    for (int k = 0;; ++k) {
        const ComplexGrid pinv = pseudo_inverse_apply(op, state.u);
        const ComplexGrid px = forward(op, pinv);
        const double rr_value = b_norm > 0.0 ? (px.cwiseAbs() - b).norm() / b_norm : 0.0;

        if (k % config.record_every == 0 || k == config.max_iters) record(k, rr_value);

        if (k >= config.max_iters) {
            state.stop = StopReason::max_iters;
            break;
        }
        if (rr_value == 0.0 && k > 0) {
            state.stop = StopReason::zero_residual;
            break;
        }
        if (config.tol > 0.0 && prev_rr > 0.0) {
            const double decrease = (prev_rr - rr_value) / prev_rr;
            if (decrease <= config.tol) {
                state.stop = StopReason::stagnated;
                break;
            }
        }
        prev_rr = rr_value;

        state.u = apply_update(config.method, state.u, px, op, b, config.rho, config.beta);
        if (config.project_every > 0 && (k + 1) % config.project_every == 0)
            state.u = project_range(op, state.u);
        state.iterations = k + 1;

        if (!all_finite(state.u))
            throw NumericalFailure("solver: non-finite iterate at iteration " +
                                   std::to_string(k + 1));
        const double u_norm = state.u.norm();
        if (u_norm > kDivergenceGuard * b_norm && b_norm > 0.0)
            throw NumericalFailure("solver: iterate norm " + std::to_string(u_norm) +
                                   " exceeds divergence guard at iteration " +
                                   std::to_string(k + 1));
        if (check_bound && k + 1 >= burn_in && u_norm > bound)
            throw NumericalFailure("solver: iterate norm " + std::to_string(u_norm) +
                                   " violates the ||b||/min(rho,1) bound " + std::to_string(bound) +
                                   " at iteration " + std::to_string(k + 1));
    }
    return state;
}

AdmmState admm_gaussian_run(const SolverConfig& config, const MeasurementOp& op, const RealGrid& b,
                            const ComplexGrid& y0, const ComplexGrid& z0,
                            const ComplexGrid& lambda0) {
    SolverConfig cfg = config;
    cfg.method = Method::admm_gaussian;
    cfg.validate();
    const double rho = cfg.rho;
    const double b_norm = b.norm();

    AdmmState state;
    state.y = y0;
    state.z = z0;
    state.lambda = lambda0;

    for (int k = 0; k < cfg.max_iters; ++k) {
        const ComplexGrid z_next = prox_gaussian(state.y - state.lambda / rho, b, rho);
        const ComplexGrid u_next = z_next + state.lambda / rho;
        const ComplexGrid y_next = project_range(op, u_next);
        state.lambda += rho * (z_next - y_next);
        state.z = z_next;
        state.y = y_next;
        state.core.u = u_next;
        state.core.iterations = k + 1;

        if (!all_finite(state.core.u))
            throw NumericalFailure("admm: non-finite iterate at iteration " + std::to_string(k + 1));
        if ((k + 1) % cfg.record_every == 0 || k + 1 == cfg.max_iters) {
            TracePoint pt;
            pt.iter = k + 1;
            pt.rr = b_norm > 0.0 ? (y_next.cwiseAbs() - b).norm() / b_norm : 0.0;
            pt.norm_u = state.core.u.norm();
            state.core.trace.push_back(pt);
        }
    }
    return state;
}

double fixed_point_residual(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                            double rho) {
    const ComplexGrid px = project_range(op, u);
    const ComplexGrid rx = 2.0 * px - u;
    const ComplexGrid lhs = px + rho * (u - px);
    const double b_norm = b.norm();
    if (b_norm == 0.0) throw UndefinedMetricError("fixed_point_residual: zero data");
    return (lhs - project_magnitude(rx, b)).norm() / b_norm;
}

ObjectImage extract_object(const ComplexGrid& u, const MeasurementOp& op) {
    ObjectImage image;
    image.grid = pseudo_inverse_apply(op, u);
    return image;
}

std::optional<double> fit_geometric_rate(const std::vector<double>& values, double skip_fraction,
                                         double floor, double* r_squared) {
    // usable range: from after the skipped head until the values hit the floor
    std::size_t end = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] <= floor) {
            end = i;
            break;
        }
    }
    const auto start = static_cast<std::size_t>(skip_fraction * static_cast<double>(end));
    if (end - start < 3) return std::nullopt;

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const auto count = static_cast<double>(end - start);
    for (std::size_t i = start; i < end; ++i) {
        const double x = static_cast<double>(i);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    const double denom = count * sxx - sx * sx;
    if (denom == 0.0) return std::nullopt;
    const double slope = (count * sxy - sx * sy) / denom;
    if (r_squared) {
        const double ss_tot = syy - sy * sy / count;
        const double ss_res = ss_tot - slope * (sxy - sx * sy / count);
        *r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    }
    return std::exp(slope);
}

void save_trace_csv(const std::string& path, const std::vector<TracePoint>& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "iter,rr,re,norm_u\n";
    out.precision(17);
    for (const auto& pt : trace) {
        out << pt.iter << "," << pt.rr << ",";
        if (pt.re >= 0.0) out << pt.re;
        out << "," << pt.norm_u << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace ptychodr
