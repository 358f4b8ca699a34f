#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptychodr/forward.hpp"
#include "ptychodr/grids.hpp"
#include "ptychodr/proxlib.hpp"

namespace ptychodr {

// ---------------------------------------------------------------------------
// Configuration and state

enum class Method { aar, gaussian_drs, poisson_drs, raar, apr, ap, admm_gaussian };

Method method_from_name(const std::string& name);
std::string method_name(Method method);

struct SolverConfig {
    Method method = Method::gaussian_drs;
    double rho = 1.0;    // relaxation parameter (gaussian/poisson DRS, ADMM)
    double beta = 0.9;   // RAAR mixing weight, in [1/2, 1]
    int max_iters = 1000;
    double tol = 1e-4;   // stagnation rule threshold; <= 0 disables the rule
    int record_every = 1;
    int project_every = 0;  // optional: apply P_X to the iterate every K steps (0 = off)
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct TracePoint {
    int iter = 0;
    double rr = 0.0;      // || |P_X u| - b || / ||b||
    double re = -1.0;     // error vs ground truth modulo constant phase; -1 if no truth
    double norm_u = 0.0;
};

enum class StopReason { max_iters, stagnated, zero_residual };

struct SolverState {
    ComplexGrid u;
    int iterations = 0;
    StopReason stop = StopReason::max_iters;
    std::vector<TracePoint> trace;

    double terminal_rr() const { return trace.empty() ? -1.0 : trace.back().rr; }
};

// ---------------------------------------------------------------------------
// Single fixed-point steps (stateless; run() fuses the shared projections)

// u + P_Y R_X u - P_X u
ComplexGrid step_aar(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b);

// u/(rho+1) + (rho-1)/(rho+1) P_X u + P_Y R_X u / (rho+1)
ComplexGrid step_gaussian_drs(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                              double rho);

// u/2 - R_X u/(rho+2) + rho/(2(rho+2)) sqrt(|R_X u|^2 + 8(2+rho)b^2/rho^2) (.) sgn(R_X u)
ComplexGrid step_poisson_drs(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                             double rho);

// beta * AAR(u) + (1-beta) P_Y u
ComplexGrid step_raar(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                      double beta);

// P_X P_Y u
ComplexGrid step_ap(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b);

// ---------------------------------------------------------------------------
// Iteration drivers

// Default start: A applied to a random complex Gaussian object, so u0 lies in
// range(A).
ComplexGrid random_range_init(const MeasurementOp& op, std::uint64_t seed);

// Iterates the configured method from u0. Stops when the relative residual
// decrease falls to tol or max_iters is reached. For gaussian DRS with
// rho > 0 the iterate norms are checked against ||b||/min(rho,1) after a
// burn-in; violations and NaN/Inf raise NumericalFailure.
SolverState run(const SolverConfig& config, const MeasurementOp& op, const RealGrid& b,
                const ComplexGrid& u0, const ComplexGrid* truth_object = nullptr);

struct AdmmState {
    SolverState core;       // u_k := z_k + lambda_{k-1}/rho and its trace
    ComplexGrid y, z, lambda;
};

// ADMM on the augmented Lagrangian of the gaussian loss, updates ordered
// z then y then lambda. Equivalent to gaussian DRS in the u variable.
AdmmState admm_gaussian_run(const SolverConfig& config, const MeasurementOp& op, const RealGrid& b,
                            const ComplexGrid& y0, const ComplexGrid& z0,
                            const ComplexGrid& lambda0);

// ---------------------------------------------------------------------------
// Diagnostics

// || P_X u + rho (u - P_X u) - b (.) sgn(R_X u) || / ||b||
double fixed_point_residual(const ComplexGrid& u, const MeasurementOp& op, const RealGrid& b,
                            double rho);

ObjectImage extract_object(const ComplexGrid& u, const MeasurementOp& op);

// Least-squares slope of log(values) over the geometric regime: entries are
// clipped below `floor`, and the leading `skip_fraction` of the usable range
// is ignored. Returns the per-step ratio, or nullopt if under 3 points.
std::optional<double> fit_geometric_rate(const std::vector<double>& values,
                                         double skip_fraction = 0.5, double floor = 1e-13,
                                         double* r_squared = nullptr);

// Trace export with columns iter,rr,re,norm_u.
void save_trace_csv(const std::string& path, const std::vector<TracePoint>& trace);

}  // namespace ptychodr
