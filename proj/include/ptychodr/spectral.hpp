#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptychodr/forward.hpp"
#include "ptychodr/grids.hpp"

namespace ptychodr {
namespace spectral {

// Regular solution used as the linearization point: |x| = b, x in range(A),
// no vanishing entries where b > 0.
struct LinearizationPoint {
    ComplexGrid x;
    ComplexGrid omega;  // sgn(x)
    RealGrid b;         // |x|
};

LinearizationPoint linearization_point(const MeasurementOp& op, const ComplexGrid& f_object);

// Validates that u is (numerically) a regular solution for the data b before
// accepting it; degenerate points are refused.
LinearizationPoint linearization_point_from_iterate(const MeasurementOp& op, const ComplexGrid& u,
                                                    const RealGrid& b, double tol = 1e-8);

// ---------------------------------------------------------------------------
// Dense isometry machinery (desk scales)

// H = Omega* A D^{-1/2}: the measurement matrix with unit-norm columns,
// conjugated by the solution phases. H*H = I.
Eigen::MatrixXcd build_isometry(const LinearizationPoint& point, const MeasurementOp& op);

// Real counterpart calH = [Re H, -Im H], so that calH [Re w; Im w] = Re(H w).
Eigen::MatrixXd build_real_isometry(const Eigen::MatrixXcd& h);

struct IsometrySpectrum {
    std::vector<double> lambda;  // singular values, descending (2 * domain size)
    Eigen::MatrixXd eta;         // data-side singular vectors, one per column
    Eigen::MatrixXd xi;          // object-side singular vectors
};

IsometrySpectrum isometry_spectrum(const LinearizationPoint& point, const MeasurementOp& op);

enum class GapMode { dense, power };

// Second singular value of calH. Power mode runs deflated power iteration on
// calH^T calH, matrix-free through the operator; tolerance 1e-9, cap 1e4.
double spectral_gap(const LinearizationPoint& point, const MeasurementOp& op, GapMode mode);

// ---------------------------------------------------------------------------
// Linearized iteration map

// Real-linear derivative action of the gaussian DRS map at the point,
// expressed in solution-phase coordinates eta = Omega* v.
ComplexGrid jacobian_apply(const LinearizationPoint& point, const MeasurementOp& op, double rho,
                           const ComplexGrid& eta);

// 2N x 2N real matrix of jacobian_apply in the (real parts, imaginary parts)
// basis, index order.
Eigen::MatrixXd jacobian_matrix(const LinearizationPoint& point, const MeasurementOp& op,
                                double rho);

// Moduli of the eigenvalues of jacobian_matrix, descending. The local
// convergence rate near the solution is the second entry.
std::vector<double> jacobian_spectrum(const LinearizationPoint& point, const MeasurementOp& op,
                                      double rho);

// The same spectrum predicted from the isometry singular values alone:
// per k the 2x2 block eigenvalues
//   [rho + 2 lambda_partner^2 +- sqrt(rho^2 - 4 lambda^2 lambda_partner^2)] / (2(rho+1)),
// with modulus lambda_partner / sqrt(1+rho) when the discriminant is
// negative, plus (N - 2n^2) copies each of 1/(rho+1) and 0.
std::vector<double> closed_form_jacobian_spectrum(const std::vector<double>& lambda,
                                                  Eigen::Index transform_size, double rho);

// ---------------------------------------------------------------------------
// Rate prediction

struct OptimalRho {
    double rho_star = 0.0;
    double rate_star = 1.0;
};

// rho* = 2 lambda2 sqrt(1 - lambda2^2), where the predicted second singular
// value attains its minimum lambda2 / sqrt(1 + rho*).
OptimalRho optimal_rho(double lambda2);

// Predicted second singular value of the linearization as a function of rho:
// lambda2/sqrt(1+rho) below rho*, the closed-form block branch above.
double predicted_second_singular(double lambda2, double rho);

// ---------------------------------------------------------------------------
// Structure verification

struct EigenstructureReport {
    double eta1_error = 0.0;      // distance of the top data-side vector from b/||b||
    double pairing_error = 0.0;   // max |lambda_k^2 + lambda_partner^2 - 1|
    double xi_relation_error = 0.0;  // subspace angle defect of xi_partner = V(-i V^-1 xi)
    double block_error = 0.0;     // max 2x2 block residual of H H*
    double lambda_top = 0.0;
    double lambda_bottom = 0.0;
    double tol = 1e-8;

    bool all_ok() const {
        return eta1_error <= tol && pairing_error <= tol && xi_relation_error <= tol &&
               block_error <= tol;
    }
};

EigenstructureReport verify_eigenstructure(const LinearizationPoint& point,
                                           const MeasurementOp& op, double tol = 1e-8);

// ---------------------------------------------------------------------------
// Aggregated report

struct SpectralReport {
    std::vector<double> lambda;  // truncated to the top 64
    double lambda2 = 1.0;
    double rho_star = 0.0;
    double rate_star = 1.0;
    std::vector<double> rho_grid;
    std::vector<double> predicted_rate;   // predicted second singular value per grid rho
    std::vector<double> measured_second;  // measured (dense mode only; empty otherwise)
};

SpectralReport analyze(const LinearizationPoint& point, const MeasurementOp& op, GapMode mode,
                       const std::vector<double>& rho_grid);

std::string report_to_json(const SpectralReport& report);

}  // namespace spectral
}  // namespace ptychodr
