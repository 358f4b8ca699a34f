#include "ptychodr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ptychodr/errors.hpp"
#include "ptychodr/rng.hpp"

namespace ptychodr {
namespace spectral {
namespace {

constexpr int kDenseRealDimCap = 20000;
constexpr double kClusterTol = 1e-6;

void check_dense_capacity(const MeasurementOp& op) {
    const auto real_dim = 2 * op.transform_size();
    if (real_dim > kDenseRealDimCap)
        throw CapacityError("dense spectral mode needs " + std::to_string(real_dim) +
                            " real dimensions, cap is " + std::to_string(kDenseRealDimCap) +
                            "; use power mode");
}

Eigen::VectorXd flatten_ri(const ComplexGrid& g) {
    const auto n = g.size();
    Eigen::VectorXd v(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = g.data()[i].real();
        v[n + i] = g.data()[i].imag();
    }
    return v;
}

ComplexGrid unflatten_ri(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    ComplexGrid g(rows, cols);
    const auto n = g.size();
    for (Eigen::Index i = 0; i < n; ++i) g.data()[i] = Complex(v[i], v[n + i]);
    return g;
}

RealGrid gram_sqrt(const MeasurementOp& op) {
    RealGrid s(op.gram.rows(), op.gram.cols());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double g = op.gram.data()[i];
        if (g <= 0.0)
            throw SingularGramError("spectral: operator Gram vanishes; A must have full rank");
        s.data()[i] = std::sqrt(g);
    }
    return s;
}

// H w and H* r through the operator, without forming the dense matrix.
ComplexGrid apply_h(const LinearizationPoint& point, const MeasurementOp& op, const RealGrid& gsqrt,
                    const ComplexGrid& w) {
    const ComplexGrid scaled = w.cwiseQuotient(gsqrt.cast<Complex>());
    return point.omega.conjugate().cwiseProduct(forward(op, scaled));
}

ComplexGrid apply_h_adjoint(const LinearizationPoint& point, const MeasurementOp& op,
                            const RealGrid& gsqrt, const ComplexGrid& r) {
    const ComplexGrid back = adjoint(op, point.omega.cwiseProduct(r));
    return back.cwiseQuotient(gsqrt.cast<Complex>());
}

// Degenerate singular values grouped before any vector-wise comparison.
std::vector<std::pair<int, int>> cluster_ranges(const std::vector<double>& lambda) {
    std::vector<std::pair<int, int>> ranges;
    const int total = static_cast<int>(lambda.size());
    int start = 0;
    for (int i = 1; i <= total; ++i) {
        if (i == total || lambda[static_cast<std::size_t>(start)] -
                              lambda[static_cast<std::size_t>(i)] > kClusterTol) {
            ranges.emplace_back(start, i);
            start = i;
        }
    }
    return ranges;
}

}  // namespace

LinearizationPoint linearization_point(const MeasurementOp& op, const ComplexGrid& f_object) {
    LinearizationPoint point;
    point.x = forward(op, f_object);
    point.b = point.x.cwiseAbs();
    point.omega = sgn(point.x);
    for (Eigen::Index i = 0; i < point.x.size(); ++i) {
        if (point.b.data()[i] > 0.0 && point.x.data()[i] == Complex(0.0, 0.0))
            throw NumericalFailure("linearization: vanishing solution entry");
    }
    return point;
}

LinearizationPoint linearization_point_from_iterate(const MeasurementOp& op, const ComplexGrid& u,
                                                    const RealGrid& b, double tol) {
    const ComplexGrid x = project_range(op, u);
    const double b_norm = b.norm();
    if (b_norm == 0.0) throw NumericalFailure("linearization: zero data");
    const double residual = (x.cwiseAbs() - b).norm() / b_norm;
    if (residual > tol)
        throw NumericalFailure("linearization: iterate is not a regular solution (|x| residual " +
                               std::to_string(residual) + ")");
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (b.data()[i] > 0.0 && std::abs(x.data()[i]) == 0.0)
            throw NumericalFailure("linearization: degenerate fixed point (vanishing entry)");
    }
    LinearizationPoint point;
    point.x = x;
    point.b = b;
    point.omega = sgn(x);
    return point;
}

Eigen::MatrixXcd build_isometry(const LinearizationPoint& point, const MeasurementOp& op) {
    check_dense_capacity(op);
    const RealGrid gsqrt = gram_sqrt(op);
    const auto rows = op.transform_size();
    const auto cols = static_cast<Eigen::Index>(op.domain_rows) * op.domain_cols;
    Eigen::MatrixXcd h(rows, cols);
    ComplexGrid basis = ComplexGrid::Zero(op.domain_rows, op.domain_cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        basis.data()[j] = Complex(1.0, 0.0);
        const ComplexGrid column = apply_h(point, op, gsqrt, basis);
        basis.data()[j] = Complex(0.0, 0.0);
        for (Eigen::Index i = 0; i < rows; ++i) h(i, j) = column.data()[i];
    }
    return h;
}

Eigen::MatrixXd build_real_isometry(const Eigen::MatrixXcd& h) {
    Eigen::MatrixXd out(h.rows(), 2 * h.cols());
    out.leftCols(h.cols()) = h.real();
    out.rightCols(h.cols()) = -h.imag();
    return out;
}

IsometrySpectrum isometry_spectrum(const LinearizationPoint& point, const MeasurementOp& op) {
    const Eigen::MatrixXd calh = build_real_isometry(build_isometry(point, op));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(calh, Eigen::ComputeThinU | Eigen::ComputeThinV);
    IsometrySpectrum spectrum;
    spectrum.lambda.assign(svd.singularValues().data(),
                           svd.singularValues().data() + svd.singularValues().size());
    spectrum.eta = svd.matrixU();
    spectrum.xi = svd.matrixV();
    return spectrum;
}

double spectral_gap(const LinearizationPoint& point, const MeasurementOp& op, GapMode mode) {
    if (mode == GapMode::dense) {
        const IsometrySpectrum spectrum = isometry_spectrum(point, op);
        if (spectrum.lambda.size() < 2)
            throw NumericalFailure("spectral_gap: fewer than two singular values");
        return spectrum.lambda[1];
    }

    const RealGrid gsqrt = gram_sqrt(op);
    const auto rows = static_cast<Eigen::Index>(op.domain_rows);
    const auto cols = static_cast<Eigen::Index>(op.domain_cols);

    // known top vector: the solution in normalized coordinates
    const ComplexGrid f_hat =
        pseudo_inverse_apply(op, point.x).cwiseProduct(gsqrt.cast<Complex>());
    Eigen::VectorXd xi1 = flatten_ri(f_hat);
    xi1.normalize();

    auto apply_m = [&](const Eigen::VectorXd& v) {
        const ComplexGrid w = unflatten_ri(v, rows, cols);
        const ComplexGrid hw = apply_h(point, op, gsqrt, w);
        const ComplexGrid real_part = hw.real().cast<Complex>();
        return flatten_ri(apply_h_adjoint(point, op, gsqrt, real_part));
    };

    Rng rng(12345);
    Eigen::VectorXd v(2 * rows * cols);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v -= xi1 * xi1.dot(v);
    v.normalize();

    const int cap = 10000;
    const double tol = 1e-9;
    double estimate = 0.0;
    std::vector<double> history;
    for (int iter = 0; iter < cap; ++iter) {
        Eigen::VectorXd t = apply_m(v);
        t -= xi1 * xi1.dot(t);
        const double rayleigh = v.dot(t);
        history.push_back(rayleigh);
        const double t_norm = t.norm();
        if (t_norm == 0.0) return 0.0;
        v = t / t_norm;
        if (iter > 0 && std::abs(rayleigh - estimate) <= tol)
            return std::sqrt(std::max(0.0, rayleigh));
        estimate = rayleigh;
    }
    std::ostringstream tail;
    tail.precision(12);
    for (std::size_t i = history.size() >= 5 ? history.size() - 5 : 0; i < history.size(); ++i)
        tail << " " << history[i];
    throw NumericalFailure("spectral_gap: power iteration did not converge in " +
                           std::to_string(cap) + " steps; trailing Rayleigh quotients:" +
                           tail.str());
}

ComplexGrid jacobian_apply(const LinearizationPoint& point, const MeasurementOp& op, double rho,
                           const ComplexGrid& eta) {
    if (rho < 0.0) throw ConfigError("jacobian_apply: rho must be >= 0");
    check_same_shape(eta.rows(), eta.cols(), point.x.rows(), point.x.cols(), "jacobian_apply");
    // R tilde = Omega* R_X Omega
    const ComplexGrid lifted = point.omega.cwiseProduct(eta);
    const ComplexGrid px = project_range(op, lifted);
    const ComplexGrid rx = 2.0 * px - lifted;
    const ComplexGrid tilde = point.omega.conjugate().cwiseProduct(rx);

    ComplexGrid out(eta.rows(), eta.cols());
    const double c1 = (rho - 1.0) / (2.0 * (rho + 1.0));
    const double c2 = 1.0 / (rho + 1.0);
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double mag = std::abs(point.x.data()[i]);
        const double b_val = point.b.data()[i];
        double weight = 0.0;
        if (b_val > 0.0) {
            if (mag == 0.0)
                throw SingularGramError("jacobian_apply: vanishing |x| where b > 0");
            weight = b_val / mag;
        }
        out.data()[i] = 0.5 * eta.data()[i] + c1 * tilde.data()[i] +
                        Complex(0.0, c2 * weight * tilde.data()[i].imag());
    }
    return out;
}

Eigen::MatrixXd jacobian_matrix(const LinearizationPoint& point, const MeasurementOp& op,
                                double rho) {
    check_dense_capacity(op);
    const auto rows = point.x.rows();
    const auto cols = point.x.cols();
    const auto n = point.x.size();
    Eigen::MatrixXd j(2 * n, 2 * n);
    ComplexGrid basis = ComplexGrid::Zero(rows, cols);
    for (Eigen::Index k = 0; k < n; ++k) {
        basis.data()[k] = Complex(1.0, 0.0);
        j.col(k) = flatten_ri(jacobian_apply(point, op, rho, basis));
        basis.data()[k] = Complex(0.0, 1.0);
        j.col(n + k) = flatten_ri(jacobian_apply(point, op, rho, basis));
        basis.data()[k] = Complex(0.0, 0.0);
    }
    return j;
}

std::vector<double> jacobian_spectrum(const LinearizationPoint& point, const MeasurementOp& op,
                                      double rho) {
    const Eigen::MatrixXd j = jacobian_matrix(point, op, rho);
    Eigen::EigenSolver<Eigen::MatrixXd> eigen(j, /*computeEigenvectors=*/false);
    std::vector<double> moduli(static_cast<std::size_t>(eigen.eigenvalues().size()));
    for (Eigen::Index i = 0; i < eigen.eigenvalues().size(); ++i)
        moduli[static_cast<std::size_t>(i)] = std::abs(eigen.eigenvalues()[i]);
    std::sort(moduli.begin(), moduli.end(), std::greater<double>());
    return moduli;
}

std::vector<double> closed_form_jacobian_spectrum(const std::vector<double>& lambda,
                                                  Eigen::Index transform_size, double rho) {
    const std::size_t pairs = lambda.size();
    std::vector<double> out;
    out.reserve(2 * pairs + 2 * static_cast<std::size_t>(transform_size));
    for (std::size_t k = 0; k < pairs; ++k) {
        const double lk = lambda[k];
        const double lp = lambda[pairs - 1 - k];
        const double disc = rho * rho - 4.0 * lk * lk * lp * lp;
        if (disc >= 0.0) {
            const double root = std::sqrt(disc);
            out.push_back((rho + 2.0 * lp * lp + root) / (2.0 * (rho + 1.0)));
            out.push_back(std::abs(rho + 2.0 * lp * lp - root) / (2.0 * (rho + 1.0)));
        } else {
            const double modulus = lp / std::sqrt(1.0 + rho);
            out.push_back(modulus);
            out.push_back(modulus);
        }
    }
    const auto rest = static_cast<std::size_t>(transform_size) - pairs;
    for (std::size_t i = 0; i < rest; ++i) {
        out.push_back(1.0 / (rho + 1.0));
        out.push_back(0.0);
    }
    std::sort(out.begin(), out.end(), std::greater<double>());
    return out;
}

OptimalRho optimal_rho(double lambda2) {
    if (lambda2 < std::sqrt(0.5) - 1e-12 || lambda2 > 1.0 + 1e-12)
        throw ConfigError("optimal_rho: lambda2 must lie in [sqrt(1/2), 1]");
    lambda2 = std::clamp(lambda2, std::sqrt(0.5), 1.0);
    OptimalRho result;
    result.rho_star = 2.0 * lambda2 * std::sqrt(1.0 - lambda2 * lambda2);
    result.rate_star = lambda2 / std::sqrt(1.0 + result.rho_star);
    return result;
}

double predicted_second_singular(double lambda2, double rho) {
    if (rho < 0.0) throw ConfigError("predicted_second_singular: rho must be >= 0");
    const double rho_star = 2.0 * lambda2 * std::sqrt(1.0 - lambda2 * lambda2);
    if (rho <= rho_star) return lambda2 / std::sqrt(1.0 + rho);
    const double disc = rho * rho - 4.0 * lambda2 * lambda2 * (1.0 - lambda2 * lambda2);
    return (rho + 2.0 * lambda2 * lambda2 + std::sqrt(std::max(0.0, disc))) / (2.0 * (rho + 1.0));
}

EigenstructureReport verify_eigenstructure(const LinearizationPoint& point,
                                           const MeasurementOp& op, double tol) {
    const Eigen::MatrixXcd h = build_isometry(point, op);
    const Eigen::MatrixXd calh = build_real_isometry(h);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(calh, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const Eigen::MatrixXd eta = svd.matrixU();
    const Eigen::MatrixXd xi = svd.matrixV();
    const auto pairs = sv.size();  // 2 * domain size
    const auto d = pairs / 2;

    EigenstructureReport report;
    report.tol = tol;
    report.lambda_top = sv[0];
    report.lambda_bottom = sv[pairs - 1];

    // (a) top data-side vector is b up to normalization and sign
    {
        Eigen::VectorXd b_vec(calh.rows());
        for (Eigen::Index i = 0; i < b_vec.size(); ++i) b_vec[i] = point.b.data()[i];
        b_vec.normalize();
        const double sign = eta.col(0).dot(b_vec) >= 0.0 ? 1.0 : -1.0;
        report.eta1_error = (sign * eta.col(0) - b_vec).norm();
    }

    // (b) complementary pairing of the singular values
    for (Eigen::Index k = 0; k < pairs; ++k) {
        const double defect = std::abs(sv[k] * sv[k] + sv[pairs - 1 - k] * sv[pairs - 1 - k] - 1.0);
        report.pairing_error = std::max(report.pairing_error, defect);
    }

    // (c) xi_{partner} spans V(-i V^-1(xi_k)), compared cluster against
    // cluster through principal angles
    std::vector<double> lambda_list(sv.data(), sv.data() + pairs);
    const auto clusters = cluster_ranges(lambda_list);
    for (const auto& [lo, hi] : clusters) {
        const int width = hi - lo;
        Eigen::MatrixXd mapped(pairs, width);
        for (int k = lo; k < hi; ++k) {
            // V(-i V^-1(xi)) swaps the halves: (re, im) -> (im, -re)
            mapped.col(k - lo).head(d) = xi.col(k).tail(d);
            mapped.col(k - lo).tail(d) = -xi.col(k).head(d);
        }
        Eigen::MatrixXd partner(pairs, width);
        for (int k = lo; k < hi; ++k)
            partner.col(k - lo) = xi.col(pairs - 1 - static_cast<Eigen::Index>(k));
        const Eigen::MatrixXd overlap = mapped.transpose() * partner;
        Eigen::BDCSVD<Eigen::MatrixXd> angles(overlap);
        const double smallest = angles.singularValues().minCoeff();
        report.xi_relation_error = std::max(report.xi_relation_error, std::abs(1.0 - smallest));
    }

    // (d) H H* acts as the 2x2 block [[l^2, l l'], [l l', l'^2]] on
    // span{eta_k, i eta_partner}
    const Eigen::MatrixXcd hh = h * h.adjoint();
    for (const auto& [lo, hi] : clusters) {
        for (int k = lo; k < hi; ++k) {
            const double lk = sv[k];
            const double lp = sv[pairs - 1 - k];
            const Eigen::VectorXcd v = hh * eta.col(k).cast<Complex>();
            const Eigen::VectorXd re_defect = v.real() - lk * lk * eta.col(k);
            double err = re_defect.norm();
            // imaginary part: magnitude lk*lp inside the partner cluster span
            Eigen::VectorXd im = v.imag();
            int plo = static_cast<int>(pairs) - hi, phi = static_cast<int>(pairs) - lo;
            Eigen::VectorXd proj = Eigen::VectorXd::Zero(im.size());
            for (int p = plo; p < phi; ++p) proj += eta.col(p).dot(im) * eta.col(p);
            err = std::max(err, (im - proj).norm());
            err = std::max(err, std::abs(im.norm() - lk * lp));
            report.block_error = std::max(report.block_error, err);
        }
    }
    return report;
}

SpectralReport analyze(const LinearizationPoint& point, const MeasurementOp& op, GapMode mode,
                       const std::vector<double>& rho_grid) {
    SpectralReport report;
    if (mode == GapMode::dense) {
        const IsometrySpectrum spectrum = isometry_spectrum(point, op);
        report.lambda.assign(spectrum.lambda.begin(),
                             spectrum.lambda.begin() +
                                 std::min<std::size_t>(spectrum.lambda.size(), 64));
        report.lambda2 = spectrum.lambda.at(1);
        for (double rho : rho_grid) {
            const auto measured = jacobian_spectrum(point, op, rho);
            report.measured_second.push_back(measured.size() > 1 ? measured[1] : 0.0);
        }
    } else {
        report.lambda2 = spectral_gap(point, op, GapMode::power);
        report.lambda = {1.0, report.lambda2};
    }
    const OptimalRho opt = optimal_rho(report.lambda2);
    report.rho_star = opt.rho_star;
    report.rate_star = opt.rate_star;
    report.rho_grid = rho_grid;
    for (double rho : rho_grid)
        report.predicted_rate.push_back(predicted_second_singular(report.lambda2, rho));
    return report;
}

std::string report_to_json(const SpectralReport& report) {
    nlohmann::json j;
    j["lambda"] = report.lambda;
    j["lambda2"] = report.lambda2;
    j["rho_star"] = report.rho_star;
    j["rate_star"] = report.rate_star;
    j["rho_grid"] = report.rho_grid;
    j["predicted_rate"] = report.predicted_rate;
    if (!report.measured_second.empty()) j["measured_second"] = report.measured_second;
    return j.dump(2);
}

}  // namespace spectral
}  // namespace ptychodr
