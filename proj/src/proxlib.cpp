#include "ptychodr/proxlib.hpp"

#include <cmath>
#include <string>

#include "ptychodr/errors.hpp"

namespace ptychodr {

double loss(LossVariant variant, const ComplexGrid& u, const RealGrid& b) {
    check_same_shape(u.rows(), u.cols(), b.rows(), b.cols(), "loss");
    double total = 0.0;
    if (variant == LossVariant::gaussian) {
        for (Eigen::Index r = 0; r < u.rows(); ++r) {
            for (Eigen::Index c = 0; c < u.cols(); ++c) {
                const double d = std::abs(u(r, c)) - b(r, c);
                total += 0.5 * d * d;
            }
        }
        return total;
    }
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            const double mag2 = std::norm(u(r, c));
            const double b2 = b(r, c) * b(r, c);
            if (b2 > 0.0 && mag2 == 0.0) {
                throw NumericalFailure("poisson loss: log of zero magnitude at entry (" +
                                       std::to_string(r) + "," + std::to_string(c) + ")");
            }
            total += mag2;
            if (b2 > 0.0) total -= b2 * std::log(mag2);
        }
    }
    return total;
}

ComplexGrid project_magnitude(const ComplexGrid& u, const RealGrid& b) {
    check_same_shape(u.rows(), u.cols(), b.rows(), b.cols(), "project_magnitude");
    ComplexGrid out(u.rows(), u.cols());
    for (Eigen::Index r = 0; r < u.rows(); ++r)
        for (Eigen::Index c = 0; c < u.cols(); ++c) out(r, c) = b(r, c) * sgn(u(r, c));
    return out;
}

ComplexGrid prox_gaussian(const ComplexGrid& u, const RealGrid& b, double rho) {
    check_same_shape(u.rows(), u.cols(), b.rows(), b.cols(), "prox_gaussian");
    if (rho < 0.0) throw ConfigError("prox_gaussian: rho must be >= 0");
    ComplexGrid out(u.rows(), u.cols());
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            const double mag = (b(r, c) + rho * std::abs(u(r, c))) / (rho + 1.0);
            out(r, c) = mag * sgn(u(r, c));
        }
    }
    return out;
}

ComplexGrid prox_poisson(const ComplexGrid& u, const RealGrid& b, double rho) {
    check_same_shape(u.rows(), u.cols(), b.rows(), b.cols(), "prox_poisson");
    if (rho <= 0.0) throw ConfigError("prox_poisson: rho must be > 0");
    ComplexGrid out(u.rows(), u.cols());
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            const double mag = std::abs(u(r, c));
            const double disc = rho * rho * mag * mag + 8.0 * (rho + 2.0) * b(r, c) * b(r, c);
            const double root = (rho * mag + std::sqrt(disc)) / (2.0 * (rho + 2.0));
            out(r, c) = root * sgn(u(r, c));
        }
    }
    return out;
}

ComplexGrid relaxed_reflect(LossVariant variant, const ComplexGrid& u, const RealGrid& b,
                            double rho) {
    const ComplexGrid prox = variant == LossVariant::gaussian ? prox_gaussian(u, b, rho)
                                                              : prox_poisson(u, b, rho);
    return 2.0 * prox - u;
}

}  // namespace ptychodr
