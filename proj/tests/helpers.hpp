#pragma once

#include <Eigen/Dense>

#include "ptychodr/forward.hpp"
#include "ptychodr/grids.hpp"
#include "ptychodr/rng.hpp"

namespace testutil {

using namespace ptychodr;

inline ComplexGrid random_grid(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    ComplexGrid g(rows, cols);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = Complex(rng.normal(), rng.normal());
    return g;
}

inline ComplexGrid random_transform_vector(const MeasurementOp& op, Rng& rng) {
    return random_grid(op.transform_rows(), op.pattern_size(), rng);
}

inline Eigen::VectorXcd flatten(const ComplexGrid& g) {
    return Eigen::Map<const Eigen::VectorXcd>(g.data(), g.size());
}

inline ComplexGrid unflatten(const Eigen::VectorXcd& v, Eigen::Index rows, Eigen::Index cols) {
    ComplexGrid g(rows, cols);
    Eigen::Map<Eigen::VectorXcd>(g.data(), g.size()) = v;
    return g;
}

// Dense matrix of the operator, one forward per domain pixel.
inline Eigen::MatrixXcd dense_matrix(const MeasurementOp& op) {
    const Eigen::Index cols = static_cast<Eigen::Index>(op.domain_rows) * op.domain_cols;
    Eigen::MatrixXcd a(op.transform_size(), cols);
    ComplexGrid basis = ComplexGrid::Zero(op.domain_rows, op.domain_cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        basis.data()[j] = Complex(1.0, 0.0);
        a.col(j) = flatten(forward(op, basis));
        basis.data()[j] = Complex(0.0, 0.0);
    }
    return a;
}

// Moore-Penrose pseudo-inverse by SVD.
inline Eigen::MatrixXcd svd_pinv(const Eigen::MatrixXcd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd inv = sv;
    const double cutoff = sv.size() > 0 ? sv[0] * 1e-12 : 0.0;
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = sv[i] > cutoff ? 1.0 / sv[i] : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

// Two coded diffraction patterns: a plane wave and one random phase mask.
inline MeasurementOp two_pattern_op(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ComplexGrid> masks;
    masks.push_back(ComplexGrid::Constant(n, n, Complex(1.0, 0.0)));
    ComplexGrid coded(n, n);
    for (Eigen::Index i = 0; i < coded.size(); ++i) {
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        coded.data()[i] = Complex(std::cos(theta), std::sin(theta));
    }
    masks.push_back(std::move(coded));
    return make_mask_op(masks);
}

// Golden-section minimization, independent of the library search code.
template <typename F>
double golden_min(F f, double lo, double hi, int iters = 200) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 > f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return f1 < f2 ? x1 : x2;
}

}  // namespace testutil
