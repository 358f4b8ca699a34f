#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "ptychodr/errors.hpp"

namespace ptychodr {

// Dense row-major 2D arrays are the universal carrier for objects, probes
// and transform-domain vectors. All modules agree on (row, col) indexing.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Complex = std::complex<double>;
using ComplexGrid = Grid<Complex>;
using RealGrid = Grid<double>;
using BoolGrid = Grid<bool>;

// Phase vector with the convention sgn(0) = 1. This makes the magnitude
// projection total but discontinuous at zeros; solvers must tolerate that.
inline Complex sgn(Complex z) {
    if (z == Complex(0.0, 0.0)) return Complex(1.0, 0.0);
    return z / std::abs(z);
}

template <typename Scalar>
Grid<Scalar> sgn(const Grid<Scalar>& u) {
    return u.unaryExpr([](Scalar z) { return static_cast<Scalar>(sgn(Complex(z))); });
}

inline void check_same_shape(const Eigen::Index ar, const Eigen::Index ac,
                             const Eigen::Index br, const Eigen::Index bc,
                             const char* what) {
    if (ar != br || ac != bc) {
        throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(ar) +
                             "x" + std::to_string(ac) + " vs " + std::to_string(br) + "x" +
                             std::to_string(bc) + ")");
    }
}

// Entrywise (Hadamard) product with an explicit shape check.
template <typename Scalar>
Grid<Scalar> hadamard(const Grid<Scalar>& a, const Grid<Scalar>& b) {
    check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "hadamard");
    return a.cwiseProduct(b);
}

// Euclidean norm sqrt(sum |u[j]|^2).
template <typename Scalar>
double norm2(const Grid<Scalar>& u) {
    return u.norm();
}

template <typename Scalar>
bool all_finite(const Grid<Scalar>& u) {
    return u.allFinite();
}

template <typename Scalar>
void ensure_finite(const Grid<Scalar>& u, const char* what) {
    if (!all_finite(u)) throw NumericalFailure(std::string(what) + ": non-finite entries");
}

}  // namespace ptychodr
