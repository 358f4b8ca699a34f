#pragma once

#include "ptychodr/grids.hpp"

namespace ptychodr {

// Data-fidelity losses on the measured magnitudes b, evaluated in the
// transform domain. rho is the single relaxation parameter everywhere
// (step size 1/rho in proximal terms).
enum class LossVariant { gaussian, poisson };

struct LossKind {
    LossVariant variant = LossVariant::gaussian;
    double rho = 1.0;
};

// gaussian: 0.5 * || |u| - b ||^2
// poisson:  sum_i |u[i]|^2 - b^2[i] log |u[i]|^2   (terms with b[i]=0 drop)
double loss(LossVariant variant, const ComplexGrid& u, const RealGrid& b);

// Magnitude projection P_Y u = b (.) sgn(u); |result| = b exactly.
ComplexGrid project_magnitude(const ComplexGrid& u, const RealGrid& b);

// prox of gaussian/rho: entrywise (b + rho|u|)/(rho+1) (.) sgn(u).
ComplexGrid prox_gaussian(const ComplexGrid& u, const RealGrid& b, double rho);

// prox of poisson/rho: magnitude r solves (2+rho) r^2 - rho|u| r - 2 b^2 = 0,
// phase follows sgn(u). Requires rho > 0.
ComplexGrid prox_poisson(const ComplexGrid& u, const RealGrid& b, double rho);

// Reflector 2 prox - I for the selected loss; gaussian at rho=0 reduces to
// the plain magnitude reflector 2 P_Y - I.
ComplexGrid relaxed_reflect(LossVariant variant, const ComplexGrid& u, const RealGrid& b,
                            double rho);

}  // namespace ptychodr
