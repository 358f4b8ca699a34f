#pragma once

#include <utility>

#include <Eigen/Dense>

#include "ptychodr/forward.hpp"
#include "ptychodr/grids.hpp"

namespace ptychodr {
namespace metrics {

struct AlignmentResult {
    Complex alpha{0.0, 0.0};
    Eigen::Vector2d ramp{0.0, 0.0};
    double residual = 0.0;  // objective value at (alpha, ramp)
};

// Relative error modulo a complex scale and a linear phase ramp:
//   min over alpha, r of ||f - alpha exp(-i 2 pi n.r / n) f_est|| / ||f||.
// Coarse search over integer ramps |r_i| <= window (the periodic boundary
// makes integer ramps dominant), then per-axis refinement over +-1/2.
// The reported r is the ramp carried by the estimate.
std::pair<double, AlignmentResult> re(const ComplexGrid& f_true, const ComplexGrid& f_est,
                                      int window = 8);

// Relative error modulo a constant phase only (amplitude not discounted):
//   min over theta of ||f - exp(i theta) f_est|| / ||f||.
double re2(const ComplexGrid& f_true, const ComplexGrid& f_est);

// Relative residual ||b - |A f_est||| / ||b||.
double rr(const RealGrid& b, const MeasurementOp& op, const ComplexGrid& f_est);

// Noise-to-signal ratio ||b_noisy - |A f_true||| / |||A f_true|||.
double nsr(const RealGrid& b_noisy, const MeasurementOp& op, const ComplexGrid& f_true);

// Probe counterpart of re: identical search with the ramp sign conjugated,
// so a recovered object ramp r pairs with probe ramp r.
std::pair<double, AlignmentResult> probe_re(const ComplexGrid& mu_true, const ComplexGrid& mu_est,
                                            int window = 8);

}  // namespace metrics
}  // namespace ptychodr
