#include "ptychodr/metrics.hpp"

#include <cmath>
#include <vector>

#include "ptychodr/errors.hpp"

namespace ptychodr {
namespace metrics {
namespace {

// |<ramped f_est, f_true>| for ramp slope r; the optimal alpha and the
// residual follow in closed form from this correlation.
double ramp_correlation(const ComplexGrid& m, double r1, double r2, double sign,
                        Complex* value = nullptr) {
    const auto rows = m.rows();
    const auto cols = m.cols();
    Complex acc(0.0, 0.0);
    for (Eigen::Index j = 0; j < rows; ++j) {
        const double pr = -sign * 2.0 * M_PI * static_cast<double>(j) * r1 /
                          static_cast<double>(rows);
        Complex row_sum(0.0, 0.0);
        for (Eigen::Index k = 0; k < cols; ++k) {
            const double pc = -sign * 2.0 * M_PI * static_cast<double>(k) * r2 /
                              static_cast<double>(cols);
            row_sum += m(j, k) * Complex(std::cos(pc), std::sin(pc));
        }
        acc += row_sum * Complex(std::cos(pr), std::sin(pr));
    }
    if (value) *value = acc;
    return std::abs(acc);
}

// Golden-section maximization of a unimodal 1D slice.
template <typename F>
double golden_max(F f, double lo, double hi, int iters = 60) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
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
    return f1 > f2 ? x1 : x2;
}

// Sample-then-polish maximization over [center-1/2, center+1/2]; the coarse
// sampling guards against the slice being multimodal across the interval.
template <typename F>
double refine_axis(F f, double center) {
    const int samples = 21;
    double best_x = center;
    double best_f = f(center);
    for (int i = 0; i < samples; ++i) {
        const double x = center - 0.5 + static_cast<double>(i) / (samples - 1);
        const double v = f(x);
        if (v > best_f) {
            best_f = v;
            best_x = x;
        }
    }
    const double h = 0.5 / (samples - 1);
    return golden_max(f, best_x - h, best_x + h);
}

std::pair<double, AlignmentResult> re_aligned(const ComplexGrid& f_true, const ComplexGrid& f_est,
                                              int window, double sign) {
    check_same_shape(f_true.rows(), f_true.cols(), f_est.rows(), f_est.cols(), "re");
    const double true_norm = f_true.norm();
    if (true_norm == 0.0) throw UndefinedMetricError("re: reference image is zero");
    const double est_norm2 = f_est.squaredNorm();
    if (est_norm2 == 0.0) {
        AlignmentResult align;
        align.residual = true_norm;
        return {1.0, align};
    }

    // correlation kernel conj(f_est) (.) f_true, shared by all candidates
    const ComplexGrid m = f_est.conjugate().cwiseProduct(f_true);

    const int span = 2 * window + 1;
    std::vector<double> corr(static_cast<std::size_t>(span) * span);
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < span; ++i)
        for (int j = 0; j < span; ++j)
            corr[static_cast<std::size_t>(i) * span + j] =
                ramp_correlation(m, i - window, j - window, sign);
    // pick the winner in fixed order so ties resolve deterministically
    std::size_t best_idx = 0;
    for (std::size_t idx = 1; idx < corr.size(); ++idx)
        if (corr[idx] > corr[best_idx]) best_idx = idx;
    const int best_r1 = static_cast<int>(best_idx) / span - window;
    const int best_r2 = static_cast<int>(best_idx) % span - window;

    double r1 = best_r1, r2 = best_r2;
    for (int pass = 0; pass < 2; ++pass) {
        r1 = refine_axis([&](double x) { return ramp_correlation(m, x, r2, sign); }, r1);
        r2 = refine_axis([&](double x) { return ramp_correlation(m, r1, x, sign); }, r2);
    }

    Complex corr_value;
    ramp_correlation(m, r1, r2, sign, &corr_value);
    AlignmentResult align;
    align.alpha = corr_value / est_norm2;
    align.ramp = Eigen::Vector2d(r1, r2);
    // evaluate the residual explicitly; the closed form loses all digits
    // once the aligned estimate is within sqrt(eps) of the reference
    double res2 = 0.0;
    for (Eigen::Index j = 0; j < f_true.rows(); ++j) {
        const double pr = sign * 2.0 * M_PI * static_cast<double>(j) * r1 /
                          static_cast<double>(f_true.rows());
        for (Eigen::Index k = 0; k < f_true.cols(); ++k) {
            const double pc = sign * 2.0 * M_PI * static_cast<double>(k) * r2 /
                              static_cast<double>(f_true.cols());
            const Complex ramp(std::cos(pr + pc), std::sin(pr + pc));
            res2 += std::norm(f_true(j, k) - align.alpha * ramp * f_est(j, k));
        }
    }
    align.residual = std::sqrt(res2);
    return {align.residual / true_norm, align};
}

}  // namespace

std::pair<double, AlignmentResult> re(const ComplexGrid& f_true, const ComplexGrid& f_est,
                                      int window) {
    return re_aligned(f_true, f_est, window, 1.0);
}

std::pair<double, AlignmentResult> probe_re(const ComplexGrid& mu_true, const ComplexGrid& mu_est,
                                            int window) {
    return re_aligned(mu_true, mu_est, window, -1.0);
}

double re2(const ComplexGrid& f_true, const ComplexGrid& f_est) {
    check_same_shape(f_true.rows(), f_true.cols(), f_est.rows(), f_est.cols(), "re2");
    const double true_norm = f_true.norm();
    if (true_norm == 0.0) throw UndefinedMetricError("re2: reference image is zero");
    const Complex ip = f_est.conjugate().cwiseProduct(f_true).sum();
    const Complex phase = sgn(ip);
    return (f_true - phase * f_est).norm() / true_norm;
}

double rr(const RealGrid& b, const MeasurementOp& op, const ComplexGrid& f_est) {
    const double b_norm = b.norm();
    if (b_norm == 0.0) throw UndefinedMetricError("rr: zero data");
    const RealGrid mags = forward(op, f_est).cwiseAbs();
    return (b - mags).norm() / b_norm;
}

double nsr(const RealGrid& b_noisy, const MeasurementOp& op, const ComplexGrid& f_true) {
    const RealGrid clean = forward(op, f_true).cwiseAbs();
    const double clean_norm = clean.norm();
    if (clean_norm == 0.0) throw UndefinedMetricError("nsr: zero clean signal");
    return (b_noisy - clean).norm() / clean_norm;
}

}  // namespace metrics
}  // namespace ptychodr
