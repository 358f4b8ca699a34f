#include "ptychodr/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "ptychodr/errors.hpp"

namespace ptychodr {
namespace {

inline int imod(int a, int n) {
    int r = a % n;
    return r < 0 ? r + n : r;
}

ComplexGrid dft_factor(int m) {
    const int big = 2 * m - 1;
    ComplexGrid w(big, m);
    for (int j = 0; j < big; ++j) {
        for (int k = 0; k < m; ++k) {
            const double phase = -2.0 * M_PI * static_cast<double>(j) * static_cast<double>(k) /
                                 static_cast<double>(big);
            w(j, k) = Complex(std::cos(phase), std::sin(phase));
        }
    }
    return w;
}

ComplexGrid extract_window(const ComplexGrid& x, const Eigen::Vector2i& shift, int w) {
    const int nr = static_cast<int>(x.rows());
    const int nc = static_cast<int>(x.cols());
    if (shift.x() == 0 && shift.y() == 0 && w == nr && w == nc) return x;
    ComplexGrid patch(w, w);
    for (int r = 0; r < w; ++r) {
        const int gr = imod(shift.x() + r, nr);
        for (int c = 0; c < w; ++c) patch(r, c) = x(gr, imod(shift.y() + c, nc));
    }
    return patch;
}

void finalize_op(MeasurementOp& op) {
    op.dft = dft_factor(op.window);
    const double scale = static_cast<double>(op.pattern_size()) * op.pattern_size();
    op.gram = RealGrid::Zero(op.domain_rows, op.domain_cols);
    op.covered = Grid<std::uint8_t>::Zero(op.domain_rows, op.domain_cols);
    for (std::size_t p = 0; p < op.shifts.size(); ++p) {
        const auto& t = op.shifts[p];
        const auto& f = op.factors[p];
        for (int r = 0; r < op.window; ++r) {
            const int gr = imod(t.x() + r, op.domain_rows);
            for (int c = 0; c < op.window; ++c) {
                const int gc = imod(t.y() + c, op.domain_cols);
                op.gram(gr, gc) += scale * std::norm(f(r, c));
                op.covered(gr, gc) = 1;
            }
        }
    }
    const auto N = static_cast<long long>(op.transform_size());
    const long long dim = 2LL * op.domain_rows * op.domain_cols;
    if (op.side == MeasurementOp::Side::object && N <= dim) {
        op.underdetermined = true;
        std::fprintf(stderr,
                     "warning: measurement count %lld does not exceed 2x object dimension %lld; "
                     "recovery may be ill-posed\n",
                     N, dim);
    }
}

}  // namespace

ScanScheme make_scan(int n, int m, int tau, PerturbKind kind, int perturb_range,
                     std::uint64_t seed) {
    if (m < 2 || m >= n) throw ConfigError("make_scan: need 2 <= m < n");
    if (tau < 1) throw ConfigError("make_scan: need tau >= 1");
    if (perturb_range < 0) throw ConfigError("make_scan: perturb_range must be >= 0");
    if (n % tau != 0)
        throw ConfigError("make_scan: tau must divide n under the periodic boundary (n=" +
                          std::to_string(n) + ", tau=" + std::to_string(tau) + ")");
    const int q = n / tau;

    ScanScheme scheme;
    scheme.tau = tau;
    scheme.kind = perturb_range == 0 ? PerturbKind::none : kind;
    scheme.range = perturb_range;
    scheme.grid_rows = q;
    scheme.grid_cols = q;
    scheme.seed = seed;

    Rng rng(seed);
    const int max_attempts = 1000;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<Eigen::Vector2i> shifts;
        shifts.reserve(static_cast<std::size_t>(q) * q);
        if (scheme.kind == PerturbKind::rank_one && perturb_range > 0) {
            std::vector<int> drow(q), dcol(q);
            for (int k = 0; k < q; ++k)
                drow[k] = static_cast<int>(rng.uniform_int(-perturb_range, perturb_range));
            for (int l = 0; l < q; ++l)
                dcol[l] = static_cast<int>(rng.uniform_int(-perturb_range, perturb_range));
            for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l)
                    shifts.emplace_back(tau * k + drow[k], tau * l + dcol[l]);
        } else if (scheme.kind == PerturbKind::full_rank && perturb_range > 0) {
            for (int k = 0; k < q; ++k) {
                for (int l = 0; l < q; ++l) {
                    const int d1 = static_cast<int>(rng.uniform_int(-perturb_range, perturb_range));
                    const int d2 = static_cast<int>(rng.uniform_int(-perturb_range, perturb_range));
                    shifts.emplace_back(tau * k + d1, tau * l + d2);
                }
            }
        } else {
            for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l) shifts.emplace_back(tau * k, tau * l);
        }

        std::set<std::pair<int, int>> seen;
        bool duplicate = false;
        for (const auto& s : shifts)
            if (!seen.emplace(s.x(), s.y()).second) duplicate = true;
        if (duplicate) continue;  // perturbed shifts collided; re-draw

        int min_r = shifts[0].x(), min_c = shifts[0].y();
        for (const auto& s : shifts) {
            min_r = std::min(min_r, s.x());
            min_c = std::min(min_c, s.y());
        }
        for (auto& s : shifts) s -= Eigen::Vector2i(min_r, min_c);
        scheme.shifts = std::move(shifts);
        return scheme;
    }
    throw ConfigError("make_scan: could not draw duplicate-free shifts");
}

std::string scheme_to_json(const ScanScheme& scheme) {
    nlohmann::json j;
    j["tau"] = scheme.tau;
    switch (scheme.kind) {
        case PerturbKind::none: j["kind"] = "none"; break;
        case PerturbKind::rank_one: j["kind"] = "rank-one"; break;
        case PerturbKind::full_rank: j["kind"] = "full-rank"; break;
    }
    j["range"] = scheme.range;
    j["seed"] = scheme.seed;
    j["grid"] = {scheme.grid_rows, scheme.grid_cols};
    auto shifts = nlohmann::json::array();
    for (const auto& s : scheme.shifts) shifts.push_back({s.x(), s.y()});
    j["shifts"] = shifts;
    return j.dump(2);
}

ScanScheme scheme_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("scan scheme JSON parse error: ") + e.what());
    }
    ScanScheme scheme;
    scheme.tau = j.at("tau").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none")
        scheme.kind = PerturbKind::none;
    else if (kind == "rank-one")
        scheme.kind = PerturbKind::rank_one;
    else if (kind == "full-rank")
        scheme.kind = PerturbKind::full_rank;
    else
        throw IoError("unknown perturbation kind: " + kind);
    scheme.range = j.value("range", 0);
    scheme.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("grid")) {
        scheme.grid_rows = j["grid"][0].get<int>();
        scheme.grid_cols = j["grid"][1].get<int>();
    }
    for (const auto& s : j.at("shifts"))
        scheme.shifts.emplace_back(s[0].get<int>(), s[1].get<int>());
    return scheme;
}

MeasurementOp make_object_side_op(const ComplexGrid& probe, const ScanScheme& scheme, int n) {
    if (probe.rows() != probe.cols()) throw DimensionError("object-side op: probe must be square");
    const int m = static_cast<int>(probe.rows());
    if (m >= n) throw ConfigError("object-side op: need m < n");
    MeasurementOp op;
    op.side = MeasurementOp::Side::object;
    op.domain_rows = op.domain_cols = n;
    op.window = m;
    op.shifts = scheme.shifts;
    op.factors.assign(scheme.shifts.size(), probe);
    finalize_op(op);
    return op;
}

MeasurementOp make_probe_side_op(const ComplexGrid& object, const ScanScheme& scheme, int m) {
    if (object.rows() != object.cols()) throw DimensionError("probe-side op: object must be square");
    MeasurementOp op;
    op.side = MeasurementOp::Side::probe;
    op.domain_rows = op.domain_cols = m;
    op.window = m;
    op.shifts.assign(scheme.shifts.size(), Eigen::Vector2i(0, 0));
    op.factors.reserve(scheme.shifts.size());
    for (const auto& t : scheme.shifts) op.factors.push_back(extract_window(object, t, m));
    finalize_op(op);
    return op;
}

MeasurementOp make_mask_op(const std::vector<ComplexGrid>& masks) {
    if (masks.empty()) throw ConfigError("mask op: need at least one mask");
    const int n = static_cast<int>(masks.front().rows());
    for (const auto& mask : masks)
        check_same_shape(mask.rows(), mask.cols(), n, n, "mask op");
    MeasurementOp op;
    op.side = MeasurementOp::Side::masks;
    op.domain_rows = op.domain_cols = n;
    op.window = n;
    op.shifts.assign(masks.size(), Eigen::Vector2i(0, 0));
    op.factors = masks;
    finalize_op(op);
    return op;
}

ComplexGrid oversampled_dft(const ComplexGrid& patch) {
    if (patch.rows() != patch.cols()) throw DimensionError("oversampled_dft: square input required");
    const ComplexGrid w = dft_factor(static_cast<int>(patch.rows()));
    return w * patch * w.transpose();
}

ComplexGrid forward(const MeasurementOp& op, const ComplexGrid& x) {
    check_same_shape(x.rows(), x.cols(), op.domain_rows, op.domain_cols, "forward");
    const int big = op.pattern_size();
    ComplexGrid out(op.transform_rows(), big);
    const int count = op.pattern_count();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < count; ++p) {
        const ComplexGrid patch = extract_window(x, op.shifts[static_cast<std::size_t>(p)], op.window);
        const ComplexGrid masked = op.factors[static_cast<std::size_t>(p)].cwiseProduct(patch);
        out.block(static_cast<Eigen::Index>(p) * big, 0, big, big) =
            op.dft * masked * op.dft.transpose();
    }
    return out;
}

ComplexGrid adjoint(const MeasurementOp& op, const ComplexGrid& u) {
    check_same_shape(u.rows(), u.cols(), op.transform_rows(), op.pattern_size(), "adjoint");
    const int big = op.pattern_size();
    const int count = op.pattern_count();
    std::vector<ComplexGrid> partial(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
    for (int p = 0; p < count; ++p) {
        const auto block = u.block(static_cast<Eigen::Index>(p) * big, 0, big, big);
        partial[static_cast<std::size_t>(p)] =
            (op.dft.adjoint() * block * op.dft.conjugate())
                .cwiseProduct(op.factors[static_cast<std::size_t>(p)].conjugate());
    }
    // scatter-add in fixed pattern order so results are bit-stable
    ComplexGrid acc = ComplexGrid::Zero(op.domain_rows, op.domain_cols);
    for (int p = 0; p < count; ++p) {
        const auto& t = op.shifts[static_cast<std::size_t>(p)];
        const auto& g = partial[static_cast<std::size_t>(p)];
        for (int r = 0; r < op.window; ++r) {
            const int gr = imod(t.x() + r, op.domain_rows);
            for (int c = 0; c < op.window; ++c)
                acc(gr, imod(t.y() + c, op.domain_cols)) += g(r, c);
        }
    }
    return acc;
}

ComplexGrid pseudo_inverse_apply(const MeasurementOp& op, const ComplexGrid& u,
                                 Complex uncovered_fill) {
    ComplexGrid g = adjoint(op, u);
    for (int r = 0; r < op.domain_rows; ++r) {
        for (int c = 0; c < op.domain_cols; ++c) {
            if (!op.covered(r, c)) {
                g(r, c) = uncovered_fill;
            } else if (op.gram(r, c) <= 0.0) {
                throw SingularGramError("pseudo-inverse: zero Gram entry at pixel (" +
                                        std::to_string(r) + "," + std::to_string(c) + ")");
            } else {
                g(r, c) /= op.gram(r, c);
            }
        }
    }
    return g;
}

ComplexGrid project_range(const MeasurementOp& op, const ComplexGrid& u) {
    return forward(op, pseudo_inverse_apply(op, u));
}

MeasurementData measure(const MeasurementOp& op, const ComplexGrid& x, const NoiseModel& noise) {
    const ComplexGrid fx = forward(op, x);
    MeasurementData data;
    data.patterns = op.pattern_count();
    data.pattern_size = op.pattern_size();
    data.b = fx.cwiseAbs();
    if (noise.kind == NoiseModel::Kind::poisson) {
        if (noise.scale <= 0.0) throw ConfigError("measure: poisson scale must be > 0");
        Rng rng(noise.seed);
        const double clean_norm = data.b.norm();
        RealGrid noisy(data.b.rows(), data.b.cols());
        for (Eigen::Index r = 0; r < data.b.rows(); ++r) {
            for (Eigen::Index c = 0; c < data.b.cols(); ++c) {
                const double intensity = noise.scale * data.b(r, c) * data.b(r, c);
                const double draw = static_cast<double>(rng.poisson(intensity));
                noisy(r, c) = std::sqrt(draw / noise.scale);
            }
        }
        data.nsr = clean_norm > 0.0 ? (noisy - data.b).norm() / clean_norm : 0.0;
        data.b = std::move(noisy);
    }
    ensure_finite(data.b, "measure");
    return data;
}

ConnectivityReport connectivity_graph(const ScanScheme& scheme, const Grid<std::uint8_t>& support,
                                      int m) {
    const int n = static_cast<int>(support.rows());
    if (support.rows() != support.cols()) throw DimensionError("connectivity: support must be square");
    const int count = static_cast<int>(scheme.shifts.size());

    // per-pixel covering lists, then pairwise co-coverage counts
    std::vector<std::vector<int>> overlap(static_cast<std::size_t>(count),
                                          std::vector<int>(static_cast<std::size_t>(count), 0));
    std::vector<int> covering;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            if (!support(r, c)) continue;
            covering.clear();
            for (int p = 0; p < count; ++p) {
                const auto& t = scheme.shifts[static_cast<std::size_t>(p)];
                if (imod(r - t.x(), n) < m && imod(c - t.y(), n) < m) covering.push_back(p);
            }
            for (std::size_t i = 0; i < covering.size(); ++i)
                for (std::size_t j = i + 1; j < covering.size(); ++j)
                    ++overlap[static_cast<std::size_t>(covering[i])]
                             [static_cast<std::size_t>(covering[j])];
        }
    }

    ConnectivityReport report;
    report.component_of.assign(static_cast<std::size_t>(count), -1);
    int component = 0;
    std::vector<int> stack;
    for (int start = 0; start < count; ++start) {
        if (report.component_of[static_cast<std::size_t>(start)] >= 0) continue;
        stack.assign(1, start);
        report.component_of[static_cast<std::size_t>(start)] = component;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            for (int other = 0; other < count; ++other) {
                if (report.component_of[static_cast<std::size_t>(other)] >= 0) continue;
                const int shared = node < other
                                       ? overlap[static_cast<std::size_t>(node)]
                                                [static_cast<std::size_t>(other)]
                                       : overlap[static_cast<std::size_t>(other)]
                                                [static_cast<std::size_t>(node)];
                if (shared >= 2) {
                    report.component_of[static_cast<std::size_t>(other)] = component;
                    stack.push_back(other);
                }
            }
        }
        ++component;
    }
    report.num_components = component;
    report.connected = component == 1 && count > 0;
    return report;
}

}  // namespace ptychodr
