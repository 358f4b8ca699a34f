#include <doctest.h>

#include "helpers.hpp"
#include "ptychodr/datasets.hpp"
#include "ptychodr/metrics.hpp"
#include "ptychodr/solvers.hpp"

using namespace ptychodr;
using testutil::random_grid;
using testutil::random_transform_vector;
using testutil::two_pattern_op;

namespace {

struct Instance {
    MeasurementOp op;
    ComplexGrid truth;
    RealGrid b;
};

Instance ptycho_instance(int n, int m, int tau, std::uint64_t seed) {
    Rng rng(seed);
    Instance inst{make_object_side_op(
                      generate_probe(ProbeKind::iid_phase, m, 0.0, seed + 1).grid,
                      make_scan(n, m, tau, PerturbKind::full_rank, 1, seed), n),
                  random_grid(n, n, rng), RealGrid()};
    inst.b = forward(inst.op, inst.truth).cwiseAbs();
    return inst;
}

Instance cdp_instance(int n, std::uint64_t seed) {
    Rng rng(seed);
    Instance inst{two_pattern_op(n, seed + 1), random_grid(n, n, rng), RealGrid()};
    inst.b = forward(inst.op, inst.truth).cwiseAbs();
    return inst;
}

}  // namespace

TEST_CASE("feasible range points are fixed by every step") {
    const Instance inst = ptycho_instance(8, 4, 2, 70);
    const ComplexGrid u = forward(inst.op, inst.truth);
    const double scale = u.norm();
    CHECK((step_aar(u, inst.op, inst.b) - u).norm() <= 1e-12 * scale);
    CHECK((step_gaussian_drs(u, inst.op, inst.b, 0.7) - u).norm() <= 1e-12 * scale);
    CHECK((step_poisson_drs(u, inst.op, inst.b, 1.3) - u).norm() <= 1e-12 * scale);
    CHECK((step_raar(u, inst.op, inst.b, 0.8) - u).norm() <= 1e-12 * scale);
    CHECK((step_ap(u, inst.op, inst.b) - u).norm() <= 1e-12 * scale);
}

TEST_CASE("aar equals the averaged double-reflection form") {
    const Instance inst = ptycho_instance(8, 4, 2, 71);
    Rng rng(72);
    const ComplexGrid u = random_transform_vector(inst.op, rng);
    const ComplexGrid rx = 2.0 * project_range(inst.op, u) - u;
    const ComplexGrid ry_rx = 2.0 * project_magnitude(rx, inst.b) - rx;
    const ComplexGrid expected = 0.5 * u + 0.5 * ry_rx;
    CHECK((step_aar(u, inst.op, inst.b) - expected).norm() <= 1e-12 * u.norm());
}

TEST_CASE("gaussian DRS at rho=0 is AAR") {
    const Instance inst = ptycho_instance(8, 4, 2, 73);
    Rng rng(74);
    for (int trial = 0; trial < 10; ++trial) {
        const ComplexGrid u = random_transform_vector(inst.op, rng);
        CHECK((step_gaussian_drs(u, inst.op, inst.b, 0.0) - step_aar(u, inst.op, inst.b)).norm() <=
              1e-12 * u.norm());
    }
}

TEST_CASE("gaussian DRS equals its three-step proximal form") {
    const Instance inst = ptycho_instance(8, 4, 2, 75);
    Rng rng(76);
    const double rho = 0.6;
    for (int trial = 0; trial < 10; ++trial) {
        const ComplexGrid u = random_transform_vector(inst.op, rng);
        const ComplexGrid v = project_range(inst.op, u);
        const ComplexGrid w = prox_gaussian(2.0 * v - u, inst.b, rho);
        const ComplexGrid expected = u + w - v;
        CHECK((step_gaussian_drs(u, inst.op, inst.b, rho) - expected).norm() <= 1e-12 * u.norm());
    }
}

TEST_CASE("gaussian DRS at rho=1 is the averaged projection reflection") {
    const Instance inst = ptycho_instance(8, 4, 2, 77);
    Rng rng(78);
    const ComplexGrid u = random_transform_vector(inst.op, rng);
    const ComplexGrid rx = 2.0 * project_range(inst.op, u) - u;
    const ComplexGrid expected = 0.5 * u + 0.5 * project_magnitude(rx, inst.b);
    CHECK((step_gaussian_drs(u, inst.op, inst.b, 1.0) - expected).norm() <= 1e-12 * u.norm());
}

TEST_CASE("poisson DRS matches the rho=1 pointwise form and the prox form") {
    const Instance inst = ptycho_instance(8, 4, 2, 79);
    Rng rng(80);
    const ComplexGrid u = random_transform_vector(inst.op, rng);

    const ComplexGrid rx = 2.0 * project_range(inst.op, u) - u;
    ComplexGrid expected(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double root =
            std::sqrt(std::norm(rx.data()[i]) + 24.0 * inst.b.data()[i] * inst.b.data()[i]);
        expected.data()[i] = 0.5 * u.data()[i] - rx.data()[i] / 3.0 +
                             root / 6.0 * sgn(rx.data()[i]);
    }
    CHECK((step_poisson_drs(u, inst.op, inst.b, 1.0) - expected).norm() <= 1e-12 * u.norm());

    const double rho = 0.7;
    const ComplexGrid prox_form =
        u - project_range(inst.op, u) + prox_poisson(rx, inst.b, rho);
    CHECK((step_poisson_drs(u, inst.op, inst.b, rho) - prox_form).norm() <= 1e-12 * u.norm());
    CHECK_THROWS_AS((void)step_poisson_drs(u, inst.op, inst.b, 0.0), ConfigError);
}

TEST_CASE("raar at beta=1 is AAR; beta=1/2 induces alternating projections") {
    const Instance inst = ptycho_instance(8, 4, 2, 81);
    Rng rng(82);
    const ComplexGrid u = random_transform_vector(inst.op, rng);
    CHECK((step_raar(u, inst.op, inst.b, 1.0) - step_aar(u, inst.op, inst.b)).norm() <=
          1e-12 * u.norm());

    // on range(A) the beta=1/2 map is the magnitude projection, so its
    // range-projected iteration is exactly alternating projections
    const ComplexGrid w = project_range(inst.op, u);
    CHECK((step_raar(w, inst.op, inst.b, 0.5) - project_magnitude(w, inst.b)).norm() <=
          1e-12 * w.norm());
    const ComplexGrid lhs = project_range(inst.op, step_raar(w, inst.op, inst.b, 0.5));
    CHECK((lhs - step_ap(w, inst.op, inst.b)).norm() <= 1e-12 * w.norm());

    CHECK_THROWS_AS((void)step_raar(u, inst.op, inst.b, 0.3), ConfigError);
}

TEST_CASE("raar fixed points solve the matching gaussian DRS equation") {
    const Instance inst = cdp_instance(16, 83);
    SolverConfig cfg;
    cfg.method = Method::raar;
    cfg.beta = 0.9;
    cfg.max_iters = 3000;
    cfg.tol = 0.0;
    cfg.record_every = 100;
    const SolverState state =
        run(cfg, inst.op, inst.b, random_range_init(inst.op, 84), &inst.truth);
    const double rho = (1.0 - cfg.beta) / (2.0 * cfg.beta - 1.0);  // 0.125
    CHECK(fixed_point_residual(state.u, inst.op, inst.b, rho) < 1e-6);
}

TEST_CASE("alternating projections descends and stays in the range") {
    const Instance inst = ptycho_instance(8, 4, 2, 85);
    for (int trial = 0; trial < 100; ++trial) {
        const ComplexGrid u =
            random_range_init(inst.op, 1000 + static_cast<std::uint64_t>(trial));
        const ComplexGrid next = step_ap(u, inst.op, inst.b);
        const double before = (project_range(inst.op, u).cwiseAbs() - inst.b).norm();
        const double after = (project_range(inst.op, next).cwiseAbs() - inst.b).norm();
        CHECK(after <= before * (1.0 + 1e-12));
        CHECK((project_range(inst.op, next) - next).norm() <= 1e-10 * next.norm());
    }
}

TEST_CASE("steps commute with a global phase") {
    const Instance inst = ptycho_instance(8, 4, 2, 86);
    Rng rng(87);
    const ComplexGrid u = random_transform_vector(inst.op, rng);
    const Complex phase = std::polar(1.0, 1.234);
    auto check_equivariant = [&](auto step) {
        const ComplexGrid direct = step(ComplexGrid(phase * u));
        const ComplexGrid rotated = phase * step(u);
        CHECK((direct - rotated).norm() <= 1e-12 * u.norm());
    };
    check_equivariant([&](const ComplexGrid& w) { return step_aar(w, inst.op, inst.b); });
    check_equivariant(
        [&](const ComplexGrid& w) { return step_gaussian_drs(w, inst.op, inst.b, 0.4); });
    check_equivariant(
        [&](const ComplexGrid& w) { return step_poisson_drs(w, inst.op, inst.b, 1.1); });
    check_equivariant([&](const ComplexGrid& w) { return step_raar(w, inst.op, inst.b, 0.8); });
}

TEST_CASE("run: noiseless two-pattern instance converges geometrically") {
    const int n = 64;
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::cib_synthetic;
    spec.n = n;
    const ObjectImage truth = generate(spec);
    const MeasurementOp op = two_pattern_op(n, 88);
    const RealGrid b = forward(op, truth.grid).cwiseAbs();

    SolverConfig cfg;
    cfg.method = Method::gaussian_drs;
    cfg.rho = 0.3;
    cfg.max_iters = 1000;
    cfg.tol = 0.0;
    cfg.record_every = 5;
    const SolverState state = run(cfg, op, b, random_range_init(op, 89), &truth.grid);
    REQUIRE(!state.trace.empty());
    CHECK(state.trace.back().re < 1e-10);
}

TEST_CASE("run: max_iters=0 returns the start unchanged") {
    const Instance inst = ptycho_instance(8, 4, 2, 90);
    Rng rng(91);
    const ComplexGrid u0 = random_transform_vector(inst.op, rng);
    SolverConfig cfg;
    cfg.max_iters = 0;
    const SolverState state = run(cfg, inst.op, inst.b, u0);
    CHECK((state.u - u0).norm() == 0.0);
    CHECK(state.iterations == 0);
}

TEST_CASE("run: fixed seed gives a bit-identical trace") {
    const Instance inst = ptycho_instance(8, 4, 2, 92);
    SolverConfig cfg;
    cfg.method = Method::gaussian_drs;
    cfg.rho = 0.5;
    cfg.max_iters = 40;
    cfg.tol = 0.0;
    const ComplexGrid u0 = random_range_init(inst.op, 93);
    const SolverState s1 = run(cfg, inst.op, inst.b, u0);
    const SolverState s2 = run(cfg, inst.op, inst.b, u0);
    REQUIRE(s1.trace.size() == s2.trace.size());
    for (std::size_t i = 0; i < s1.trace.size(); ++i) {
        CHECK(s1.trace[i].rr == s2.trace[i].rr);
        CHECK(s1.trace[i].norm_u == s2.trace[i].norm_u);
    }
    CHECK((s1.u - s2.u).norm() == 0.0);
}

TEST_CASE("stagnation rule stops a converged noiseless run") {
    const Instance inst = cdp_instance(16, 94);
    SolverConfig cfg;
    cfg.method = Method::gaussian_drs;
    cfg.rho = 1.0;
    cfg.max_iters = 5000;
    cfg.tol = 1e-8;
    const SolverState state = run(cfg, inst.op, inst.b, random_range_init(inst.op, 95));
    CHECK(state.stop == StopReason::stagnated);
    CHECK(state.iterations < 5000);
    CHECK(state.terminal_rr() < 1e-10);
}

TEST_CASE("admm with matched initialization reproduces gaussian DRS") {
    const Instance inst = ptycho_instance(16, 4, 2, 96);
    Rng rng(97);
    const ComplexGrid y0 = random_transform_vector(inst.op, rng);
    const ComplexGrid z0 = random_transform_vector(inst.op, rng);
    const ComplexGrid lambda0 = random_transform_vector(inst.op, rng);
    const double rho = 0.8;

    SolverConfig cfg;
    cfg.method = Method::admm_gaussian;
    cfg.rho = rho;
    cfg.max_iters = 1;
    AdmmState admm = admm_gaussian_run(cfg, inst.op, inst.b, y0, z0, lambda0);
    ComplexGrid u = admm.core.u;  // u_1 = z_1 + lambda_0 / rho

    cfg.max_iters = 50;
    admm = admm_gaussian_run(cfg, inst.op, inst.b, y0, z0, lambda0);

    for (int k = 0; k < 49; ++k) u = step_gaussian_drs(u, inst.op, inst.b, rho);
    CHECK((admm.core.u - u).norm() <= 1e-10 * u.norm());

    // multiplier update identity and the range constraint on y
    const ComplexGrid y_next = project_range(inst.op, admm.core.u);
    CHECK((admm.y - y_next).norm() <= 1e-10 * admm.y.norm());
}

TEST_CASE("admm multiplier identity holds exactly each step") {
    const Instance inst = ptycho_instance(8, 4, 2, 98);
    Rng rng(99);
    const double rho = 1.2;
    ComplexGrid y = random_transform_vector(inst.op, rng);
    ComplexGrid lambda = random_transform_vector(inst.op, rng);
    for (int k = 0; k < 5; ++k) {
        const ComplexGrid z_next = prox_gaussian(y - lambda / rho, inst.b, rho);
        const ComplexGrid y_next = project_range(inst.op, z_next + lambda / rho);
        const ComplexGrid lambda_next = lambda + rho * (z_next - y_next);
        CHECK((lambda_next - lambda - rho * (z_next - y_next)).norm() == 0.0);
        CHECK((project_range(inst.op, y_next) - y_next).norm() <= 1e-10 * y_next.norm());
        y = y_next;
        lambda = lambda_next;
    }
}

TEST_CASE("fixed-point residual") {
    const Instance inst = ptycho_instance(8, 4, 2, 100);
    const ComplexGrid u = forward(inst.op, inst.truth);
    CHECK(fixed_point_residual(u, inst.op, inst.b, 0.7) <= 1e-12);

    Rng rng(101);
    CHECK(fixed_point_residual(random_transform_vector(inst.op, rng), inst.op, inst.b, 0.7) >
          1e-3);
}

TEST_CASE("extract_object inverts the range and ignores the cokernel") {
    const Instance inst = ptycho_instance(4, 2, 1, 102);
    const ComplexGrid u = forward(inst.op, inst.truth);
    CHECK((extract_object(u, inst.op).grid - inst.truth).norm() <= 1e-10 * inst.truth.norm());
    CHECK(extract_object(ComplexGrid(ComplexGrid::Zero(u.rows(), u.cols())), inst.op)
              .grid.norm() == 0.0);

    // add a cokernel component z (P_X z = 0) built from the dense SVD
    const Eigen::MatrixXcd a = testutil::dense_matrix(inst.op);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullU);
    Rng rng(103);
    const Eigen::VectorXcd w = testutil::flatten(random_transform_vector(inst.op, rng));
    const Eigen::Index rank = a.cols();
    Eigen::VectorXcd z = w;
    z -= svd.matrixU().leftCols(rank) * (svd.matrixU().leftCols(rank).adjoint() * w);
    const ComplexGrid u_shifted =
        u + testutil::unflatten(z, u.rows(), u.cols());
    CHECK((extract_object(u_shifted, inst.op).grid - inst.truth).norm() <=
          1e-10 * inst.truth.norm());
}

TEST_CASE("iterate norms respect the gaussian bound on noisy data") {
    const Instance inst = ptycho_instance(16, 4, 2, 104);
    Rng rng(105);
    RealGrid noisy = inst.b;
    for (Eigen::Index i = 0; i < noisy.size(); ++i)
        noisy.data()[i] = std::max(0.0, noisy.data()[i] * (1.0 + 0.2 * rng.normal()));

    for (double rho : {0.3, 1.0, 2.0}) {
        SolverConfig cfg;
        cfg.method = Method::gaussian_drs;
        cfg.rho = rho;
        cfg.max_iters = 400;
        cfg.tol = 0.0;
        cfg.record_every = 10;
        // run() itself asserts the bound after burn-in; reaching the end
        // without NumericalFailure is the check
        const SolverState state = run(cfg, inst.op, noisy, random_range_init(inst.op, 106));
        const double bound = noisy.norm() / std::min(rho, 1.0) * (1.0 + 1e-6);
        CHECK(state.u.norm() <= bound);
    }
}

TEST_CASE("trace csv export") {
    std::vector<TracePoint> trace(2);
    trace[0] = {0, 0.5, 0.9, 2.0};
    trace[1] = {1, 0.25, -1.0, 1.5};
    save_trace_csv("trace_test.csv", trace);
    std::ifstream in("trace_test.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "iter,rr,re,norm_u");
    std::getline(in, line);
    CHECK(line.substr(0, 6) == "0,0.5,");
    std::getline(in, line);
    CHECK(line == "1,0.25,,1.5");
    in.close();
    std::remove("trace_test.csv");
}
