#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tlab/spectral.hpp"

using namespace tlab;

TEST_CASE("doubling leading data at sigma zero") {
    auto sys = make_doubling_counterexample();
    auto grid = build_grid(24);
    auto spec = leading_eigendata(sys, 0.0, grid, TruncationPolicy::all());
    CHECK(std::abs(spec.lambda - 1.0) <= 1e-12);
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(spec.eigenfunction.values()[j].real() - 1.0) <= 1e-10);
    // the dual vector reproduces the quadrature weights
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(spec.mu.weights()[j] - grid->quad_weights()[j]) <= 1e-10);
    // exact subdominant eigenvalue 1/2 (the operator is triangular on
    // polynomials with diagonal 2^-k)
    CHECK(std::abs(spec.gap - 0.5) <= 1e-8);
}

TEST_CASE("doubling closed-form eigenvalue at sigma one") {
    auto sys = make_doubling_counterexample();
    auto grid = build_grid(24);
    auto spec = leading_eigendata(sys, 1.0, grid, TruncationPolicy::all());
    // (e^{-r0} + e^{-r1})/2 = (1/3 + 2/3)/2 = 1/2
    CHECK(std::abs(spec.lambda - 0.5) <= 1e-12);
}

TEST_CASE("gauss fixed point and invariant density") {
    auto sys = make_gauss_system();
    auto grid = build_grid(64);
    auto spec = leading_eigendata(sys, 0.0, grid, TruncationPolicy::all());
    CHECK(std::abs(spec.lambda - 1.0) <= 1e-9);
    CHECK(spec.residual <= 1e-10);
    // telescoping oracle: f_0 is proportional to 1/(1+x)
    double scale = 0.0;
    for (int j = 0; j < grid->size(); ++j)
        scale += spec.eigenfunction.values()[j].real() * (1.0 + grid->nodes()[j]);
    scale /= grid->size();
    for (int j = 0; j < grid->size(); ++j) {
        const double ratio =
            spec.eigenfunction.values()[j].real() * (1.0 + grid->nodes()[j]) / scale;
        CHECK(std::abs(ratio - 1.0) <= 1e-8);
    }
    // normalizations
    CHECK(std::abs(spec.mu.weights().sum() - 1.0) <= 1e-9);
    CHECK(std::abs(spec.nu.mass() - 1.0) <= 1e-9);
}

TEST_CASE("gauss subdominant gap matches the known constant") {
    auto sys = make_gauss_system();
    auto g64 = build_grid(64);
    auto spec64 = leading_eigendata(sys, 0.0, g64, TruncationPolicy::all());
    CHECK(std::abs(spec64.gap - 0.303663002898732) <= 1e-6);
    auto g128 = build_grid(128);
    auto spec128 = leading_eigendata(sys, 0.0, g128, TruncationPolicy::all());
    CHECK(std::abs(spec64.gap - spec128.gap) <= 1e-8);
    CHECK(spec64.gap < 1.0);
    CHECK(spec64.gap_converged);
}

TEST_CASE("normalized operator fixes constants and preserves nu") {
    auto sys = make_gauss_system();
    auto grid = build_grid(64);
    auto trunc = TruncationPolicy::all();
    auto spec = leading_eigendata(sys, 0.0, grid, trunc);
    auto op = normalize(assemble(sys, Complex(0.0, 0.0), grid, trunc), spec);

    auto one = GridFunction::constant(grid, 1.0);
    auto lone = apply(op, one);
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(lone.values()[j] - 1.0) <= 1e-9);

    auto nu = spec.nu.normalized();
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        double c0 = rng.normal(), c1 = rng.normal(), c2 = rng.normal();
        auto f = GridFunction::sample(grid, [&](double x) {
            return Complex(c0 + c1 * std::cos(kPi * x) + c2 * x * x);
        });
        CHECK(std::abs(integrate(apply(op, f), nu) - integrate(f, nu)) <= 1e-9);
    }
}

TEST_CASE("lambda scan is monotone in sigma") {
    auto sys = make_gauss_system();
    auto grid = build_grid(64);
    auto scan = lambda_scan(sys, {-0.05, 0.0, 0.05}, grid, TruncationPolicy::all());
    REQUIRE(scan.rows.size() == 3);
    CHECK(scan.rows[0].lambda > scan.rows[1].lambda);
    CHECK(scan.rows[1].lambda > scan.rows[2].lambda);
    CHECK(std::abs(scan.rows[1].lambda - 1.0) <= 1e-9);
    CHECK(scan.nonincreasing);

    auto dbl = make_doubling_counterexample();
    auto scan2 = lambda_scan(dbl, {0.0, 1.0}, build_grid(16), TruncationPolicy::all());
    CHECK(std::abs(scan2.rows[0].lambda - 1.0) <= 1e-12);
    CHECK(std::abs(scan2.rows[1].lambda - 0.5) <= 1e-12);

    // determinism on repeated sigma
    auto scan3 = lambda_scan(sys, {0.02, 0.02}, grid, TruncationPolicy::all());
    CHECK(std::abs(scan3.rows[0].lambda - scan3.rows[1].lambda) <= 1e-12);
}

TEST_CASE("grid refinement stability of lambda") {
    auto sys = make_gauss_system();
    EigenSolveOptions opt;
    opt.with_gap = false;
    for (double sigma : {-0.03, 0.04}) {
        auto a = leading_eigendata(sys, sigma, build_grid(64), TruncationPolicy::all(), opt);
        auto b = leading_eigendata(sys, sigma, build_grid(128), TruncationPolicy::all(), opt);
        CHECK(std::abs(a.lambda - b.lambda) <= 1e-8);
    }
}

TEST_CASE("convergence error surfaces diagnostics") {
    auto sys = make_gauss_system();
    auto grid = build_grid(32);
    EigenSolveOptions opt;
    opt.max_iterations = 1;
    CHECK_THROWS_AS(leading_eigendata(sys, 0.0, grid, TruncationPolicy::all(), opt),
                    ConvergenceError);
}
