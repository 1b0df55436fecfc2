#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tlab/numerics.hpp"
#include "tlab/spectral.hpp"
#include "tlab/transfer_operator.hpp"

using namespace tlab;

TEST_CASE("hurwitz zeta against brute-force partial sums") {
    auto brute = [](Complex w, double a) {
        Complex acc = 0.0;
        const int terms = 2000000;
        for (int m = 0; m < terms; ++m) acc += std::pow(Complex(a + m, 0.0), -w);
        return acc;
    };
    CHECK(std::abs(hurwitz_zeta(Complex(2.0, 0.0), 1.0) - kPi * kPi / 6.0) <= 1e-13);
    CHECK(std::abs(hurwitz_zeta(Complex(2.0, 0.0), 2.0) - (kPi * kPi / 6.0 - 1.0)) <= 1e-13);
    CHECK(std::abs(hurwitz_zeta(Complex(3.0, 0.0), 1.0) - 1.2020569031595943) <= 1e-13);
    for (Complex w : {Complex(2.0, 7.0), Complex(3.5, -20.0), Complex(2.1, 100.0)}) {
        const Complex z = hurwitz_zeta(w, 1.5);
        const Complex zb = brute(w, 1.5);
        // brute truncation error ~ M^(1-Re w)/|w-1|
        CHECK(std::abs(z - zb) <= 1e-5);
    }
    CHECK_THROWS_AS(hurwitz_zeta(Complex(0.5, 0.0), 1.0), InvalidParameter);
}

TEST_CASE("doubling operator fixes constants exactly") {
    auto sys = make_doubling_counterexample();
    auto grid = build_grid(16);
    auto op = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::all());
    auto one = GridFunction::constant(grid, 1.0);
    auto lone = apply(op, one);
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(lone.values()[j] - 1.0) <= 1e-13);
}

TEST_CASE("gauss row sums hit the zeta values") {
    auto sys = make_gauss_system();
    auto grid = build_grid(64);
    auto op = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::all());
    auto one = GridFunction::constant(grid, 1.0);
    auto lone = apply(op, one);
    // (L_0 1)(0) = sum 1/m^2 = pi^2/6, (L_0 1)(1) = pi^2/6 - 1
    CHECK(std::abs(lone.values()[0].real() - kPi * kPi / 6.0) <= 1e-8);
    CHECK(std::abs(lone.values()[grid->order()].real() - (kPi * kPi / 6.0 - 1.0)) <= 1e-8);
    // direct-summation bracket: partial sum plus integral bounds on the rest
    for (int j : {7, 32, 55}) {
        const double x = grid->nodes()[j];
        double partial = 0.0;
        const int M = 200000;
        for (int m = 1; m <= M; ++m) partial += 1.0 / ((m + x) * (m + x));
        const double lo = partial + 1.0 / (M + 1 + x);
        const double hi = partial + 1.0 / (M + x);
        CHECK(lone.values()[j].real() >= lo - 1e-10);
        CHECK(lone.values()[j].real() <= hi + 1e-10);
    }
}

TEST_CASE("telescoping fixed point of the gauss operator") {
    auto sys = make_gauss_system();
    auto grid = build_grid(64);
    auto op = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::all());
    auto f = GridFunction::sample(grid, [](double x) { return 1.0 / (1.0 + x); });
    auto lf = apply(op, f);
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(lf.values()[j] - f.values()[j]) <= 1e-10);
}

TEST_CASE("apply is linear and shape checked") {
    auto sys = make_gauss_system();
    auto grid = build_grid(32);
    auto op = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::all());
    auto zero = GridFunction::constant(grid, 0.0);
    CHECK(apply(op, zero).values().cwiseAbs().maxCoeff() == 0.0);

    Rng rng(5);
    Eigen::VectorXcd a(grid->size()), b(grid->size());
    for (int j = 0; j < grid->size(); ++j) {
        a[j] = rng.cnormal();
        b[j] = rng.cnormal();
    }
    GridFunction fa(grid, a), fb(grid, b);
    const Complex ca(1.3, -0.4), cb(0.2, 2.0);
    GridFunction lhs = apply(op, ca * fa + cb * fb);
    GridFunction rhs = ca * apply(op, fa) + cb * apply(op, fb);
    CHECK((lhs.values() - rhs.values()).cwiseAbs().maxCoeff() <= 1e-12);

    auto other = GridFunction::constant(build_grid(16), 1.0);
    CHECK_THROWS_AS(apply(op, other), ShapeError);
}

TEST_CASE("iteration") {
    auto sys = make_gauss_system();
    auto grid = build_grid(48);
    auto op = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::all());
    auto f = GridFunction::sample(grid, [](double x) { return Complex(x, 1.0 - x); });
    auto same = iterate(op, f, 0);
    CHECK((same.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);

    // two-step iteration against direct two-letter assembly at a finite cutoff
    const std::uint64_t M = 40;
    auto opM = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::fixed(M, 1.0));
    std::vector<std::vector<int>> words;
    for (int m1 = 1; m1 <= int(M); ++m1)
        for (int m2 = 1; m2 <= int(M); ++m2) words.push_back({m1, m2});
    auto op2 = assemble_words(sys, Complex(0.0, 0.0), grid, words);
    auto via_power = iterate(opM, f, 2);
    auto direct = apply(op2, f);
    CHECK((via_power.values() - direct.values()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("normalized doubling iteration averages to the mean") {
    auto sys = make_doubling_counterexample();
    auto grid = build_grid(24);
    auto trunc = TruncationPolicy::all();
    auto spec = leading_eigendata(sys, 0.0, grid, trunc);
    auto op = normalize(assemble(sys, Complex(0.0, 0.0), grid, trunc), spec);
    auto f = GridFunction::sample(grid, [](double x) { return x; });
    auto g = iterate(op, f, 45);
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(g.values()[j] - 0.5) <= 1e-10);
}

TEST_CASE("tail bounds") {
    auto gauss = make_gauss_system();
    CHECK(tail_bound(gauss, 0.0, 100) <= 0.01 + 1e-15);
    CHECK(tail_bound(gauss, 0.5, 10) <= 0.005 + 1e-15);
    auto dbl = make_doubling_counterexample();
    CHECK(tail_bound(dbl, 0.0, 2) == 0.0);
    CHECK(tail_bound(dbl, 0.0, 7) == 0.0);
    // nonincreasing in the cutoff
    double prev = 1e9;
    for (std::uint64_t m : {10, 100, 1000, 10000}) {
        const double t = tail_bound(gauss, 0.0, m);
        CHECK(t <= prev);
        prev = t;
    }
    CHECK_THROWS_AS(tail_bound(gauss, -0.6, 100), DivergentSum);
}

TEST_CASE("assembly refuses an unmet tolerance") {
    auto sys = make_gauss_system();
    auto grid = build_grid(16);
    try {
        assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::fixed(100, 1e-6));
        FAIL("expected a truncation error");
    } catch (const TruncationError& e) {
        CHECK(e.required_cutoff >= 1000000);
    }
    CHECK_THROWS_AS(assemble(sys, Complex(-0.7, 0.0), grid, TruncationPolicy::all()),
                    DivergentSum);
}

TEST_CASE("policy solves the tolerance for the cutoff") {
    auto sys = make_gauss_system();
    auto p = TruncationPolicy::for_tolerance(sys, 0.0, 1e-4);
    REQUIRE(p.cutoff.has_value());
    CHECK(sys.tail_model(0.0, *p.cutoff) <= 1e-4);
    CHECK(sys.tail_model(0.0, *p.cutoff / 2) > 1e-4);
}

TEST_CASE("finite cutoff agrees with the closed-form tail path") {
    auto sys = make_gauss_system();
    auto grid = build_grid(24);
    const Complex s(0.02, 3.0);
    // cutoff below the explicit threshold: pure branch loop
    auto a = assemble(sys, s, grid, TruncationPolicy::fixed(250, 1.0));
    std::vector<std::vector<int>> words;
    for (int m = 1; m <= 250; ++m) words.push_back({m});
    auto b = assemble_words(sys, s, grid, words);
    CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() <= 1e-12);

    // large finite cutoff: explicit part plus a zeta difference; the distance
    // to the full family is the mass beyond the cutoff
    auto c = assemble(sys, s, grid, TruncationPolicy::fixed(5000000, 1.0));
    auto d = assemble(sys, s, grid, TruncationPolicy::all());
    CHECK((c.matrix() - d.matrix()).cwiseAbs().maxCoeff() <= 3e-7);
    CHECK((c.matrix() - d.matrix()).cwiseAbs().maxCoeff() >= 1e-9);
}

TEST_CASE("conjugation and twist symmetry") {
    auto sys = make_gauss_system();
    auto grid = build_grid(32);
    const Complex s(0.01, 17.0);
    auto op_plus = assemble(sys, s, grid, TruncationPolicy::all());
    auto op_minus = assemble(sys, std::conj(s), grid, TruncationPolicy::all());
    Rng rng(9);
    for (int rep = 0; rep < 40; ++rep) {
        const int i = static_cast<int>(rng.next_u64() % grid->size());
        const int j = static_cast<int>(rng.next_u64() % grid->size());
        CHECK(std::abs(op_minus.matrix()(i, j) - std::conj(op_plus.matrix()(i, j))) <= 1e-12);
    }
    Eigen::VectorXcd v(grid->size());
    for (int j = 0; j < grid->size(); ++j) v[j] = rng.cnormal();
    GridFunction f(grid, v);
    auto lhs = apply(op_minus, f.conj());
    auto rhs = apply(op_plus, f);
    CHECK((lhs.values() - rhs.values().conjugate()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("positivity and lebesgue duality at sigma zero") {
    auto sys = make_gauss_system();
    auto grid = build_grid(40);
    auto op = assemble(sys, Complex(0.0, 0.0), grid, TruncationPolicy::all());
    auto leb = lebesgue_weights(grid);

    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        double c0 = rng.normal(), c1 = rng.normal(), c2 = rng.normal();
        auto f = GridFunction::sample(grid, [&](double x) {
            return Complex(c0 + c1 * std::sin(2.0 * kPi * x) + c2 * std::cos(4.0 * kPi * x));
        });
        CHECK(std::abs(integrate(apply(op, f), leb) - integrate(f, leb)) <= 1e-10);
    }

    auto f = GridFunction::sample(grid, [](double x) { return (x - 0.4) * (x - 0.4); });
    auto lf = apply(op, f);
    for (int j = 0; j < grid->size(); ++j)
        CHECK(lf.values()[j].real() >= -1e-12);
}

TEST_CASE("normalized operator bounds and dump format") {
    auto sys = make_gauss_system();
    auto grid = build_grid(48);
    auto trunc = TruncationPolicy::all();
    auto spec = leading_eigendata(sys, 0.0, grid, trunc);
    const Complex s(0.0, 11.0);
    auto tw = normalize(assemble(sys, s, grid, trunc), spec);
    auto re = normalize(assemble(sys, Complex(0.0, 0.0), grid, trunc), spec);

    // |Ltilde_s f| <= Ltilde_sigma |f| nodewise on zero-free smooth f
    auto f = GridFunction::sample(grid, [](double x) {
        return Complex(2.0, 0.0) + std::exp(Complex(0.0, 11.0 * x));
    });
    auto lhs = apply(tw, f);
    auto rhs = apply(re, f.abs());
    for (int j = 0; j < grid->size(); ++j)
        CHECK(std::abs(lhs.values()[j]) <= rhs.values()[j].real() + 1e-12);

    std::ostringstream os;
    export_csv(tw, os);
    const std::string text = os.str();
    CHECK(text.substr(0, 1) == "#");
    CHECK(text.find("rows=49") != std::string::npos);
}

TEST_CASE("oscillation guard flags under-resolved grids") {
    auto sys = make_gauss_system();
    auto coarse = build_grid(16);
    auto op = assemble(sys, Complex(0.0, 100.0), coarse, TruncationPolicy::all());
    CHECK(op.meta().oscillation_warning);
    auto fine = build_grid(256);
    auto op2 = assemble(sys, Complex(0.0, 100.0), fine, TruncationPolicy::all());
    CHECK_FALSE(op2.meta().oscillation_warning);
}
