#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "tlab/branch_maps.hpp"

using namespace tlab;
using json = nlohmann::json;

TEST_CASE("gauss branches") {
    auto sys = make_gauss_system();
    CHECK_FALSE(sys.branch_count().has_value());
    auto h1 = sys.branch(1);
    CHECK(h1.eval(0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(h1.deriv(0.0) == doctest::Approx(-1.0).epsilon(1e-14));
    // r(h_2(0)) = -2 log(1/2) = log 4
    auto h2 = sys.branch(2);
    CHECK(sys.roof().eval_on(2, h2.eval(0.0)) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("doubling counterexample") {
    auto sys = make_doubling_counterexample();
    REQUIRE(sys.branch_count().has_value());
    CHECK(*sys.branch_count() == 2);
    auto h0 = sys.branch_for_digit(0);
    CHECK(h0.eval(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sys.roof().eval(0.25) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    // left-limit at the partition point
    CHECK(sys.roof().eval(0.5) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    CHECK(sys.roof().eval(0.75) == doctest::Approx(std::log(1.5)).epsilon(1e-15));
}

TEST_CASE("composition of gauss branches is exact Mobius arithmetic") {
    auto sys = make_gauss_system();
    {
        const std::vector<int> w{1, 1};
        auto h = compose_branches(sys, w);
        REQUIRE(h.mobius().has_value());
        CHECK(h.mobius()->a == 1);
        CHECK(h.mobius()->b == 1);
        CHECK(h.mobius()->c == 1);
        CHECK(h.mobius()->d == 2);
    }
    {
        const std::vector<int> w{2, 2};
        auto h = compose_branches(sys, w);
        CHECK(h.mobius()->a == 1);
        CHECK(h.mobius()->b == 2);
        CHECK(h.mobius()->c == 2);
        CHECK(h.mobius()->d == 5);
    }
    {
        const std::vector<int> w{5};
        auto h = compose_branches(sys, w);
        auto b = sys.branch(5);
        for (double x : {0.0, 0.3, 1.0})
            CHECK(h.eval(x) == doctest::Approx(b.eval(x)).epsilon(1e-15));
    }
    const std::vector<int> bad{1, 0};
    CHECK_THROWS_AS(compose_branches(sys, bad), InvalidWord);
}

TEST_CASE("gauss composition determinants are unimodular") {
    auto sys = make_gauss_system();
    std::vector<int> word;
    Rng rng(3);
    for (int i = 0; i < 50; ++i)
        word.push_back(1 + static_cast<int>(rng.next_u64() % 9));
    auto h = compose_branches(sys, word);
    REQUIRE(h.mobius().has_value());
    BigInt det = h.mobius()->det();
    if (det < 0) det = -det;
    CHECK(det == 1);
}

TEST_CASE("mobius eval and derivative agree with the closed form") {
    auto sys = make_gauss_system();
    const std::vector<int> w{3, 1, 4, 1, 5};
    auto h = compose_branches(sys, w);
    const auto& m = *h.mobius();
    const double a = m.a.convert_to<double>(), b = m.b.convert_to<double>();
    const double c = m.c.convert_to<double>(), d = m.d.convert_to<double>();
    const double det = (m.det()).convert_to<double>();
    for (double x : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        CHECK(std::abs(h.eval(x) - (a * x + b) / (c * x + d)) <= 1e-12);
        CHECK(std::abs(h.deriv(x) - det / std::pow(c * x + d, 2)) <= 1e-12);
    }
}

TEST_CASE("inverse identity across builtin systems") {
    // 100 interior grid points; branch endpoints collide with partition
    // points where T takes the neighbouring branch's value by convention
    for (auto sys : {make_gauss_system(), make_doubling_counterexample()}) {
        const auto count = sys.branch_count();
        const std::uint64_t digits = count ? *count : 12;
        for (std::uint64_t m = 1; m <= digits; ++m) {
            auto h = sys.branch(m);
            for (int i = 0; i < 100; ++i) {
                const double x = (i + 0.5) / 100.0;
                CHECK(std::abs(sys.forward(h.eval(x)) - x) <= 1e-10);
            }
        }
    }
}

TEST_CASE("birkhoff sums of the roof") {
    auto gauss = make_gauss_system();
    {
        const std::vector<int> w{1};
        auto br = birkhoff_roof(gauss, compose_branches(gauss, w));
        CHECK(std::abs(br.value(0.0)) <= 1e-12);  // r(h_1(0)) = -2 log 1
    }
    // chain-rule identity for r = log|T'|: r^(n)(h(x)) = -log|h'(x)|
    Rng rng(17);
    for (int rep = 0; rep < 8; ++rep) {
        std::vector<int> w;
        const int len = 1 + static_cast<int>(rng.next_u64() % 6);
        for (int i = 0; i < len; ++i) w.push_back(1 + static_cast<int>(rng.next_u64() % 7));
        auto h = compose_branches(gauss, w);
        auto br = birkhoff_roof(gauss, h);
        for (double x : {0.0, 0.31, 0.77, 1.0})
            CHECK(std::abs(br.value(x) + std::log(std::abs(h.deriv(x)))) <= 1e-10);
    }
    // piecewise-constant roof sums
    auto dbl = make_doubling_counterexample();
    const std::vector<int> w01{0, 1};
    auto br = birkhoff_roof(dbl, compose_branches(dbl, w01));
    for (double x : {0.0, 0.5, 1.0})
        CHECK(std::abs(br.value(x) - (std::log(3.0) + std::log(1.5))) <= 1e-12);
}

TEST_CASE("psi composition identity under branch extension") {
    auto sys = make_gauss_system();
    Rng rng(23);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<int> wh, wk, wl;
        const int n = 2 + static_cast<int>(rng.next_u64() % 3);
        const int nl = 1 + static_cast<int>(rng.next_u64() % 3);
        for (int i = 0; i < n; ++i) {
            wh.push_back(1 + static_cast<int>(rng.next_u64() % 5));
            wk.push_back(1 + static_cast<int>(rng.next_u64() % 5));
        }
        for (int i = 0; i < nl; ++i) wl.push_back(1 + static_cast<int>(rng.next_u64() % 5));

        auto ell = compose_branches(sys, wl);
        auto bh = birkhoff_roof(sys, compose_branches(sys, wh));
        auto bk = birkhoff_roof(sys, compose_branches(sys, wk));
        std::vector<int> whl = wh, wkl = wk;
        whl.insert(whl.end(), wl.begin(), wl.end());
        wkl.insert(wkl.end(), wl.begin(), wl.end());
        auto bhl = birkhoff_roof(sys, compose_branches(sys, whl));
        auto bkl = birkhoff_roof(sys, compose_branches(sys, wkl));

        for (int i = 0; i <= 20; ++i) {
            const double x = double(i) / 20.0;
            const double lhs = bhl.value(x) - bkl.value(x);
            const double rhs = bh.value(ell.eval(x)) - bk.value(ell.eval(x));
            CHECK(std::abs(lhs - rhs) <= 1e-10);
        }
    }
}

TEST_CASE("validation of builtin systems") {
    auto gauss = make_gauss_system();
    auto rep = validate_system(gauss, 101);
    CHECK(rep.all_passed());
    CHECK(rep.rho_hat_estimate <= 0.62);
    CHECK(rep.k_hat <= 2.0 + 1e-12);
    if (rep.sigma0_estimate) CHECK(*rep.sigma0_estimate <= 0.0);

    auto dbl = make_doubling_counterexample();
    auto rep2 = validate_system(dbl, 101);
    CHECK(rep2.all_passed());
    CHECK(rep2.rho_hat_estimate == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("corrupted custom branch fails the range check") {
    const json doc = {
        {"name", "corrupt"},
        {"branches",
         {{{"affine", {{"slope", 1.5}, {"intercept", 0.0}}}},
          {{"affine", {{"slope", 0.5}, {"intercept", 0.5}}}}}},
        {"roof", {{"kind", "piecewise_constant"}, {"values", {1.0, 1.0}}}},
        {"constants",
         {{"rho_hat", 0.5}, {"rho", 0.6}, {"C", 3.0}, {"K", 1.0}, {"sigma0", -1.0}}}};
    auto sys = load_system(doc);
    auto rep = validate_system(sys, 51);
    bool range_failed = false;
    for (const auto& c : rep.checks)
        if (c.name == "range" && !c.passed) range_failed = true;
    CHECK(range_failed);
}

TEST_CASE("custom affine system loads and validates") {
    const json doc = {
        {"name", "tripling"},
        {"branches",
         {{{"affine", {{"slope", 1.0 / 3.0}, {"intercept", 0.0}}}},
          {{"affine", {{"slope", 1.0 / 3.0}, {"intercept", 1.0 / 3.0}}}},
          {{"affine", {{"slope", 1.0 / 3.0}, {"intercept", 2.0 / 3.0}}}}}},
        {"roof", {{"kind", "piecewise_constant"}, {"values", {1.0, 2.0, 1.5}}}},
        {"constants",
         {{"rho_hat", 1.0 / 3.0}, {"rho", 0.5}, {"C", 1.0}, {"K", 1.0}, {"sigma0", -1.0}}}};
    auto sys = load_system(doc);
    CHECK(*sys.branch_count() == 3);
    auto rep = validate_system(sys, 61);
    CHECK(rep.all_passed());
    CHECK(sys.roof().eval(0.5) == doctest::Approx(2.0));
    CHECK(std::abs(sys.forward(0.2) - 0.6) <= 1e-12);
}

TEST_CASE("mobius branch with a pole inside the interval is rejected") {
    const json doc = {
        {"name", "pole"},
        {"branches", {{{"mobius", {1, 0, 2, -1}}}}},
        {"roof", {{"kind", "piecewise_constant"}, {"values", {1.0}}}},
        {"constants",
         {{"rho_hat", 0.5}, {"rho", 0.6}, {"C", 1.0}, {"K", 1.0}, {"sigma0", -1.0}}}};
    auto sys = load_system(doc);
    CHECK_THROWS_AS(validate_system(sys, 101), InvalidSystem);
}

TEST_CASE("tail model values") {
    auto gauss = make_gauss_system();
    CHECK(gauss.tail_model(0.0, 100) <= 0.01 + 1e-15);
    CHECK(gauss.tail_model(0.5, 10) <= 0.005 + 1e-15);
    CHECK(gauss.tail_model(0.0, std::nullopt) == 0.0);
    auto dbl = make_doubling_counterexample();
    CHECK(dbl.tail_model(0.3, 2) == 0.0);
    CHECK(dbl.tail_model(0.3, 5) == 0.0);
}

TEST_CASE("very long words stay numerically usable") {
    auto sys = make_gauss_system();
    std::vector<int> word(300, 1);  // Fibonacci continuants overflow doubles
    auto h = compose_branches(sys, word);
    const double y = h.eval(0.5);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
    // the image point converges to 1/phi
    CHECK(std::abs(y - 0.6180339887498949) <= 1e-12);
}
