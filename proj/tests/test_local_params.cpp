#include <doctest.h>

#include <cmath>

#include "kacrice/errors.hpp"
#include "kacrice/local_params.hpp"
#include "test_fields.hpp"

using namespace kacrice;
using doctest::Approx;

TEST_CASE("local params for exp1 at rho = 1") {
    const auto f = lookup("exp1");
    const LocalParams p = local_params(f, 1.0, 0.0);
    const double e = std::exp(-1.0);
    // hand arithmetic from D = 1 - e^{-r}
    const double sy2 = (1.0 - e) - e * e;
    CHECK(p.sigmaY2 == Approx(sy2).epsilon(1e-14));
    CHECK(p.sigmaY2 == Approx(0.496785).epsilon(1e-6));
    CHECK(p.m1 == 0.0);
    CHECK(p.m2 == 0.0);
    const double sy = std::sqrt(sy2);
    CHECK(p.alpha == Approx(-2.0 * e / sy).epsilon(1e-14));
    CHECK(p.beta == Approx((e - 1.0) / sy).epsilon(1e-14));
    CHECK(p.Dpp0 == Approx(-1.0));
    const double a = p.alpha, b = p.beta;
    CHECK(p.sigma1_sq == Approx(4.0 - (a + b) * a).epsilon(1e-14));
    CHECK(p.sigma2_sq == Approx(2.0 - (a + b) * b).epsilon(1e-14));
    CHECK(p.d1 == Approx(0.5 - b * b / 4.0).epsilon(1e-14));
    CHECK(p.d2 == Approx(-a * b / 4.0).epsilon(1e-14));
    CHECK(p.d3 == Approx(-a * a / 4.0).epsilon(1e-14));
}

TEST_CASE("b^2 has two equivalent forms") {
    for (const char* name : {"exp1", "exp-mix", "power", "linear-plus-exp"}) {
        const auto f = lookup(name);
        for (double rho : {0.1, 0.7, 1.3, 3.0}) {
            const LocalParams p = local_params(f, rho, 0.0);
            const double r = p.r;
            const double alt = -4.0 * p.Dpp0 + 2.0 * p.Dpp0 * p.alpha * p.alpha * r * r / (-2.0 * p.Dpp0 - p.beta * p.beta);
            CHECK(p.b2 == Approx(alt).epsilon(1e-11));
            CHECK(p.sigma2_sq + p.alpha * p.beta * r == Approx(-2.0 * p.Dpp0 - p.beta * p.beta).epsilon(1e-12));
        }
    }
}

TEST_CASE("c from its definition against the conditional variance") {
    const auto f = lookup("exp-mix");
    const LocalParams p = local_params(f, 0.9, 0.3);
    // c = d1 - (d1 + d2)^2 / Var(zeta_1)
    CHECK(p.c == Approx(p.d1 - (p.d1 + p.d2) * (p.d1 + p.d2) / p.zeta1_variance()).epsilon(1e-13));
    CHECK(p.m1 == Approx(0.3 * p.m1_per_u));
}

TEST_CASE("sigma_Y^2 stays accurate at small r") {
    const auto f = lookup("exp1");
    // sigma_Y^2 = -3/2 D''(0) r^2 + O(r^3) = 1.5 r^2 for exp1
    for (double rho : {1e-3, 1e-4, 1e-5}) {
        const LocalParams p = local_params(f, rho, 0.0);
        const double r = rho * rho;
        CHECK(p.sigmaY2 == Approx(1.5 * r * r).epsilon(1e-3));
    }
}

TEST_CASE("degenerate conditioning is an error naming r") {
    // D(r) = r: sigma_Y^2 vanishes identically, but D''(0) = 0 rejects it first
    SpectralRep lin;
    lin.linear_coeff = 1.0;
    const auto f = StructureFunction::bernstein(lin, "linear");
    CHECK_THROWS_AS(local_params(f, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(local_params(lookup("exp1"), 0.0, 0.0), std::domain_error);

    // D = r - 0.1 r^2 has sigma_Y^2 = 0.3 r^2 - 0.04 r^3 < 0 beyond r = 7.5
    const auto q = quadratic_field(1.0, -0.1);
    CHECK(local_params(q, 2.0, 0.0).sigmaY2 == Approx(0.3 * 16 - 0.04 * 64));
    try {
        local_params(q, 3.0, 0.0);
        FAIL("expected ConditionError");
    } catch (const ConditionError& e) {
        CHECK(std::string(e.what()).find("r=9") != std::string::npos);
    }
}

TEST_CASE("m3 and abar at y = 0 reduce to their u terms") {
    const auto f = lookup("exp1");
    const LocalParams p = local_params(f, 1.2, 0.7);
    CHECK(p.m3(0.7, 0.0) == Approx(p.m2 / (2.0 * std::sqrt(-p.Dpp0))));
    CHECK(p.abar(0.7, 0.0) == Approx(p.m1 - p.sigma2_sq * p.m2 / (p.sigma2_sq + p.alpha * p.beta * p.r)));
}
