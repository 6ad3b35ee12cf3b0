#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "kacrice/quadrature.hpp"
#include "kacrice/structure_function.hpp"

using namespace kacrice;
using doctest::Approx;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return g;
}

}  // namespace

TEST_CASE("lambda kernel examples") {
    CHECK(eval_lambda(1, std::numbers::pi) == Approx(-1.0).epsilon(1e-15));
    CHECK(eval_lambda(5, 0.0) == 1.0);
    // independent: first 20 terms of the printed series for N = 3
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < 20; ++k) {
        term *= -0.25 / ((1.5 + k) * (k + 1));
        sum += term;
    }
    CHECK(eval_lambda(3, 1.0) == Approx(sum).epsilon(1e-14));
    CHECK(eval_lambda(3, 1.0) == Approx(std::sin(1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(eval_lambda(0, 1.0), std::domain_error);
    CHECK_THROWS_AS(eval_lambda(2, -1.0), std::domain_error);
}

TEST_CASE("lambda kernel is bounded and matches library bessel") {
    for (int N : {2, 4, 7, 30}) {
        for (double x = 0.0; x < 60.0; x += 0.37) {
            const double v = eval_lambda(N, x);
            CHECK(std::abs(v) <= 1.0 + 1e-15);
            if (x > 0.5) {
                const double ref = std::tgamma(N / 2.0) * std::pow(x / 2, 1 - N / 2.0) * std::cyl_bessel_j(N / 2.0 - 1, x);
                CHECK(v == Approx(ref).epsilon(1e-9).scale(1e-12));
            }
        }
    }
}

TEST_CASE("kernel limit at large N") {
    for (double x = 0.0; x <= 2.0; x += 0.05)
        CHECK(std::abs(eval_lambda(200, std::sqrt(400.0) * x) - std::exp(-x * x)) < 0.01);
}

TEST_CASE("eval_D examples") {
    const auto exp1 = lookup("exp1");
    // oracle: Richardson central difference of the first derivative at step 1e-3
    const double fd = richardson_derivative([&](double r) { return std::exp(-r); }, 0.0, 3, 1e-3);
    CHECK(eval_D(exp1, 0.0, 2) == Approx(-1.0).epsilon(1e-14));
    CHECK(eval_D(exp1, 0.0, 2) == Approx(fd).epsilon(1e-9));
    for (const auto& f : catalog()) CHECK(eval_D(f, 0.0, 0) == 0.0);
    CHECK(eval_D(lookup("power"), 0.0, 1) == Approx(11.0 / 12.0).epsilon(1e-13));
    CHECK(eval_D(lookup("ex2(0.125)"), 0.0, 1) == Approx(11.0 / 12.0 + 0.125 * 0.5).epsilon(1e-14));
    CHECK_THROWS_AS(eval_D(exp1, 1.0, 5), std::domain_error);
    CHECK_THROWS_AS(eval_D(exp1, -1.0, 0), std::domain_error);
}

TEST_CASE("catalog contents") {
    const auto cat = catalog();
    CHECK(cat.size() >= 6);
    std::set<std::string> names;
    for (const auto& f : cat) names.insert(f.name());
    for (const char* n : {"exp1", "exp-mix", "linear-plus-exp", "power", "ex2(0.125)", "f2"}) CHECK(names.count(n) == 1);

    const auto f2 = lookup("f2");
    CHECK(eval_D(f2, 0.0, 2) == Approx(-1.0 / 24).epsilon(1e-14));
    CHECK(eval_D(f2, 0.0, 1) == Approx(0.5).epsilon(1e-14));
    // f2'(r) = (1 - cos sqrt r)/r
    for (double r : {0.3, 3.9, 4.1, 17.0, 1e4})
        CHECK(eval_D(f2, r, 1) == Approx((1 - std::cos(std::sqrt(r))) / r).epsilon(1e-12));
}

TEST_CASE("f2 against direct quadrature of its defining integral") {
    const auto f2 = lookup("f2");
    for (double r : {0.5, 2.0, 10.0, 50.0}) {
        const double ref = integrate_gk15_scalar(
            [](double t) { return t < 1e-8 ? 0.5 - t / 24 : (1 - std::cos(std::sqrt(t))) / t; }, 0.0, r, 1e-14, 1e-10);
        CHECK(eval_D(f2, r, 0) == Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("power spectral entry equals (r+1)^{11/12} - 1") {
    const auto power = lookup("power");
    const auto closed = StructureFunction::closed_form(shifted_power_model(11.0 / 12.0));
    for (double r : {0.0, 1e-7, 0.01, 1.0, 30.0, 1e5})
        for (int o = 0; o <= 4; ++o) CHECK(power.eval(r, o) == Approx(closed.eval(r, o)).epsilon(1e-11));
    CHECK(power.eval(2.0, 0) == Approx(std::pow(3.0, 11.0 / 12.0) - 1).epsilon(1e-13));
}

TEST_CASE("finite-N atom equals 1 - sin(sqrt r)/sqrt r") {
    const auto sinc3 = lookup("sinc3");
    CHECK(sinc3.kind() == Kind::FiniteN);
    CHECK(sinc3.max_dimension() == 3);
    for (double r : {1e-6, 0.5, 7.0, 90.0, 400.0}) {
        const double s = std::sqrt(r);
        CHECK(sinc3.eval(r, 0) == Approx(1 - std::sin(s) / s).epsilon(1e-11));
        // D' = (sin s - s cos s)/(2 s^3)
        CHECK(sinc3.eval(r, 1) == Approx((std::sin(s) - s * std::cos(s)) / (2 * s * s * s)).epsilon(1e-8));
    }
    CHECK(sinc3.eval(0.0, 1) == Approx(1.0 / 6).epsilon(1e-14));
    CHECK(sinc3.eval(0.0, 2) == Approx(-1.0 / 60).epsilon(1e-14));
}

TEST_CASE("density pieces: power family and integrability errors") {
    SpectralRep s;
    DensityPiece p;
    p.family = DensityPiece::Family::Power;
    p.coeff = 2.0;
    p.exponent = 0.5;
    p.lower = 0.0;
    p.upper = 2.0;
    s.density = {p};
    const auto f = StructureFunction::bernstein(s);
    // D'(0) = 2 * integral_0^2 t^{1.5} dt
    CHECK(f.eval(0.0, 1) == Approx(2.0 * std::pow(2.0, 2.5) / 2.5).epsilon(1e-11));
    // D(r) against a direct oracle
    const double r = 0.7;
    const double ref =
        integrate_gk15_scalar([&](double t) { return 2.0 * std::sqrt(t) * -std::expm1(-r * t); }, 0.0, 2.0, 1e-14);
    CHECK(f.eval(r, 0) == Approx(ref).epsilon(1e-11));

    // heavy tail: t^{-3/2} on (0, inf) gives D(r) = 2 sqrt(pi r), so D'(0) is infinite
    p.exponent = -1.5;
    p.coeff = 1.0;
    p.upper = std::numeric_limits<double>::infinity();
    s.density = {p};
    const auto g = StructureFunction::bernstein(s);
    CHECK(g.eval(1.0, 0) == Approx(2 * std::sqrt(std::numbers::pi)).epsilon(1e-10));
    CHECK(g.eval(4.0, 1) == Approx(std::sqrt(std::numbers::pi) / 2).epsilon(1e-10));
    CHECK(g.eval(4.0, 2) == Approx(-std::sqrt(std::numbers::pi) / 16).epsilon(1e-10));
    CHECK(StructureFunction::from_json(g.descriptor()).eval(2.0, 0) == g.eval(2.0, 0));
    CHECK_THROWS_AS(g.eval(0.0, 1), std::domain_error);
    CHECK_THROWS_AS(g.increment(1.0, 1), std::domain_error);
}

TEST_CASE("spectral validation") {
    CHECK_THROWS_AS(StructureFunction::bernstein({-1.0, {{1, 1}}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(StructureFunction::bernstein({0.0, {{0.0, 1}}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(StructureFunction::bernstein({0.0, {{1.0, -1}}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(lookup("no-such-field"), std::invalid_argument);
    CHECK_THROWS_AS(lookup("ex2(abc)"), std::invalid_argument);
}

TEST_CASE("json descriptors round trip") {
    for (const auto& f : catalog()) {
        const auto g = StructureFunction::from_json(f.descriptor());
        CHECK(g.name() == f.name());
        for (double r : {0.0, 0.3, 5.0})
            for (int o = 0; o <= 4; ++o) CHECK(g.eval(r, o) == f.eval(r, o));
    }
    const auto inline_f = lookup(R"({"kind":"bernstein","A":0.5,"atoms":[[2,1]]})");
    CHECK(inline_f.eval(1.0, 0) == Approx(0.5 + 1 - std::exp(-2.0)).epsilon(1e-15));
}

TEST_CASE("bernstein sign pattern on a log grid") {
    for (const auto& f : catalog()) {
        if (f.kind() != Kind::BernsteinExponential) continue;
        for (double r : log_grid(1e-6, 1e6, 60)) {
            CHECK(f.eval(r, 0) >= 0.0);
            CHECK(f.eval(r, 1) >= 0.0);
            CHECK(f.eval(r, 2) <= 0.0);
            CHECK(f.eval(r, 3) >= 0.0);
            // mean value inequality D''(r) r > D'(r) - D'(0)
            CHECK(f.eval(r, 2) * r > f.increment(r, 1));
        }
    }
}

TEST_CASE("derivative consistency with richardson differences") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> U(0.05, 10.0);
    for (const auto& f : catalog()) {
        for (int i = 0; i < 20; ++i) {
            const double r = U(gen);
            for (int o = 1; o <= 4; ++o) {
                const double fd = richardson_derivative([&](double x) { return f.eval(x, o - 1); }, r, 3);
                const double exact = f.eval(r, o);
                INFO(f.name() << " r=" << r << " order=" << o);
                CHECK(exact == Approx(fd).epsilon(1e-6).scale(1e-9));
            }
        }
    }
}

TEST_CASE("increments and remainders agree with plain differences away from zero") {
    for (const auto& f : catalog())
        for (double r : {0.5, 3.0, 40.0})
            for (int o = 0; o <= 3; ++o) {
                CHECK(f.increment(r, o) == Approx(f.eval(r, o) - f.eval(0.0, o)).epsilon(1e-10).scale(1e-12));
                const double rem2 = f.eval(r, o) - f.eval(0.0, o) - r * f.eval(0.0, o + 1);
                CHECK(f.remainder(r, o, 2) == Approx(rem2).epsilon(1e-9).scale(1e-11));
            }
    // small r: remainder of D after the linear term is D''(0) r^2 / 2 to leading order
    for (const auto& f : catalog()) {
        const double r = 1e-7;
        CHECK(f.remainder(r, 0, 2) == Approx(0.5 * f.eval(0.0, 2) * r * r).epsilon(1e-6));
    }
}

TEST_CASE("ex2 third derivative changes sign at large r") {
    const auto f = lookup("ex2(0.125)");
    bool negative = false;
    for (double r : log_grid(1e4, 1e6, 400)) negative = negative || f.eval(r, 3) < 0.0;
    CHECK(negative);
}

TEST_CASE("log magnitude survives underflow") {
    const auto f = lookup("exp1");
    const auto l = f.log_abs(1e6, 2);
    CHECK(f.eval(1e6, 2) == 0.0);
    CHECK(l.sign == -1);
    CHECK(l.log_abs == Approx(-1e6).epsilon(1e-14));
    const auto p = lookup("power").log_abs(2.0, 2);
    CHECK(p.sign == -1);
    CHECK(std::exp(p.log_abs) == Approx(-lookup("power").eval(2.0, 2)).epsilon(1e-12));
}
