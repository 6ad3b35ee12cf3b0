#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kacrice/quadrature.hpp"

using namespace kacrice;

TEST_CASE("gauss rules integrate polynomials exactly") {
    const auto& gl = gauss_legendre(10);
    double s = 0, s8 = 0;
    for (int i = 0; i < 10; ++i) {
        s += gl.weights[i];
        s8 += gl.weights[i] * std::pow(gl.nodes[i], 8);
    }
    CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s8 == doctest::Approx(2.0 / 9).epsilon(1e-13));

    const auto& gh = gauss_hermite_normal(12);
    double m0 = 0, m4 = 0, m6 = 0;
    for (int i = 0; i < 12; ++i) {
        m0 += gh.weights[i];
        m4 += gh.weights[i] * std::pow(gh.nodes[i], 4);
        m6 += gh.weights[i] * std::pow(gh.nodes[i], 6);
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(m6 == doctest::Approx(15.0).epsilon(1e-12));

    const auto& lag = gauss_laguerre(8);
    double l3 = 0;
    for (int i = 0; i < 8; ++i) l3 += lag.weights[i] * std::pow(lag.nodes[i], 3);
    CHECK(l3 == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("adaptive kronrod handles vector integrands") {
    QuadOptions opt;
    opt.rel_tol = 1e-12;
    opt.max_intervals = 500;
    auto r = integrate_gk15(
        [](double x) {
            Eigen::VectorXd v(3);
            v << std::exp(-x * x), std::sqrt(x), std::cos(20 * x);
            return v;
        },
        0.0, 2.0, opt);
    CHECK(r.converged);
    CHECK(r.value(0) == doctest::Approx(std::sqrt(std::numbers::pi) / 2 * std::erf(2.0)).epsilon(1e-12));
    CHECK(r.value(1) == doctest::Approx(2.0 / 3 * std::pow(2.0, 1.5)).epsilon(1e-10));
    CHECK(r.value(2) == doctest::Approx(std::sin(40.0) / 20).epsilon(1e-10));
}

TEST_CASE("parallel node evaluation is bit identical") {
    auto f = [](double x) {
        Eigen::VectorXd v(1);
        v << std::log1p(x) * std::sin(3 * x);
        return v;
    };
    QuadOptions serial;
    serial.rel_tol = 1e-10;
    Workers four{4};
    QuadOptions par = serial;
    par.workers = &four;
    CHECK(integrate_gk15(f, 0, 5, serial).value(0) == integrate_gk15(f, 0, 5, par).value(0));
}

TEST_CASE("richardson derivative") {
    CHECK(richardson_derivative([](double x) { return std::exp(-x); }, 1.0) ==
          doctest::Approx(-std::exp(-1.0)).epsilon(1e-10));
}
