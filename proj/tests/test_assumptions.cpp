#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "kacrice/assumptions.hpp"
#include "kacrice/local_params.hpp"
#include "test_fields.hpp"

using namespace kacrice;
using doctest::Approx;

namespace {

double min_eig(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

std::vector<StructureFunction> bernstein_members() {
    std::vector<StructureFunction> out;
    for (const auto& f : catalog())
        if (f.kind() == Kind::BernsteinExponential) out.push_back(f);
    return out;
}

}  // namespace

TEST_CASE("smoothness") {
    const auto s = check_smoothness(lookup("exp1"));
    CHECK(s.holds());
    CHECK(std::abs(s.witnesses[0].lhs) == Approx(1.0));

    SpectralRep lin;
    lin.linear_coeff = 1.0;
    CHECK(check_smoothness(StructureFunction::bernstein(lin, "linear")).status == ConditionStatus::Fails);

    // 2 Cin(sqrt r) = sum_k (-1)^{k+1} r^k / (k (2k)!), so the fourth derivative at 0 is -4!/(4 * 8!)
    const auto f2 = check_smoothness(lookup("f2"));
    CHECK(f2.holds());
    CHECK(f2.witnesses[0].lhs == Approx(-24.0 / (4.0 * 40320.0)).epsilon(1e-10));
}

TEST_CASE("nondegeneracy examples") {
    const auto f = lookup("exp1");
    CHECK(nondeg_scalar(f, 2, 1.0) > 0.0);
    const double tiny = nondeg_scalar(f, 2, 1e-8);
    CHECK(tiny > 0.0);
    CHECK(tiny < 1e-20);
    CHECK(nondeg_dimfree(f, 1.0) > 0.0);
    CHECK(nondeg_dimfree(lookup("linear-plus-exp"), 2.0) > 0.0);
    // exact arithmetic for exp1 at r = 1, N = 2
    const double e = std::exp(-1.0);
    const double sy2 = 1.0 - e - e * e;
    const double expect = sy2 + (3.0 * e * e + 2.0 * (-e) * (e - 1.0) + (e - 1.0) * (e - 1.0)) / (4.0 * -1.0);
    CHECK(nondeg_scalar(f, 2, 1.0) == Approx(expect).epsilon(1e-13));
}

TEST_CASE("quadratic D is radially degenerate") {
    // D = a r + b r^2: D'' constant, D' linear. The five terms leave -4 b^2 r^3 / a, never positive.
    for (double b : {-0.1, -0.5}) {
        const auto q = quadratic_field(1.0, b);
        for (int N : {1, 2, 5})
            for (double r : {0.1, 0.5, 1.0}) {
                const double v = nondeg_scalar(q, N, r);
                CHECK(v <= 0.0);
                CHECK(v == Approx(-4.0 * b * b * r * r * r).epsilon(1e-10));
            }
    }
}

TEST_CASE("dimension-free condition dominates every N") {
    const auto grid = default_r_grid();
    int positives = 0;
    for (const auto& f : catalog()) {
        for (double r : grid) {
            if (r > 1e3) continue;
            if (nondeg_dimfree(f, r) > 0.0) {
                ++positives;
                for (int N = 1; N <= 10; ++N) CHECK(nondeg_scalar(f, N, r) > 0.0);
            }
        }
    }
    CHECK(positives > 100);
}

TEST_CASE("radial condition examples") {
    const auto grid = default_r_grid();
    const auto a = check_assumption3(lookup("exp1"), grid);
    CHECK(a.holds());
    CHECK(a.normalized_margin > 0.0);
    const auto f2 = check_assumption3(lookup("f2"), grid);
    CHECK(f2.status == ConditionStatus::Fails);
    const auto ex2 = check_assumption3(lookup("ex2(0.125)"), grid);
    CHECK(ex2.holds());
    CHECK(check_assumption3(lookup("exp1"), 1e6).holds());
}

TEST_CASE("c positivity") {
    const auto f = lookup("exp1");
    CHECK(check_c_positive(f, 1.0).holds());
    CHECK(local_params(f, 1.0, 0.0).c > 0.0);
    // small r limit is 1/3
    CHECK(local_params(f, 1e-4, 0.0).c == Approx(1.0 / 3.0).epsilon(1e-4));

    std::mt19937_64 gen(7);
    const auto fields = catalog();
    std::uniform_int_distribution<size_t> pick(0, fields.size() - 1);
    std::uniform_real_distribution<double> logr(-3.0, 3.0);
    int implied = 0;
    for (int t = 0; t < 200; ++t) {
        const auto& f = fields[pick(gen)];
        const double r = std::pow(10.0, logr(gen));
        if (check_assumption3(f, r).holds()) {
            ++implied;
            CHECK(check_c_positive(f, r).holds());
        }
    }
    CHECK(implied > 100);
}

TEST_CASE("bernstein property suite on the full grid") {
    const auto grid = default_r_grid();
    for (const auto& f : bernstein_members()) {
        CAPTURE(f.name());
        const auto a3 = check_assumption3(f, grid);
        CHECK(a3.holds());
        CHECK(check_bernstein_inequality1(f, grid).holds());
        CHECK(check_bernstein_inequality2(f, grid).holds());
        CHECK(check_mean_value(f, grid).holds());
        // first radial inequality implies the dimension-free nondegeneracy and the second one
        for (double r : grid) {
            const auto one = check_assumption3(f, r);
            if (one.witnesses[0].normalized > kIndeterminateBand) {
                CHECK(check_nondeg_dimfree(f, {r}).status != ConditionStatus::Fails);
                CHECK(one.witnesses[1].normalized > 0.0);
            }
        }
    }
}

TEST_CASE("grid parsing") {
    const auto g = default_r_grid();
    CHECK(g.size() == 100);
    CHECK(g.front() == Approx(1e-6));
    CHECK(g.back() == Approx(1e6));
    CHECK(parse_r_grid("log:1:100:3")[1] == Approx(10.0));
    CHECK(parse_r_grid("0.5,2").size() == 2);
    CHECK_THROWS_AS(parse_r_grid("log:0:1:3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_r_grid("-1"), std::invalid_argument);
}

TEST_CASE("sgoi nondegeneracy examples") {
    CHECK(sgoi_nondeg(2, 1.0, 0.0, 0.0));
    const double det = theta_matrix(2, 1.0, 0.0, 0.0).determinant();
    CHECK(det == Approx(3.0));
    CHECK(det == Approx((1.0 + 1.0) * sgoi_schur(2, 1.0, 0.0, 0.0)));
    CHECK_FALSE(sgoi_nondeg(3, -0.5, 0.0, 0.0));
    CHECK(std::abs(sgoi_margin(3, -0.5, 0.0, 0.0)) < kIndeterminateBand);
}

TEST_CASE("sgoi formula against the eigenvalues of theta") {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<int> n(2, 6);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    int disagreements = 0;
    for (int t = 0; t < 1000; ++t) {
        const int N = n(gen);
        const double d1 = u(gen), d2 = u(gen), d3 = u(gen);
        const auto T = theta_matrix(N, d1, d2, d3);
        const double e = min_eig(T) / T.norm();
        if (std::abs(e) < kIndeterminateBand || std::abs(sgoi_margin(N, d1, d2, d3)) < kIndeterminateBand) continue;
        if ((e > 0.0) != sgoi_nondeg(N, d1, d2, d3)) ++disagreements;
        // det Theta factors as (1 + (N-1) d1) times the Schur term
        CHECK(T.determinant() == Approx((1.0 + (N - 1) * d1) * sgoi_schur(N, d1, d2, d3)).epsilon(1e-8).scale(1e-8));
    }
    CHECK(disagreements == 0);
}

TEST_CASE("xi matrix: sufficient condition for d1 > 0") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int tested = 0;
    for (int t = 0; t < 2000; ++t) {
        const int N = 2 + t % 4;
        const double d1 = std::abs(u(gen)) + 1e-3, d2 = u(gen), d3 = u(gen);
        const double vs = (d1 * d1 + d1 * d2) / (1.0 + d1);
        if (xi_d1pos_expression(N, d1, d2, d3, vs) > 1e-9) {
            ++tested;
            CHECK(min_eig(xi_matrix(N, d1, d2, d3, vs, 0.0)) > 0.0);
        }
    }
    CHECK(tested > 200);
    // the decomposition reproduces theta when summed back
    const double d1 = 0.4, d2 = 0.1, d3 = -0.2;
    const auto X = xi_matrix(3, d1, d2, d3, 0.1, 0.0);
    CHECK(X(0, 2) + X(0, 1) == Approx(d1 + d2));
    CHECK(X(1, 1) + 2.0 * X(1, 2) + X(2, 2) == Approx(1.0 + d1));
}

TEST_CASE("covariance_full structure") {
    const auto f = lookup("exp-mix");
    Eigen::VectorXd x(2);
    x << 1.0, 0.0;
    const auto C = covariance_full(f, x);
    REQUIRE(C.rows() == 6);
    CHECK(C(0, 1) == Approx(f.eval(1.0, 1)));
    CHECK(C(0, 2) == 0.0);
    CHECK(C.block(1, 3, 2, 3).norm() == 0.0);
    CHECK((C - C.transpose()).norm() == 0.0);
    // Var d_11 H = -6 D''(0), Var d_12 H = -2 D''(0)
    CHECK(C(3, 3) == Approx(-6.0 * f.eval(0.0, 2)));
    CHECK(C(5, 5) == Approx(-2.0 * f.eval(0.0, 2)));
}

TEST_CASE("positive definiteness of covariance_full matches the nondegeneracy scalar") {
    std::mt19937_64 gen(3);
    const auto fields = catalog();
    std::uniform_int_distribution<size_t> pick(0, fields.size() - 1);
    std::uniform_int_distribution<int> dim(1, 4);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> logr(-2.0, std::log10(50.0));
    int agree = 0;
    for (int t = 0; t < 100; ++t) {
        const auto& f = fields[pick(gen)];
        const int N = dim(gen);
        Eigen::VectorXd x(N);
        for (int i = 0; i < N; ++i) x(i) = g(gen);
        x *= std::sqrt(std::pow(10.0, logr(gen))) / x.norm();
        const auto C = covariance_full(f, x);
        const bool pd = C.llt().info() == Eigen::Success && min_eig(C) > 0.0;
        const double nd = nondeg_scalar(f, N, x.squaredNorm());
        CAPTURE(f.name());
        CAPTURE(N);
        CHECK(pd == (nd > 0.0));
        agree += pd == (nd > 0.0);
    }
    CHECK(agree == 100);
    // the quadratic field is singular
    const auto q = quadratic_field(1.0, -0.3);
    Eigen::VectorXd x(2);
    x << 0.6, 0.2;
    CHECK_FALSE(min_eig(covariance_full(q, x)) > 1e-12);
}

TEST_CASE("sgoi nondegeneracy of the conditioned hessian matches the scalar condition") {
    std::mt19937_64 gen(9);
    const auto fields = catalog();
    std::uniform_int_distribution<size_t> pick(0, fields.size() - 1);
    std::uniform_int_distribution<int> dim(2, 4);
    std::uniform_real_distribution<double> logr(-2.0, 2.0);
    for (int t = 0; t < 100; ++t) {
        const auto& f = fields[pick(gen)];
        const int N = dim(gen);
        const double r = std::pow(10.0, logr(gen));
        const LocalParams p = local_params(f, std::sqrt(r), 0.0);
        CAPTURE(f.name());
        CHECK(sgoi_nondeg(N, p.d1, p.d2, p.d3) == (nondeg_scalar(f, N, r) > 0.0));
    }
}
