#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kacrice/assumptions.hpp"
#include "kacrice/errors.hpp"
#include "kacrice/quadrature.hpp"
#include "kacrice/rmt.hpp"
#include "kacrice/rmt_verify.hpp"

using namespace kacrice;
using doctest::Approx;

namespace {

// mean of x_i x_j over draws, with its standard error
struct Pair {
    double sum = 0, sumsq = 0;
    long n = 0;
    void add(double v) { sum += v, sumsq += v * v, ++n; }
    double mean() const { return sum / n; }
    double se() const { return std::sqrt((sumsq / n - mean() * mean()) / n); }
    bool within(double target, double z = 5.0) const { return std::abs(mean() - target) < z * se(); }
};

}  // namespace

TEST_CASE("eig_sym examples") {
    const auto id = eig_sym(Eigen::MatrixXd::Identity(4, 4));
    for (int i = 0; i < 4; ++i) CHECK(id.values(i) == Approx(1.0));
    Eigen::MatrixXd s(2, 2);
    s << 0, 1, 1, 0;
    const auto e = eig_sym(s);
    CHECK(e.values(0) == Approx(-1.0));
    CHECK(e.values(1) == Approx(1.0));

    RngStream rng(1, 0);
    Eigen::MatrixXd a = sample_goe(6, rng) * 3.0;
    const auto ea = eig_sym(a);
    CHECK(std::abs(ea.values.sum() - a.trace()) < 1e-10);
    const Eigen::MatrixXd back = ea.vectors * ea.values.asDiagonal() * ea.vectors.transpose();
    CHECK((back - a).norm() <= 1e-10 * a.norm());
    for (int i = 1; i < 6; ++i) CHECK(ea.values(i) >= ea.values(i - 1));

    Eigen::MatrixXd bad(2, 2);
    bad << 0, 1, 2, 0;
    CHECK_THROWS_AS(eig_sym(bad), std::invalid_argument);
}

TEST_CASE("goe moments") {
    RngStream rng(2, 0);
    Pair v11, c1213, v12;
    for (int t = 0; t < 100000; ++t) {
        const auto m = sample_goe(3, rng);
        v11.add(m(0, 0) * m(0, 0));
        v12.add(m(0, 1) * m(0, 1));
        c1213.add(m(0, 1) * m(0, 2));
    }
    CHECK(v11.within(1.0));
    CHECK(v12.within(0.5));
    CHECK(c1213.within(0.0));
}

TEST_CASE("goi sampler examples") {
    CHECK(goi1_ks(3.0, 100000, 4).passed());
    CHECK(goi1_ks(0.0, 100000, 5).passed());
    // the same draws against the wrong variance are rejected
    {
        RngStream rng(4, 0);
        std::vector<double> x(20000);
        for (auto& v : x) v = sample_goi(1, 3.0, rng)(0, 0);
        std::sort(x.begin(), x.end());
        double d = 0;
        for (size_t t = 0; t < x.size(); ++t) d = std::max(d, std::abs(0.5 * std::erfc(-x[t] / std::sqrt(2.0)) - (t + 0.5) / x.size()));
        CHECK(kolmogorov_sf(d, x.size()) < 1e-3);
    }
    RngStream rng(6, 0);
    const GoiSampler goi(2, -0.4);
    Pair c12;
    for (int t = 0; t < 100000; ++t) {
        const auto m = goi(rng);
        c12.add(m(0, 0) * m(1, 1));
    }
    CHECK(c12.within(-0.4));
    CHECK_THROWS_AS(GoiSampler(2, -0.5), ConditionError);
    CHECK_THROWS_AS(GoiSampler(4, -0.25), ConditionError);
    CHECK_NOTHROW(GoiSampler(4, -0.25 + 1e-9));
}

TEST_CASE("goi with c = 0 and the shifted path share moments") {
    CHECK(goi_invariance_check(3, 0.0, 100000, 7).passed());
    RngStream rng(8, 0);
    Pair a, b;
    for (int t = 0; t < 100000; ++t) {
        const auto m = sample_goi_shifted(2, 0.7, rng);
        a.add(m(0, 0) * m(1, 1));
        b.add(m(0, 0) * m(0, 0));
    }
    CHECK(a.within(0.7));
    CHECK(b.within(1.7));
    CHECK_THROWS_AS(sample_goi_shifted(2, -0.1, rng), std::invalid_argument);
}

TEST_CASE("goi orthogonal invariance") {
    CHECK(goi_invariance_check(3, 0.5, 100000, 9).passed());
    CHECK(goi_invariance_check(3, -0.2, 100000, 10).passed());
}

TEST_CASE("nondegeneracy boundary of the diagonal covariance") {
    for (int n : {1, 2, 5, 9}) {
        auto min_eig = [&](double c) {
            Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(n, n, c);
            cov.diagonal().array() += 1.0;
            return eigvals_sym(cov)(0);
        };
        const double b = -1.0 / n;
        CHECK(std::abs(min_eig(b)) < 1e-10);
        CHECK(min_eig(b + 1e-8) > 0.0);
        CHECK(min_eig(b - 1e-8) < 0.0);
    }
}

TEST_CASE("goi density examples") {
    Eigen::VectorXd one(1);
    one << 0.0;
    CHECK(goi_eig_logdensity(0.0, one) == Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
    for (double c : {-0.5, 0.0, 3.0}) {
        one << 1.3;
        CHECK(goi_eig_logdensity(c, one) == Approx(-0.5 * std::log(2.0 * std::numbers::pi * (1.0 + c)) - 1.69 / (2.0 * (1.0 + c))));
    }
    Eigen::VectorXd two(2);
    two << 1.0, -1.0;
    CHECK(std::isinf(goi_eig_logdensity(0.0, two)));
    CHECK_THROWS_AS(goi_eig_logdensity(-0.5, two), ConditionError);

    // normalization on the ordered half-plane
    for (double c : {0.5, 0.0, -0.4}) {
        const double total = integrate_gk15_scalar(
            [&](double x) {
                return integrate_gk15_scalar(
                    [&](double y) {
                        Eigen::VectorXd l(2);
                        l << x, y;
                        return std::exp(goi_eig_logdensity(c, l));
                    },
                    x, 14.0, 1e-11);
            },
            -14.0, 14.0, 1e-10);
        CHECK(total == Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("goi density chi-squared") {
    for (double c : {0.0, 0.5, -0.4}) {
        CAPTURE(c);
        const auto r = goi2_density_chi2(c, 100000, 11);
        CHECK(r.dof > 50);
        CHECK(r.passed());
    }
}

TEST_CASE("sgoi moments and decompositions") {
    // d2 = d3 = 0 is GOI(d1)
    CHECK(sgoi_covariance_check(3, 0.3, 0.0, 0.0, 100000, 12).passed());
    const double d1 = 0.4, d2 = 0.2, d3 = 0.3;
    CHECK(sgoi_nondeg(3, d1, d2, d3));
    const auto a = sgoi_covariance_check(3, d1, d2, d3, 100000, 13);
    const auto b = sgoi_covariance_check(3, d1, d2, d3, 100000, 14, SgoiPath::Block, SgoiDecomposition{d1 + d2, 0.0});
    const auto c = sgoi_covariance_check(3, d1, d2, d3, 100000, 15, SgoiPath::Direct);
    CHECK(a.passed());
    CHECK(b.passed());
    CHECK(c.passed());
    // negative d1 uses vartheta = d1
    CHECK(default_decomposition(-0.2, 0.1).vartheta == -0.2);
    CHECK(sgoi_covariance_check(3, -0.2, 0.1, 0.2, 100000, 16).passed());

    RngStream rng(17, 0);
    Pair v11, c12, c23;
    const SgoiSampler s(3, d1, d2, d3);
    for (int t = 0; t < 100000; ++t) {
        const auto m = s(rng);
        v11.add(m(0, 0) * m(0, 0));
        c12.add(m(0, 0) * m(1, 1));
        c23.add(m(1, 1) * m(2, 2));
    }
    CHECK(v11.within(1 + d1 + 2 * d2 + d3));
    CHECK(c12.within(d1 + d2));
    CHECK(c23.within(d1));

    CHECK_THROWS_AS(SgoiSampler(3, -0.5, 0.0, 0.0), ConditionError);
    // vartheta far outside its admissible range is not realizable
    CHECK_THROWS_AS(SgoiSampler(3, 0.4, 0.0, 0.0, SgoiDecomposition{0.0, 2.0}), ConditionError);
}

TEST_CASE("sgoi sign grid") {
    const auto g = sgoi_sign_grid(1000, 18);
    CHECK(g.disagreements == 0);
    CHECK(g.tested == 1000);
}

TEST_CASE("conditional corner") {
    const auto r0 = conditional_corner_check(3, 0.5, 0.0, 0.0, 0.0, 200000, 19);
    CHECK(r0.slope_theory == Approx(0.5 / 1.5));
    CHECK(r0.c_theory == Approx(0.5 - 0.25 / 1.5));
    CHECK(r0.passed());
    const auto r1 = conditional_corner_check(3, 0.4, 0.2, 0.3, 0.5, 200000, 20);
    CHECK(r1.passed());
    CHECK(r1.window_samples > 1000);
    // with d2 = d3 = 0 and d1 = 0 the block is an unshifted GOE independent of the corner
    const auto r2 = conditional_corner_check(2, 0.0, 0.0, 0.0, 0.0, 50000, 21);
    CHECK(r2.slope_theory == 0.0);
    CHECK(r2.c_theory == 0.0);
    CHECK(r2.passed());
}

TEST_CASE("ensemble spec json") {
    const auto s = EnsembleSpec::from_json(nlohmann::json::parse(R"({"ensemble":"sgoi","n":3,"d1":0.1,"d2":0.2,"d3":0.3})"));
    CHECK(s.tag == Ensemble::SGOI);
    CHECK(s.n == 3);
    CHECK(s.nondegenerate());
    CHECK(EnsembleSpec::from_json(s.to_json()).d3 == 0.3);
    CHECK_THROWS_AS(EnsembleSpec::from_json(nlohmann::json::parse(R"({"ensemble":"gue"})")), std::invalid_argument);
    CHECK_FALSE(EnsembleSpec::from_json(nlohmann::json::parse(R"({"ensemble":"goi","n":2,"c":-0.5})")).nondegenerate());
}
