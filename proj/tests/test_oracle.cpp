#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kacrice/errors.hpp"
#include "kacrice/kac_rice.hpp"
#include "kacrice/oracle.hpp"

using namespace kacrice;
using doctest::Approx;

namespace {

const double kPi = std::numbers::pi;

int count_index(const std::vector<CriticalPoint>& pts, int k) {
    int c = 0;
    for (const auto& p : pts) c += p.index == k;
    return c;
}

bool has_point(const std::vector<CriticalPoint>& pts, double x, double y, int k, double tol = 1e-4) {
    for (const auto& p : pts)
        if (std::hypot(p.location(0) - x, p.location(1) - y) < tol && p.index == k) return true;
    return false;
}

}  // namespace

TEST_CASE("lattice and sampling moments") {
    const auto f = lookup("exp1");
    const Lattice lat = Lattice::covering(2, 1.0, 0.25);
    CHECK(lat.per_axis() == 9);
    const FieldSampler sampler(f, lat);
    const long origin = lat.size() / 2;
    CHECK(lat.position(origin).norm() == 0.0);
    const long unit = origin + 4;  // (1, 0)
    CHECK(lat.position(unit).norm() == Approx(1.0));

    // five fixed pairs of lattice nodes
    const long pairs[5][2] = {{0, 80}, {10, 11}, {13, 67}, {40, 44}, {5, 77}};
    double v = 0.0, v2 = 0.0;
    double d[5] = {}, d2[5] = {};
    const int draws = 2000;
    for (int r = 0; r < draws; ++r) {
        const FieldSample s = sampler.draw(3, r);
        CHECK(s.values[origin] == 0.0);
        const double x = s.values[unit];
        v += x * x;
        v2 += x * x * x * x;
        for (int p = 0; p < 5; ++p) {
            const double inc = s.values[pairs[p][0]] - s.values[pairs[p][1]];
            d[p] += inc * inc;
            d2[p] += inc * inc * inc * inc;
        }
    }
    auto within = [&](double sum, double sumsq, double target) {
        const double mean = sum / draws;
        const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
        return std::abs(mean - target) < 5.0 * se;
    };
    CHECK(within(v, v2, f.eval(1.0)));
    for (int p = 0; p < 5; ++p) {
        CAPTURE(p);
        CHECK(within(d[p], d2[p], f.eval((lat.position(pairs[p][0]) - lat.position(pairs[p][1])).squaredNorm())));
    }
    CHECK(pinned_covariance(f, lat.position(unit), lat.position(unit)) == Approx(f.eval(1.0)));
}

TEST_CASE("kernel factorization for every catalog field") {
    for (const auto& f : catalog()) {
        CAPTURE(f.name());
        const int N = std::min(2, f.max_dimension());
        const FieldSampler s(f, Lattice::covering(N, 1.9, 0.1));
        CHECK(s.relative_jitter() <= 1e-10);
    }
    CHECK_THROWS_AS(FieldSampler(lookup("ex2(0.125)"), Lattice::covering(2, 1.0, 0.1)), ConditionError);
}

TEST_CASE("injected surfaces") {
    const Lattice lat = Lattice::covering(2, 3.0, 0.05);
    {
        const auto s = tabulate(lat, [](const Eigen::VectorXd& x) { return 1.0 - (x(0) - 0.13) * (x(0) - 0.13) - x(1) * x(1); });
        const auto pts = count_critical(s, 0.0, 2.5);
        REQUIRE(pts.size() == 1);
        CHECK(has_point(pts, 0.13, 0.0, 2));
        CHECK(pts[0].value == Approx(1.0));
        CHECK(pts[0].residual <= 1e-6);
    }
    {
        const auto s = tabulate(lat, [](const Eigen::VectorXd& x) { return x(0) * x(0) - x(1) * x(1); });
        const auto pts = count_critical(s, 0.0, 2.5);
        REQUIRE(pts.size() == 1);
        CHECK(has_point(pts, 0.0, 0.0, 1));
        CHECK(count_critical(s, 0.5, 2.5).empty());
    }
    {
        const auto s = tabulate(lat, [](const Eigen::VectorXd& x) { return std::pow(x(0) - 0.3, 2) + 2.0 * std::pow(x(1) + 0.2, 2); });
        const auto pts = count_critical(s, 0.0, 2.5);
        REQUIRE(pts.size() == 1);
        CHECK(has_point(pts, 0.3, -0.2, 0));
    }
    {
        const auto s = tabulate(lat, [](const Eigen::VectorXd& x) { return x(0) * x(0) * x(0) - 3.0 * x(0) + x(1) * x(1); });
        const auto pts = count_critical(s, 0.0, 2.5);
        REQUIRE(pts.size() == 2);
        CHECK(has_point(pts, 1.0, 0.0, 0));
        CHECK(has_point(pts, -1.0, 0.0, 1));
    }
    {
        // sin 2x sin 2y: saddles on the (pi/2) lattice, extrema offset by pi/4
        const auto s = tabulate(lat, [](const Eigen::VectorXd& x) { return std::sin(2 * x(0)) * std::sin(2 * x(1)); });
        const double R2 = 2.0;
        const auto pts = count_critical(s, 0.0, R2);
        int expected_saddles = 0, expected_extrema = 0, max_seen = 0, min_seen = 0;
        for (int i = -3; i <= 3; ++i)
            for (int j = -3; j <= 3; ++j) {
                const double a = i * kPi / 2, b = j * kPi / 2;
                if (std::hypot(a, b) < R2) {
                    ++expected_saddles;
                    CHECK(has_point(pts, a, b, 1));
                }
                const double c = kPi / 4 + i * kPi / 2, d = kPi / 4 + j * kPi / 2;
                if (std::hypot(c, d) < R2) {
                    ++expected_extrema;
                    const int k = std::sin(2 * c) * std::sin(2 * d) > 0 ? 2 : 0;
                    CHECK(has_point(pts, c, d, k));
                    (k == 2 ? max_seen : min_seen)++;
                }
            }
        CHECK(static_cast<int>(pts.size()) == expected_saddles + expected_extrema);
        CHECK(count_index(pts, 2) == max_seen);
        CHECK(count_index(pts, 0) == min_seen);
    }
    {
        const Lattice line = Lattice::covering(1, 3.0, 0.05);
        const auto s = tabulate(line, [](const Eigen::VectorXd& x) { return std::cos(3.0 * x(0)); });
        const auto pts = count_critical(s, 0.0, 2.5);
        // x = k pi / 3 with |x| < 2.5: k = -2..2
        CHECK(pts.size() == 5);
        int maxima = 0;
        for (const auto& p : pts) maxima += p.index == 1;
        CHECK(maxima == 3);
    }
}

TEST_CASE("grid refinement on fixed realizations") {
    const auto f = StructureFunction::bernstein({0.0, {{4.0, 1.0}}, {}}, "exp4");
    // coarse spacing 0.08 puts about six cells in one correlation length
    const FieldSampler fine(f, Lattice::covering(2, 1.28, 0.04));
    int coarse_total = 0, fine_total = 0;
    for (int r = 0; r < 12; ++r) {
        const FieldSample s = fine.draw(7, r);
        fine_total += static_cast<int>(count_critical(s, 0.2, 0.8).size());
        coarse_total += static_cast<int>(count_critical(s.subsample(2), 0.2, 0.8).size());
    }
    CHECK(fine_total > 40);
    CHECK(std::abs(fine_total - coarse_total) <= 0.02 * fine_total);
}

TEST_CASE("monte carlo counts") {
    const auto f = lookup("exp1");
    OracleBudget b;
    b.h = 0.08;
    const auto none = mc_crt(f, 2, 0.5, 1.5, ValueSet::none(), 5, b);
    CHECK(none.total_mean == 0.0);

    const auto all = mc_crt(f, 2, 0.5, 1.5, ValueSet::real_line(), 20, b);
    const auto lo = mc_crt(f, 2, 0.5, 1.5, ValueSet::parse("-inf:0"), 20, b);
    const auto hi = mc_crt(f, 2, 0.5, 1.5, ValueSet::parse("0:inf"), 20, b);
    for (int r = 0; r < 20; ++r)
        for (int k = 0; k <= 3; ++k) CHECK(all.per_rep[r][k] == lo.per_rep[r][k] + hi.per_rep[r][k]);

    // expected count against the Kac-Rice value, and the law under a rotated lattice
    const auto mc = mc_crt(f, 2, 0.5, 1.5, ValueSet::real_line(), 120, b);
    const double kr = crt_shell_goi(f, 2, ValueSet::real_line(), 0.5, 1.5, std::nullopt).estimate;
    CHECK(std::abs(mc.total_mean - kr) < 3.0 * mc.total_se);
    CHECK(mc.unclassified_mean == 0.0);
    b.angle = 0.4;
    b.seed += 1;
    const auto rot = mc_crt(f, 2, 0.5, 1.5, ValueSet::real_line(), 120, b);
    for (int k = 0; k <= 2; ++k) {
        CAPTURE(k);
        CHECK(std::abs(rot.mean[k] - mc.mean[k]) < 3.0 * std::hypot(rot.se[k], mc.se[k]));
    }
}
