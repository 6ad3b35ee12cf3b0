#include "kacrice/special.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_expint.h>

namespace kacrice {

double erfcx(double x) {
    if (x < 26.0) {
        if (x < -26.0) return std::numeric_limits<double>::infinity();
        return std::exp(x * x) * std::erfc(x);
    }
    // asymptotic expansion; relative error below 1e-16 for x >= 26
    const double inv = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 10; ++k) {
        term *= -(2.0 * k - 1.0) * inv;
        sum += term;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

double pochhammer(double a, int n) {
    double p = 1.0;
    for (int i = 0; i < n; ++i) p *= a + i;
    return p;
}

namespace {

// sum_{k >= from} (-z/4)^k / ((M/2)_k k!)
double lambda_series_tail(double M, double z, int from) {
    const double half = 0.5 * M;
    double term = 1.0;
    for (int k = 0; k < from; ++k) term *= -0.25 * z / ((half + k) * (k + 1));
    double sum = term;
    for (int k = from; k < 100000; ++k) {
        term *= -0.25 * z / ((half + k) * (k + 1));
        sum += term;
        if (std::abs(term) <= 1e-18 * std::abs(sum) && k > from + 2) break;
        if (term == 0.0) break;
    }
    return sum;
}

double lambda_bessel(double M, double x) {
    const double nu = 0.5 * M - 1.0;
    return std::exp(std::lgamma(0.5 * M) - nu * std::log(0.5 * x)) * std::cyl_bessel_j(nu, x);
}

double lambda_real(double M, double x) {
    if (x == 0.0) return 1.0;
    if (M == 1.0) return std::cos(x);
    if (M == 3.0) return std::sin(x) / x;
    if (x < std::max(8.0, 0.2 * M)) return lambda_series_tail(M, x * x, 0);
    const double v = lambda_bessel(M, x);
    return std::isfinite(v) ? v : lambda_series_tail(M, x * x, 0);
}

}  // namespace

double lambda_kernel(int N, double x) {
    if (N < 1) throw std::domain_error("lambda_kernel: N must be at least 1");
    if (!(x >= 0.0)) throw std::domain_error("lambda_kernel: x must be nonnegative");
    return lambda_real(static_cast<double>(N), x);
}

double lambda_sqrt_remainder(double M, double z, int terms) {
    if (z < 0.0) throw std::domain_error("lambda_sqrt_remainder: z must be nonnegative");
    if (terms <= 0) return lambda_real(M, std::sqrt(z));
    if (z < 4.0) return lambda_series_tail(M, z, terms);
    double poly = 0.0, term = 1.0;
    for (int k = 0; k < terms; ++k) {
        poly += term;
        term *= -0.25 * z / ((0.5 * M + k) * (k + 1));
    }
    return lambda_real(M, std::sqrt(z)) - poly;
}

double exp_neg_remainder(double x, int terms) {
    if (terms <= 0) return std::exp(-x);
    if (terms == 1) return std::expm1(-x);
    if (std::abs(x) < 2.0) {
        double term = 1.0;
        for (int j = 1; j <= terms; ++j) term *= -x / j;
        double sum = term;
        for (int j = terms + 1; j < terms + 60; ++j) {
            term *= -x / j;
            sum += term;
            if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    double poly = 0.0, term = 1.0;
    for (int j = 0; j < terms; ++j) {
        poly += term;
        term *= -x / (j + 1);
    }
    return std::exp(-x) - poly;
}

double binomial_remainder(double x, double s, int terms) {
    if (!(x > -1.0)) throw std::domain_error("binomial_remainder: x must exceed -1");
    if (terms <= 0) return std::exp(-s * std::log1p(x));
    if (terms == 1) return std::expm1(-s * std::log1p(x));
    // coefficient of x^j is (-1)^j (s)_j / j!
    if (std::abs(x) < 0.5) {
        double coef = 1.0;
        for (int j = 0; j < terms; ++j) coef *= -(s + j) / (j + 1);
        double power = std::pow(x, terms);
        double sum = coef * power;
        for (int j = terms; j < terms + 400; ++j) {
            coef *= -(s + j) / (j + 1);
            power *= x;
            const double add = coef * power;
            sum += add;
            if (std::abs(add) <= 1e-18 * std::abs(sum) || add == 0.0) break;
        }
        return sum;
    }
    double poly = 0.0, coef = 1.0, power = 1.0;
    for (int j = 0; j < terms; ++j) {
        poly += coef * power;
        coef *= -(s + j) / (j + 1);
        power *= x;
    }
    return std::exp(-s * std::log1p(x)) - poly;
}

double cin(double x) {
    if (x < 0.0) throw std::domain_error("cin: x must be nonnegative");
    if (x < 4.0) {
        // sum_{k>=1} (-1)^{k+1} x^{2k} / (2k (2k)!)
        const double x2 = x * x;
        double term = 1.0, sum = 0.0;
        for (int k = 1; k < 60; ++k) {
            term *= -x2 / ((2.0 * k - 1.0) * (2.0 * k));
            const double add = -term / (2.0 * k);
            sum += add;
            if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    static const bool quiet = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)quiet;
    gsl_sf_result ci;
    if (gsl_sf_Ci_e(x, &ci) != GSL_SUCCESS) throw std::runtime_error("cin: cosine integral failed");
    return std::numbers::egamma + std::log(x) - ci.val;
}

}  // namespace kacrice
