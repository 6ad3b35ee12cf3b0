#pragma once

#include <cmath>
#include <numbers>

namespace kacrice {

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Phi(x), accurate in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// 1 - Phi(x).
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

/// Lambda_N(x) = 0F1(; N/2; -x^2/4): cos x for N = 1, Gamma(N/2)(x/2)^{1-N/2} J_{N/2-1}(x) otherwise.
/// Throws std::domain_error for N < 1 or x < 0.
double lambda_kernel(int N, double x);

/// Lambda_M(sqrt(z)) with the first `terms` Taylor terms in z removed.
/// M may be any positive real (derivatives shift M by 2 per order).
double lambda_sqrt_remainder(double M, double z, int terms);

/// e^{-x} minus its Taylor polynomial of degree terms-1 at 0.
double exp_neg_remainder(double x, int terms);

/// (1+x)^{-s} minus its binomial polynomial of degree terms-1, for x > -1.
double binomial_remainder(double x, double s, int terms);

/// Cin(x) = integral_0^x (1 - cos t)/t dt = gamma + ln x - Ci(x).
double cin(double x);

/// Rising factorial (a)_n.
double pochhammer(double a, int n);

}  // namespace kacrice
