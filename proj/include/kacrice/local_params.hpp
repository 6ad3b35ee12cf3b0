#pragma once

#include "kacrice/structure_function.hpp"

namespace kacrice {

/// D and its first two derivatives at r and at 0, with the differences that
/// cancel for small r computed from Taylor remainders.
struct RadialValues {
    double r = 0.0;
    double D = 0.0;
    double Dp = 0.0, Dp0 = 0.0, Dp_inc = 0.0;     // D'(r), D'(0), D'(r) - D'(0)
    double Dpp = 0.0, Dpp0 = 0.0, Dpp_inc = 0.0;  // D''(r), D''(0), D''(r) - D''(0)
    double sigmaY2 = 0.0;                          // D - D'^2 r / D'(0)
    /// D(r) + r D'(0) - 2 r D'(r)
    double D_plus_linear_minus_slope = 0.0;
};

RadialValues radial_values(const StructureFunction& f, double r);

/// Conditioning parameters at radius rho for critical value u.
struct LocalParams {
    double rho = 0.0, r = 0.0, u = 0.0;
    double Dp0 = 0.0, Dpp0 = 0.0;
    double sigmaY2 = 0.0, sigmaY = 0.0;
    double m1 = 0.0, m2 = 0.0;
    double alpha = 0.0, beta = 0.0;
    double sigma1_sq = 0.0, sigma2_sq = 0.0;
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
    double c = 0.0;
    double b2 = 0.0;
    /// m1 and m2 per unit u.
    double m1_per_u = 0.0, m2_per_u = 0.0;

    double sigma1() const;
    double sigma2() const;
    /// conditional mean of the (1,1) Hessian entry given the shifted GOE level y
    double abar(double u, double y) const;
    /// shift of the conditional GOI(c) block given zeta_1 = y
    double m3(double u, double y) const;
    /// variance of zeta_1, 1 + d1 + 2 d2 + d3
    double zeta1_variance() const { return 1.0 + d1 + 2.0 * d2 + d3; }
};

/// Throws ConditionError ("degenerate radial conditioning") if sigma_Y^2 <= 0,
/// and std::domain_error if D'(0) <= 0 or D''(0) >= 0.
LocalParams local_params(const StructureFunction& f, double rho, double u);

}  // namespace kacrice
