#include "kacrice/local_params.hpp"

#include <cmath>
#include <sstream>

#include "kacrice/errors.hpp"

namespace kacrice {

RadialValues radial_values(const StructureFunction& f, double r) {
    RadialValues v;
    v.r = r;
    v.Dp0 = f.eval(0.0, 1);
    v.Dpp0 = f.eval(0.0, 2);
    if (!(v.Dp0 > 0.0)) throw std::domain_error("D'(0) must be positive");
    if (!(v.Dpp0 < 0.0)) throw std::domain_error("D''(0) must be negative");
    v.D = f.eval(r, 0);
    v.Dp = f.eval(r, 1);
    v.Dpp = f.eval(r, 2);
    v.Dp_inc = f.increment(r, 1);
    v.Dpp_inc = f.increment(r, 2);
    // D = D'(0) r + R, D' = D'(0) + I  =>  sigma_Y^2 = R - 2 r I - r I^2 / D'(0)
    const double R = f.remainder(r, 0, 2);
    v.sigmaY2 = R - 2.0 * r * v.Dp_inc - r * v.Dp_inc * v.Dp_inc / v.Dp0;
    v.D_plus_linear_minus_slope = R - 2.0 * r * v.Dp_inc;
    return v;
}

double LocalParams::sigma1() const { return std::sqrt(sigma1_sq); }
double LocalParams::sigma2() const { return std::sqrt(sigma2_sq); }

double LocalParams::abar(double u_, double y) const {
    return m1_per_u * u_ - sigma2_sq * (std::sqrt(-4.0 * Dpp0) * y + m2_per_u * u_) / (sigma2_sq + alpha * beta * r);
}

double LocalParams::m3(double u_, double y) const {
    const double s = beta + alpha * r;
    return (2.0 * Dpp0 + beta * beta + alpha * beta * r) * y / (6.0 * Dpp0 + s * s) +
           m2_per_u * u_ / (2.0 * std::sqrt(-Dpp0));
}

LocalParams local_params(const StructureFunction& f, double rho, double u) {
    if (!(rho > 0.0)) throw std::domain_error("local_params needs rho > 0");
    const double r = rho * rho;
    const RadialValues v = radial_values(f, r);
    if (!(v.sigmaY2 > 0.0)) {
        std::ostringstream msg;
        msg << "degenerate radial conditioning at r=" << r << ": sigma_Y^2=" << v.sigmaY2;
        throw ConditionError(msg.str());
    }
    LocalParams p;
    p.rho = rho;
    p.r = r;
    p.u = u;
    p.Dp0 = v.Dp0;
    p.Dpp0 = v.Dpp0;
    p.sigmaY2 = v.sigmaY2;
    p.sigmaY = std::sqrt(v.sigmaY2);
    p.m1_per_u = (2.0 * v.Dpp * r + v.Dp_inc) / v.sigmaY2;
    p.m2_per_u = v.Dp_inc / v.sigmaY2;
    p.m1 = u * p.m1_per_u;
    p.m2 = u * p.m2_per_u;
    p.alpha = 2.0 * v.Dpp / p.sigmaY;
    p.beta = v.Dp_inc / p.sigmaY;
    const double ar = p.alpha * r;
    p.sigma1_sq = -4.0 * v.Dpp0 - (ar + p.beta) * ar;
    p.sigma2_sq = -2.0 * v.Dpp0 - (ar + p.beta) * p.beta;
    p.d1 = 0.5 + p.beta * p.beta / (4.0 * v.Dpp0);
    p.d2 = p.alpha * p.beta * r / (4.0 * v.Dpp0);
    p.d3 = ar * ar / (4.0 * v.Dpp0);
    p.c = (p.d1 + p.d1 * p.d3 - p.d2 * p.d2) / (1.0 + p.d1 + 2.0 * p.d2 + p.d3);
    p.b2 = p.sigma1_sq + p.sigma2_sq - p.sigma2_sq * p.sigma2_sq / (p.sigma2_sq + p.alpha * p.beta * r);
    return p;
}

}  // namespace kacrice
