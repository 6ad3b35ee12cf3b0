#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "kacrice/parallel.hpp"

namespace kacrice {

/// Nodes and weights of an n-point Gaussian rule.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre on [-1, 1].
const GaussRule& gauss_legendre(int n);
/// Gauss-Hermite for the standard normal density (weights sum to 1).
const GaussRule& gauss_hermite_normal(int n);
/// Gauss-Laguerre for the weight e^{-x} on [0, inf).
const GaussRule& gauss_laguerre(int n);

struct QuadOptions {
    double rel_tol = 1e-3;
    double abs_tol = 0.0;
    int max_intervals = 200;
    /// Number of leading components that drive refinement; 0 means all.
    int control_components = 0;
    /// When set, the 15 nodes of each panel are evaluated on these workers.
    const Workers* workers = nullptr;
};

struct QuadResult {
    Eigen::VectorXd value;
    Eigen::VectorXd error;
    int evaluations = 0;
    int intervals = 0;
    bool converged = false;
};

using VectorIntegrand = std::function<Eigen::VectorXd(double)>;

/// Globally adaptive Gauss-Kronrod (G7/K15) for vector-valued integrands on a
/// finite interval. Refinement bisects the panel with the largest error until
/// max_i err_i <= max(abs_tol, rel_tol * max_i |value_i|) over control components.
QuadResult integrate_gk15(const VectorIntegrand& f, double a, double b, const QuadOptions& options = {});

/// Scalar convenience wrapper.
double integrate_gk15_scalar(const std::function<double(double)>& f, double a, double b,
                             double rel_tol = 1e-10, double abs_tol = 0.0, int max_intervals = 2000,
                             double* error_estimate = nullptr);

/// Richardson-extrapolated central difference of order one, used where an
/// independent derivative is needed. Step h = max(1e-4, 1e-4 |x|), halved per level.
double richardson_derivative(const std::function<double(double)>& f, double x, int levels = 3,
                             double h = 0.0);

}  // namespace kacrice
