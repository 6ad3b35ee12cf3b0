#pragma once

#include <cstdint>
#include <optional>

#include <json.hpp>

#include "kacrice/rmt.hpp"

namespace kacrice {

struct GofResult {
    double statistic = 0.0;
    double p_value = 0.0;
    int dof = 0;      // chi-squared only
    long samples = 0;
    bool passed(double alpha = 1e-3) const { return p_value > alpha; }
    nlohmann::json to_json() const;
};

/// Upper tail of the chi-squared distribution.
double chi2_sf(double statistic, int dof);
/// Asymptotic Kolmogorov p-value for a one-sample statistic d over n points.
double kolmogorov_sf(double d, long n);

/// Probability that the ordered eigenpair of a 2x2 GOI(c) lands in [a1,b1] x [a2,b2].
double goi2_cell_probability(double c, double a1, double b1, double a2, double b2);

/// Chi-squared test of sampled ordered eigenpairs of 2x2 GOI(c) against the exact density
/// on a bins x bins grid. Cells with expected count < 5 are pooled with the outside region.
GofResult goi2_density_chi2(double c, long samples, std::uint64_t seed, int bins = 20);

/// Kolmogorov-Smirnov test of the 1x1 GOI(c) sampler against N(0, 1 + c).
GofResult goi1_ks(double c, long samples, std::uint64_t seed);

enum class SgoiPath { Block, Direct };

struct TensorCheck {
    long samples = 0;
    int entries = 0;
    double max_abs_z = 0.0;
    double max_abs_diff = 0.0;
    bool passed(double z = 5.0) const { return max_abs_z < z; }
    nlohmann::json to_json() const;
};

/// Empirical E[M_ij M_kl] over all pairs of upper-triangle entries against the SGOI formula.
TensorCheck sgoi_covariance_check(int n, double d1, double d2, double d3, long samples, std::uint64_t seed,
                                  SgoiPath path = SgoiPath::Block,
                                  std::optional<SgoiDecomposition> decomp = std::nullopt);

/// Same tensor for V M V^T with a fixed random orthogonal V, against GOI(c).
TensorCheck goi_invariance_check(int n, double c, long samples, std::uint64_t seed);

struct SignGridResult {
    int tested = 0;
    int indeterminate = 0;
    int disagreements = 0;
    nlohmann::json to_json() const;
};

/// Compares the closed-form SGOI nondegeneracy test with the smallest eigenvalue of the
/// diagonal covariance on random (n, d1, d2, d3).
SignGridResult sgoi_sign_grid(int count, std::uint64_t seed);

}  // namespace kacrice
