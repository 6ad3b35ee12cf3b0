#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include <json.hpp>

#include "kacrice/rng.hpp"

namespace kacrice {

enum class Ensemble { GOE, GOI, SGOI };

struct EnsembleSpec {
    Ensemble tag = Ensemble::GOE;
    int n = 1;
    double c = 0.0;                   // GOI
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;  // SGOI

    /// {"ensemble": "goe"|"goi"|"sgoi", "n": .., "c": .., "d1": .., "d2": .., "d3": ..}
    static EnsembleSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    bool nondegenerate() const;
};

/// Cov(zeta_1, zeta_2) and Cov(zeta_2, GOE_ii) in the block construction of an SGOI matrix.
struct SgoiDecomposition {
    double varsigma = 0.0;
    double vartheta = 0.0;
};

/// vartheta = 0, varsigma = (d1^2 + d1 d2)/(1 + d1) for d1 >= 0; vartheta = d1, varsigma = 0 otherwise.
SgoiDecomposition default_decomposition(double d1, double d2);

/// Ascending eigenvalues with an orthonormal frame, M = Q diag(values) Q^T.
struct SymEig {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

/// Throws std::invalid_argument for non-symmetric input, NumericError if the solver fails.
SymEig eig_sym(const Eigen::MatrixXd& m);
/// Eigenvalues only, ascending. Same errors.
Eigen::VectorXd eigvals_sym(const Eigen::MatrixXd& m);

Eigen::MatrixXd sample_goe(int n, RngStream& rng);

/// GOI(c) with the diagonal drawn from N(0, I + c 11^T). The factor is computed once.
class GoiSampler {
public:
    /// Throws ConditionError ("degenerate ensemble") if c <= -1/n.
    GoiSampler(int n, double c);
    Eigen::MatrixXd operator()(RngStream& rng) const;
    int n() const { return n_; }
    double c() const { return c_; }

private:
    int n_;
    double c_;
    Eigen::MatrixXd factor_;
};

Eigen::MatrixXd sample_goi(int n, double c, RngStream& rng);
/// GOE + sqrt(c) Z I, for c > 0 only.
Eigen::MatrixXd sample_goi_shifted(int n, double c, RngStream& rng);

/// SGOI(d1, d2, d3) through the block form [[zeta_1, xi^T], [xi, GOE + zeta_2 I]].
class SgoiSampler {
public:
    /// Throws ConditionError if the ensemble is degenerate or the decomposition is not realizable.
    SgoiSampler(int n, double d1, double d2, double d3, std::optional<SgoiDecomposition> decomp = std::nullopt);
    Eigen::MatrixXd operator()(RngStream& rng) const;
    const SgoiDecomposition& decomposition() const { return decomp_; }

private:
    int n_;
    double d1_, d2_, d3_;
    SgoiDecomposition decomp_;
    Eigen::MatrixXd factor_;  // square root of the (zeta_1, zeta_2, GOE diagonal) covariance
};

Eigen::MatrixXd sample_sgoi(int n, double d1, double d2, double d3, RngStream& rng,
                            std::optional<SgoiDecomposition> decomp = std::nullopt);

/// SGOI straight from the covariance of its diagonal, with no block construction.
class SgoiDirectSampler {
public:
    SgoiDirectSampler(int n, double d1, double d2, double d3);
    Eigen::MatrixXd operator()(RngStream& rng) const;

private:
    int n_;
    Eigen::MatrixXd factor_;
};

/// E[M_ij M_kl] for SGOI(d1, d2, d3) (GOI(c) is SGOI(c, 0, 0)); zero-based indices.
double sgoi_second_moment(double d1, double d2, double d3, int i, int j, int k, int l);

/// log of the ordered-eigenvalue density of GOI(c). -inf if lambdas are not nondecreasing.
/// Throws ConditionError if c <= -1/n.
double goi_eig_logdensity(double c, const Eigen::VectorXd& lambdas);

struct CornerCheckReport {
    int n = 0;
    double d1 = 0.0, d2 = 0.0, d3 = 0.0, y = 0.0;
    long samples = 0;
    long window_samples = 0;
    double c_theory = 0.0;
    double slope_theory = 0.0, slope_estimate = 0.0, slope_se = 0.0;
    /// max |z| over the residual-block covariance entries (all samples)
    double residual_max_z = 0.0;
    /// max |estimate - theory| over the residual-block covariance entries
    double residual_max_abs = 0.0;
    /// conditional mean and covariance inside the window
    double window_mean_max_z = 0.0;
    double window_cov_max_z = 0.0;
    double slope_z() const { return (slope_estimate - slope_theory) / slope_se; }
    bool passed(double z = 5.0) const;
    nlohmann::json to_json() const;
};

/// Samples SGOI(d1, d2, d3) and checks that the lower block given M_11 near y sqrt(Var M_11)
/// is a shifted GOI(c). window is a half-width in units of sqrt(Var M_11).
CornerCheckReport conditional_corner_check(int n, double d1, double d2, double d3, double y, long sample_count,
                                           std::uint64_t seed, double window = 0.05);

}  // namespace kacrice
