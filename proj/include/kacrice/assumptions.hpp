#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

#include "kacrice/structure_function.hpp"

namespace kacrice {

enum class ConditionStatus { Holds, Fails, Indeterminate };

std::string to_string(ConditionStatus s);

/// Relative margins inside this band count as boundary cases.
inline constexpr double kIndeterminateBand = 1e-12;

struct Witness {
    double r = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string label;
    double normalized = 0.0;  // (lhs - rhs) / (|lhs| + |rhs|), or +-1 for sign tests
};

struct ConditionReport {
    std::string name;
    ConditionStatus status = ConditionStatus::Holds;
    std::vector<Witness> witnesses;
    double margin = std::numeric_limits<double>::infinity();             // min of lhs - rhs
    double normalized_margin = std::numeric_limits<double>::infinity();  // min of normalized
    double worst_r = 0.0;

    bool holds() const { return status == ConditionStatus::Holds; }
    /// strict: lhs > rhs, otherwise lhs >= rhs
    void add(double r, double lhs, double rhs, std::string label, bool strict = true);
    /// a strict sign test decided by `sign` even when the stored value has underflowed
    void add_sign(double r, double value, int sign, std::string label);
    void merge(const ConditionReport& other);
    nlohmann::json to_json() const;
};

/// 60 log-spaced radii on [1e-6, 1e6] plus 40 uniform radii on (0, 10], sorted.
std::vector<double> default_r_grid();
/// "default", "log:lo:hi:n", "lin:lo:hi:n" or a comma-separated list.
std::vector<double> parse_r_grid(const std::string& spec);

ConditionReport check_smoothness(const StructureFunction& f);

/// Left side of the N-dimensional nondegeneracy condition for (H, grad H, Hess H) at |x|^2 = r.
double nondeg_scalar(const StructureFunction& f, int N, double r);
/// Dimension-free sufficient version of the above.
double nondeg_dimfree(const StructureFunction& f, double r);

ConditionReport check_nondeg(const StructureFunction& f, int N, const std::vector<double>& radii);
ConditionReport check_nondeg_dimfree(const StructureFunction& f, const std::vector<double>& radii);

/// -2D''(0) > (ar + b) b,  -4D''(0) > (ar + b) ar,  ab > 0
ConditionReport check_assumption3(const StructureFunction& f, double r);
ConditionReport check_assumption3(const StructureFunction& f, const std::vector<double>& radii);
/// c > 0 and -4D''(0) > 2 b^2 + a^2 r^2
ConditionReport check_c_positive(const StructureFunction& f, double r);
ConditionReport check_c_positive(const StructureFunction& f, const std::vector<double>& radii);

/// The two inequalities behind "Bernstein implies the radial conditions".
ConditionReport check_bernstein_inequality1(const StructureFunction& f, const std::vector<double>& radii);
ConditionReport check_bernstein_inequality2(const StructureFunction& f, const std::vector<double>& radii);
/// Mean-value inequality a r > 2 b that drives the implication for Bernstein D.
ConditionReport check_mean_value(const StructureFunction& f, const std::vector<double>& radii);

/// Covariance of the diagonal of an SGOI(d1, d2, d3) matrix of size N.
Eigen::MatrixXd theta_matrix(int N, double d1, double d2, double d3);
/// det(Theta) divided by (1 + (N-1) d1): the second factor of the nondegeneracy test.
double sgoi_schur(int N, double d1, double d2, double d3);
/// Normalized distance to the boundary: min of (d1 + 1/(N-1)) and the Schur term, each
/// divided by its scale.
double sgoi_margin(int N, double d1, double d2, double d3);
bool sgoi_nondeg(int N, double d1, double d2, double d3);

/// Covariance of (zeta_1, zeta_2, GOE_11, ..., GOE_{N-1,N-1}) for the block construction.
Eigen::MatrixXd xi_matrix(int N, double d1, double d2, double d3, double varsigma, double vartheta);
/// Sufficient condition for xi_matrix to be positive definite when d1 > 0 and vartheta = 0.
double xi_d1pos_expression(int N, double d1, double d2, double d3, double varsigma);

/// Joint covariance of (H, d_1 H..d_N H, d_11 H..d_NN H, d_12 H, d_13 H, ..., d_{N-1,N} H) at x.
Eigen::MatrixXd covariance_full(const StructureFunction& f, const Eigen::VectorXd& x);

}  // namespace kacrice
