#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "kacrice/kac_rice.hpp"
#include "kacrice/rng.hpp"
#include "kacrice/structure_function.hpp"

namespace kacrice {

/// Regular lattice {(i - m) h : i = 0..2m}^N, optionally rotated by `angle` (N = 2) in physical space.
struct Lattice {
    int N = 2;
    double h = 0.1;
    int m = 0;  // nodes per axis = 2m + 1
    double angle = 0.0;

    static Lattice covering(int N, double half_width, double h, double angle = 0.0);
    int per_axis() const { return 2 * m + 1; }
    long size() const;
    /// lattice coordinates of node `index` (x fastest)
    Eigen::VectorXd coords(long index) const;
    /// physical position: rotation applied to lattice coordinates
    Eigen::VectorXd position(long index) const;
    Eigen::VectorXd to_physical(const Eigen::VectorXd& lattice_point) const;
};

struct FieldSample {
    Lattice lattice;
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::uint64_t realization = 0;

    /// every `step`-th node along each axis, centred on the origin
    FieldSample subsample(int step) const;
};

/// Field values from a known function, for testing the counter.
FieldSample tabulate(const Lattice& lattice, const std::function<double(const Eigen::VectorXd&)>& fn);

/// Pinned-field covariance 1/2 (D(|x|^2) + D(|y|^2) - D(|x - y|^2)).
double pinned_covariance(const StructureFunction& f, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Factorizes the lattice covariance once and draws exact Gaussian realizations.
class FieldSampler {
public:
    /// N must be 1 or 2. Throws ConditionError if the kernel is not positive semidefinite within
    /// a diagonal jitter of 1e-10 times its mean diagonal; the message names the smallest eigenvalue.
    FieldSampler(const StructureFunction& f, const Lattice& lattice);

    FieldSample draw(std::uint64_t seed, std::uint64_t realization) const;
    FieldSample draw(RngStream& rng) const;
    const Lattice& lattice() const { return lattice_; }
    /// jitter actually added, relative to the mean diagonal
    double relative_jitter() const { return jitter_; }

private:
    Lattice lattice_;
    std::vector<long> active_;  // nodes with nonzero variance
    Eigen::MatrixXd chol_;
    double jitter_ = 0.0;
};

FieldSample sample_field(const StructureFunction& f, int N, double half_width, double h, RngStream& rng);

struct CriticalPoint {
    Eigen::VectorXd location;  // physical coordinates
    double value = 0.0;
    int index = -1;            // -1 when a Hessian eigenvalue is within the borderline band
    double residual = 0.0;     // gradient norm of the interpolant after polishing
    nlohmann::json to_json() const;
};

struct CountOptions {
    int max_newton = 25;
    double residual_tol = 1e-6;    // relative to the RMS lattice gradient
    double borderline = 1e-8;      // relative to the Hessian norm
};

/// Critical points of the interpolated field with R1 < |x| < R2.
std::vector<CriticalPoint> count_critical(const FieldSample& sample, double R1, double R2,
                                          const CountOptions& options = {});

struct OracleBudget {
    double h = 0.06;
    std::uint64_t seed = 20240917;
    int threads = 1;
    double angle = 0.0;
    nlohmann::json to_json() const;
};

struct OracleResult {
    int N = 0;
    int reps = 0;
    double total_mean = 0.0, total_se = 0.0;
    std::vector<double> mean, se;   // per index
    double unclassified_mean = 0.0;
    double relative_jitter = 0.0;
    std::vector<std::vector<int>> per_rep;  // counts per index, one row per realization
    nlohmann::json to_json() const;
};

/// Average critical-point counts with values in E over `reps` realizations.
OracleResult mc_crt(const StructureFunction& f, int N, double R1, double R2, const ValueSet& E, int reps,
                    const OracleBudget& budget = {});

}  // namespace kacrice
