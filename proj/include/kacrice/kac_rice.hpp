#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kacrice/structure_function.hpp"

namespace kacrice {

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

/// Finite union of intervals of critical values.
class ValueSet {
public:
    static ValueSet real_line();
    static ValueSet none() { return ValueSet{}; }
    /// "all", "none", or comma-separated "lo:hi" pieces; "inf"/"-inf" allowed, empty ends are infinite.
    static ValueSet parse(const std::string& text);
    static ValueSet from_json(const nlohmann::json& j);

    void add(double lo, double hi);
    bool is_real_line() const;
    bool empty() const { return parts_.empty(); }
    const std::vector<Interval>& intervals() const { return parts_; }
    nlohmann::json to_json() const;
    std::string to_string() const;

private:
    std::vector<Interval> parts_;
};

enum class Method { ShellGOI, ER, ShellGOE, ClosedFormN2 };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct Budget {
    double rel_tol = 1e-3;
    long mc_samples = 20000;
    long mc_max_samples = 1280000;
    int batches = 20;
    std::uint64_t seed = 20240917;
    int threads = 1;
    /// use the Monte Carlo inner expectation even where a deterministic rule exists
    bool force_mc = false;

    nlohmann::json to_json() const;
    static Budget from_json(const nlohmann::json& j);
    static Budget from_json(const nlohmann::json& j, Budget base);
};

struct CountDiagnostics {
    std::string inner;  // "closed-form", "quadrature" or "monte-carlo"
    double quad_error = 0.0;
    int evaluations = 0;
    bool quad_converged = true;
    long mc_samples = 0;
    double mc_std_error = 0.0;
    bool mc_target_met = true;
    long discarded_samples = 0;
    double truncation_sigmas = 0.0;
    double neglected_mass = 0.0;
    nlohmann::json to_json() const;
};

struct CountResult {
    Method method = Method::ER;
    int N = 0;
    std::optional<int> index;  // empty for the total
    double estimate = 0.0;
    /// sqrt(MC standard error^2 + quadrature error estimate^2)
    double std_error = 0.0;
    CountDiagnostics diagnostics;
    nlohmann::json to_json() const;
};

/// Total and every index k = 0..N from one evaluation.
struct CountTable {
    CountResult total;
    std::vector<CountResult> by_index;
    const CountResult& pick(std::optional<int> k) const;
    nlohmann::json to_json() const;
};

/// Volume of {R1 < |x| < R2} in R^N.
double shell_volume(int N, double R1, double R2);

/// Critical points over a region of volume `volume`, any critical value (GOE form).
CountTable crt_er_all(const StructureFunction& f, int N, double volume, const Budget& budget = {});
CountResult crt_total_er(const StructureFunction& f, int N, double volume, const Budget& budget = {});
CountResult crt_index_er(const StructureFunction& f, int N, int k, double volume, const Budget& budget = {});

/// Critical points in the shell R1 < |x| < R2 with critical values in E (GOI form).
CountTable crt_shell_goi_all(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                             const Budget& budget = {});
CountResult crt_shell_goi(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                          std::optional<int> k, const Budget& budget = {});

/// Same quantity through GOE matrices; needs the radial conditions on (R1^2, R2^2).
CountTable crt_shell_goe_all(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                             const Budget& budget = {});
CountResult crt_shell_goe(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                          std::optional<int> k, const Budget& budget = {});

/// Expected counts of index 0, 1, 2 per unit area in the plane.
std::array<double, 3> closed_form_n2(const StructureFunction& f);
CountTable crt_closed_form_n2(const StructureFunction& f, double volume);

/// m1 + 2 s y - s sum Z_l^2 / (lambda_l + m3), s = sqrt(-D''(0)).
/// Throws NumericError if some |lambda_l + m3| < 1e-12.
double eta_prime(double m1, double y, double m3, const Eigen::VectorXd& lambdas, const Eigen::VectorXd& Z,
                 double Dpp0);
/// (m1 + 2 s y) prod(lambda_j + m3) - s sum_l Z_l^2 prod_{j != l}(lambda_j + m3), without division.
double shell_goi_bracket(double m1, double y, double m3, const Eigen::VectorXd& lambdas, const Eigen::VectorXd& Z,
                         double Dpp0);

struct CountRequest {
    StructureFunction field;
    int N = 2;
    Method method = Method::ER;
    std::optional<double> volume;           // ER and closed form
    std::optional<std::array<double, 2>> shell;  // shell methods; ER uses its volume when no volume is given
    ValueSet E = ValueSet::real_line();
    std::optional<int> index;
    Budget budget;

    static CountRequest from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Dispatches on the method. Throws std::invalid_argument for inconsistent requests.
CountTable evaluate(const CountRequest& request);

}  // namespace kacrice
