#pragma once

#include <climits>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace kacrice {

enum class Kind { BernsteinExponential, FiniteN, ClosedForm };

struct Atom {
    double location;  // t > 0
    double weight;    // w > 0
};

/// One piece of an absolutely continuous spectral measure.
///  Power:  coeff * t^exponent on [lower, upper], upper finite
///  Gamma:  coeff * t^exponent * e^{-rate t} on (0, inf), exponent > -2, rate > 0
struct DensityPiece {
    enum class Family { Power, Gamma };
    Family family = Family::Power;
    double coeff = 0.0;
    double exponent = 0.0;
    double rate = 0.0;
    double lower = 0.0;
    double upper = 1.0;
};

struct SpectralRep {
    double linear_coeff = 0.0;
    std::vector<Atom> atoms;
    std::vector<DensityPiece> density;

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

/// A structure function given by a formula with hand-written derivatives.
class ClosedFormModel {
public:
    virtual ~ClosedFormModel() = default;
    /// D^{(order)}(r) minus its Taylor polynomial of degree terms-1 at r = 0.
    virtual double remainder(double r, int order, int terms) const = 0;
    /// Largest N for which D is a structure function on R^N (INT_MAX if unrestricted).
    virtual int max_dimension() const = 0;
    virtual nlohmann::json descriptor() const = 0;
};

std::shared_ptr<const ClosedFormModel> shifted_power_model(double exponent);  // (1+r)^a - 1
std::shared_ptr<const ClosedFormModel> cin_model();                           // 2 Cin(sqrt r)
std::shared_ptr<const ClosedFormModel> ex2_model(double epsilon);             // f1 + eps f2

struct SignedLog {
    int sign = 0;  // -1, 0, +1
    double log_abs = -std::numeric_limits<double>::infinity();
};

/// A structure function D with D(0) = 0 and derivatives up to order four.
/// Immutable and cheap to copy.
class StructureFunction {
public:
    static StructureFunction bernstein(SpectralRep spectral, std::string name = {});
    static StructureFunction finite_n(int N, SpectralRep spectral, std::string name = {});
    static StructureFunction closed_form(std::shared_ptr<const ClosedFormModel> model, std::string name = {});
    static StructureFunction from_json(const nlohmann::json& j);

    Kind kind() const { return kind_; }
    /// Kernel dimension for FiniteN, 0 otherwise.
    int kernel_dimension() const { return kernel_dim_; }
    const SpectralRep* spectral() const { return kind_ == Kind::ClosedForm ? nullptr : &spectral_; }
    const std::string& name() const { return name_; }
    int deriv_order_available() const { return 4; }
    /// Largest N for which D defines a field on R^N.
    int max_dimension() const;

    /// D^{(order)}(r).
    double eval(double r, int order = 0) const { return remainder(r, order, 0); }
    double operator()(double r, int order = 0) const { return eval(r, order); }
    /// D^{(order)}(r) - D^{(order)}(0), without cancellation for small r.
    double increment(double r, int order) const { return remainder(r, order, 1); }
    /// D^{(order)}(r) minus its Taylor polynomial of degree terms-1 at 0.
    double remainder(double r, int order, int terms) const;
    /// sign and log|D^{(order)}(r)|; stays informative where the value underflows.
    SignedLog log_abs(double r, int order) const;

    nlohmann::json descriptor() const;

private:
    Kind kind_ = Kind::BernsteinExponential;
    int kernel_dim_ = 0;
    SpectralRep spectral_;
    std::shared_ptr<const ClosedFormModel> model_;
    std::string name_;
};

/// Named examples. "ex2(<eps>)" is accepted for any eps by lookup().
std::vector<StructureFunction> catalog();
/// Resolves a catalog name or an inline JSON descriptor. Throws std::invalid_argument.
StructureFunction lookup(const std::string& name_or_json);

/// Lambda_N(x) for the finite-N kernel.
double eval_lambda(int N, double x);
/// D^{(order)}(r); throws std::domain_error for r < 0 or order > 4.
double eval_D(const StructureFunction& f, double r, int order);

}  // namespace kacrice
