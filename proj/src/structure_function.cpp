#include "kacrice/structure_function.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <map>
#include <sstream>
#include <stdexcept>

#include "kacrice/quadrature.hpp"
#include "kacrice/special.hpp"

namespace kacrice {

using nlohmann::json;

namespace {

double falling(double a, int n) {
    double p = 1.0;
    for (int i = 0; i < n; ++i) p *= a - i;
    return p;
}

double factorial(int n) { return std::tgamma(n + 1.0); }

// Taylor terms of a value's polynomial part are removed from order >= 1 derivatives
// only when requested; for order 0 the constant term is D(0) = 0, so at least one
// term is always "removed".
int effective_terms(int order, int terms) { return order == 0 ? std::max(terms, 1) : terms; }

// Kernel per unit weight with the t^order factor pulled out:
// contribution of an atom (t, w) is w * t^order * kernel(r t).
double kernel(Kind kind, int dim, int order, int terms, double x) {
    const int m = effective_terms(order, terms);
    if (kind == Kind::BernsteinExponential) {
        const double sign = order == 0 ? -1.0 : (order % 2 == 1 ? 1.0 : -1.0);
        return sign * exp_neg_remainder(x, m);
    }
    const double M = dim + 2.0 * order;
    const double scale = order == 0 ? -1.0 : -std::pow(-0.25, order) / pochhammer(0.5 * dim, order);
    return scale * lambda_sqrt_remainder(M, x, m);
}

double linear_part(double A, double r, int order, int terms) {
    if (A == 0.0) return 0.0;
    if (order == 0) return terms <= 1 ? A * r : 0.0;
    if (order == 1) return terms == 0 ? A : 0.0;
    return 0.0;
}

// Numeric integral of coeff * t^(exponent+order) * g(t) over a density piece.
// near_zero / near_inf are the exponents q with integrand ~ t^q at the two ends;
// power substitutions make both ends smooth for the Kronrod rule.
double integrate_piece(const DensityPiece& piece, int order, double near_zero, double near_inf,
                       const std::function<double(double)>& g) {
    double a = piece.lower, b = piece.upper;
    if (piece.family == DensityPiece::Family::Gamma) {
        a = 0.0;
        b = (80.0 + 4.0 * std::max(0.0, piece.exponent + order + 1.0)) / piece.rate;
    }
    const double power = piece.exponent + order;
    auto density = [&](double t) {
        double d = piece.coeff * std::pow(t, power);
        if (piece.family == DensityPiece::Family::Gamma) d *= std::exp(-piece.rate * t);
        return d * g(t);
    };
    const bool infinite = !std::isfinite(b);
    const double split = infinite ? std::max(1.0, 2.0 * a) : b;
    double total = 0.0;
    if (split > a) {
        int k = 1;
        if (a == 0.0 && near_zero < 2.0) k = std::min(60, static_cast<int>(std::ceil(3.0 / (near_zero + 1.0))));
        auto head = [&](double v) {
            if (v <= 0.0) return 0.0;
            const double vk = std::pow(v, k);
            const double t = a + (split - a) * vk;
            if (t <= 0.0) return 0.0;
            return density(t) * (split - a) * k * vk / v;
        };
        total += integrate_gk15_scalar(head, 0.0, 1.0, 1e-13, 1e-300, 4000);
    }
    if (infinite) {
        // t = split * v^{-k}
        const int k = std::min(60, std::max(1, static_cast<int>(std::ceil(3.0 / -(near_inf + 1.0)))));
        auto tail = [&](double v) {
            if (v <= 0.0) return 0.0;
            const double t = split * std::pow(v, -k);
            if (!std::isfinite(t)) return 0.0;
            return density(t) * split * k * std::pow(v, -k - 1);
        };
        total += integrate_gk15_scalar(tail, 0.0, 1.0, 1e-13, 1e-300, 4000);
    }
    return total;
}

bool moment_exists(const DensityPiece& piece, double q) {
    if (piece.family != DensityPiece::Family::Power) return q > -1.0;
    if (piece.lower == 0.0 && !(q > -1.0)) return false;
    if (!std::isfinite(piece.upper) && !(q < -1.0)) return false;
    return true;
}

void check_integrable(const DensityPiece& piece, double r, int order, int terms) {
    if (piece.family != DensityPiece::Family::Power) return;
    const int m = effective_terms(order, terms);
    const double p = piece.exponent + order;
    const int first = order == 0 ? 1 : 0;  // the constant term of D vanishes identically
    bool ok = true;
    for (int j = first; j < m; ++j) ok = ok && moment_exists(piece, p + j);
    if (r == 0.0 && m == 0) ok = ok && moment_exists(piece, p);
    if (r > 0.0 && piece.lower == 0.0) ok = ok && (p + m > -1.0);
    if (!ok)
        throw std::domain_error("density piece t^" + std::to_string(piece.exponent) + " makes derivative of order " +
                                std::to_string(order) + " non-integrable at r=" + std::to_string(r));
}

double log1p_remainder(double x, int terms) {
    double poly = 0.0, power = x;
    for (int j = 1; j < terms; ++j) {
        poly += (j % 2 == 1 ? 1.0 : -1.0) * power / j;
        power *= x;
    }
    if (std::abs(x) < 0.5 && terms > 1) {
        double sum = 0.0;
        for (int j = terms; j < terms + 200; ++j) {
            const double add = (j % 2 == 1 ? 1.0 : -1.0) * power / j;
            sum += add;
            power *= x;
            if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    return std::log1p(x) - poly;
}

double gamma_piece_closed(const DensityPiece& piece, double r, int order, int terms) {
    const int m = effective_terms(order, terms);
    const double x = r / piece.rate;
    const double s = piece.exponent + order + 1.0;
    if (order == 0) {
        if (std::abs(s) < 1e-14) return piece.coeff * log1p_remainder(x, m);
        return -piece.coeff * std::tgamma(s) * std::pow(piece.rate, -s) * binomial_remainder(x, s, m);
    }
    const double sign = order % 2 == 1 ? 1.0 : -1.0;
    return sign * piece.coeff * std::exp(std::lgamma(s) - s * std::log(piece.rate)) * binomial_remainder(x, s, m);
}

double log_sum_exp(const std::vector<double>& v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

// ---- closed-form models ----

class ShiftedPower final : public ClosedFormModel {
public:
    explicit ShiftedPower(double a) : a_(a) {
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("shifted power exponent must lie in (0,1)");
    }
    double remainder(double r, int order, int terms) const override {
        const int m = effective_terms(order, terms);
        return falling(a_, order) * binomial_remainder(r, order - a_, m);
    }
    int max_dimension() const override { return INT_MAX; }
    json descriptor() const override { return {{"formula", "shifted-power"}, {"exponent", a_}}; }

private:
    double a_;
};

// Expressions sum_k s^{-k} (c_k + cc_k cos s + cs_k sin s), closed under (1/(2s)) d/ds.
struct TrigPoly {
    std::map<int, std::array<double, 3>> terms;  // power -> {const, cos, sin}

    TrigPoly radial_derivative() const {
        TrigPoly out;
        for (const auto& [k, c] : terms) {
            auto& lo = out.terms[k + 2];
            auto& mid = out.terms[k + 1];
            // d/ds s^{-k} = -k s^{-k-1}; then divide by 2s
            lo[0] += -0.5 * k * c[0];
            lo[1] += -0.5 * k * c[1];
            lo[2] += -0.5 * k * c[2];
            // d/ds cos = -sin, d/ds sin = cos
            mid[2] += -0.5 * c[1];
            mid[1] += 0.5 * c[2];
        }
        return out;
    }
    double operator()(double s) const {
        const double cs = std::cos(s), sn = std::sin(s);
        double sum = 0.0;
        for (const auto& [k, c] : terms) sum += std::pow(s, -k) * (c[0] + c[1] * cs + c[2] * sn);
        return sum;
    }
};

class CinField final : public ClosedFormModel {
public:
    CinField() {
        TrigPoly g;
        g.terms[2] = {1.0, -1.0, 0.0};  // (1 - cos s)/s^2
        derivs_.push_back(g);
        for (int i = 0; i < 4; ++i) derivs_.push_back(derivs_.back().radial_derivative());
    }
    double remainder(double r, int order, int terms) const override {
        const int m = effective_terms(order, terms);
        if (r < 4.0) {
            double sum = 0.0;
            for (int i = m; i < m + 60; ++i) {
                const double add = coefficient(order, i) * std::pow(r, i);
                sum += add;
                if (i > m + 2 && std::abs(add) <= 1e-18 * std::abs(sum)) break;
            }
            return sum;
        }
        const double s = std::sqrt(r);
        double value = order == 0 ? 2.0 * cin(s) : derivs_[order - 1](s);
        for (int i = 0; i < m; ++i) value -= coefficient(order, i) * std::pow(r, i);
        return value;
    }
    int max_dimension() const override { return 1; }
    json descriptor() const override { return {{"formula", "cin"}}; }

private:
    // coefficient of r^i in D^{(order)}: a_{i+order} (i+order)!/i!, with a_k = (-1)^{k+1}/(k (2k)!)
    static double coefficient(int order, int i) {
        const int k = i + order;
        if (k < 1) return 0.0;
        const double a = (k % 2 == 1 ? 1.0 : -1.0) / (k * factorial(2 * k));
        return a * factorial(k) / factorial(i);
    }
    std::vector<TrigPoly> derivs_;
};

class Ex2Field final : public ClosedFormModel {
public:
    explicit Ex2Field(double eps) : eps_(eps), f1_(11.0 / 12.0) {}
    double remainder(double r, int order, int terms) const override {
        return f1_.remainder(r, order, terms) + eps_ * f2_.remainder(r, order, terms);
    }
    int max_dimension() const override { return eps_ == 0.0 ? INT_MAX : 1; }
    json descriptor() const override { return {{"formula", "ex2"}, {"epsilon", eps_}}; }

private:
    double eps_;
    ShiftedPower f1_;
    CinField f2_;
};

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::BernsteinExponential: return "bernstein";
        case Kind::FiniteN: return "finite_n";
        case Kind::ClosedForm: return "closed_form";
    }
    return "?";
}

}  // namespace

std::shared_ptr<const ClosedFormModel> shifted_power_model(double exponent) {
    return std::make_shared<ShiftedPower>(exponent);
}
std::shared_ptr<const ClosedFormModel> cin_model() { return std::make_shared<CinField>(); }
std::shared_ptr<const ClosedFormModel> ex2_model(double epsilon) { return std::make_shared<Ex2Field>(epsilon); }

void SpectralRep::validate() const {
    if (!(linear_coeff >= 0.0) || !std::isfinite(linear_coeff))
        throw std::invalid_argument("linear coefficient must be finite and nonnegative");
    for (const auto& a : atoms)
        if (!(a.location > 0.0 && a.weight > 0.0 && std::isfinite(a.location) && std::isfinite(a.weight)))
            throw std::invalid_argument("atoms need positive finite location and weight");
    for (const auto& p : density) {
        if (!(p.coeff > 0.0)) throw std::invalid_argument("density coefficient must be positive");
        if (p.family == DensityPiece::Family::Power) {
            if (!(p.lower >= 0.0 && p.upper > p.lower))
                throw std::invalid_argument("power density needs 0 <= lower < upper");
            if (p.lower == 0.0 && !(p.exponent > -2.0))
                throw std::invalid_argument("power density t^p near 0 needs p > -2");
            if (!std::isfinite(p.upper) && !(p.exponent < -1.0))
                throw std::invalid_argument("power density t^p on an unbounded interval needs p < -1");
        } else {
            if (!(p.rate > 0.0)) throw std::invalid_argument("gamma density needs rate > 0");
            if (!(p.exponent > -2.0)) throw std::invalid_argument("gamma density needs exponent > -2");
        }
    }
    if (atoms.empty() && density.empty() && linear_coeff == 0.0)
        throw std::invalid_argument("spectral representation is identically zero");
}

StructureFunction StructureFunction::bernstein(SpectralRep spectral, std::string name) {
    spectral.validate();
    StructureFunction f;
    f.kind_ = Kind::BernsteinExponential;
    f.spectral_ = std::move(spectral);
    f.name_ = std::move(name);
    return f;
}

StructureFunction StructureFunction::finite_n(int N, SpectralRep spectral, std::string name) {
    if (N < 1) throw std::invalid_argument("finite-N kernel needs N >= 1");
    spectral.validate();
    for (const auto& p : spectral.density)
        if (p.family == DensityPiece::Family::Power && !std::isfinite(p.upper))
            throw std::invalid_argument("finite-N kernel supports bounded power densities only");
    StructureFunction f;
    f.kind_ = Kind::FiniteN;
    f.kernel_dim_ = N;
    f.spectral_ = std::move(spectral);
    f.name_ = std::move(name);
    return f;
}

StructureFunction StructureFunction::closed_form(std::shared_ptr<const ClosedFormModel> model, std::string name) {
    if (!model) throw std::invalid_argument("closed form needs a model");
    StructureFunction f;
    f.kind_ = Kind::ClosedForm;
    f.model_ = std::move(model);
    f.name_ = std::move(name);
    return f;
}

int StructureFunction::max_dimension() const {
    switch (kind_) {
        case Kind::BernsteinExponential: return INT_MAX;
        case Kind::FiniteN: return kernel_dim_;
        case Kind::ClosedForm: return model_->max_dimension();
    }
    return 0;
}

double StructureFunction::remainder(double r, int order, int terms) const {
    if (!(r >= 0.0)) throw std::domain_error("structure function argument must be nonnegative");
    if (order < 0 || order > deriv_order_available())
        throw std::domain_error("derivative order " + std::to_string(order) + " not available");
    if (kind_ == Kind::ClosedForm) return model_->remainder(r, order, terms);

    double sum = linear_part(spectral_.linear_coeff, r, order, terms);
    for (const auto& a : spectral_.atoms)
        sum += a.weight * std::pow(a.location, order) * kernel(kind_, kernel_dim_, order, terms, r * a.location);
    for (const auto& piece : spectral_.density) {
        check_integrable(piece, r, order, terms);
        if (kind_ == Kind::BernsteinExponential && piece.family == DensityPiece::Family::Gamma) {
            sum += gamma_piece_closed(piece, r, order, terms);
            continue;
        }
        const int m = effective_terms(order, terms);
        if (r == 0.0 && m >= 1) continue;
        const double p = piece.exponent + order;
        // at infinity the kernel tends to its subtracted polynomial (or to 1 for D itself)
        const double far = (r > 0.0 && m == 0) ? -1e9 : p + std::max(m - 1, 0);
        sum += integrate_piece(piece, order, p + (r > 0.0 ? m : 0), far,
                               [&](double t) { return kernel(kind_, kernel_dim_, order, terms, r * t); });
    }
    return sum;
}

SignedLog StructureFunction::log_abs(double r, int order) const {
    if (kind_ == Kind::BernsteinExponential && order >= 1) {
        std::vector<double> logs;
        if (order == 1 && spectral_.linear_coeff > 0.0) logs.push_back(std::log(spectral_.linear_coeff));
        for (const auto& a : spectral_.atoms)
            logs.push_back(std::log(a.weight) + order * std::log(a.location) - r * a.location);
        for (const auto& piece : spectral_.density) {
            check_integrable(piece, r, order, 0);
            if (piece.family == DensityPiece::Family::Gamma) {
                const double s = piece.exponent + order + 1.0;
                logs.push_back(std::log(piece.coeff) + std::lgamma(s) - s * std::log(piece.rate + r));
            } else {
                const double shift = piece.lower;
                const double p = piece.exponent + order;
                const double I = integrate_piece(piece, order, p, r > 0.0 ? -1e9 : p,
                                                 [&](double t) { return std::exp(-r * (t - shift)); });
                logs.push_back(std::log(I) - r * shift);
            }
        }
        SignedLog out;
        out.log_abs = log_sum_exp(logs);
        out.sign = std::isfinite(out.log_abs) ? (order % 2 == 1 ? 1 : -1) : 0;
        return out;
    }
    const double v = eval(r, order);
    SignedLog out;
    out.sign = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    out.log_abs = std::log(std::abs(v));
    return out;
}

json StructureFunction::descriptor() const {
    json j;
    j["kind"] = kind_name(kind_);
    if (!name_.empty()) j["name"] = name_;
    if (kind_ == Kind::ClosedForm) {
        const json extra = model_->descriptor();
        for (const auto& [k, v] : extra.items()) j[k] = v;
        return j;
    }
    if (kind_ == Kind::FiniteN) j["N"] = kernel_dim_;
    j["A"] = spectral_.linear_coeff;
    j["atoms"] = json::array();
    for (const auto& a : spectral_.atoms) j["atoms"].push_back({a.location, a.weight});
    j["density"] = json::array();
    for (const auto& p : spectral_.density) {
        if (p.family == DensityPiece::Family::Power)
            j["density"].push_back(
                {{"family", "power"}, {"coeff", p.coeff}, {"exponent", p.exponent}, {"lower", p.lower},
                 {"upper", std::isfinite(p.upper) ? json(p.upper) : json("inf")}});
        else
            j["density"].push_back({{"family", "gamma"}, {"coeff", p.coeff}, {"exponent", p.exponent}, {"rate", p.rate}});
    }
    return j;
}

StructureFunction StructureFunction::from_json(const json& j) {
    const std::string kind = j.value("kind", std::string("bernstein"));
    const std::string name = j.value("name", std::string());
    if (kind == "closed_form" || kind == "ClosedForm") {
        const std::string formula = j.at("formula").get<std::string>();
        if (formula == "shifted-power") return closed_form(shifted_power_model(j.at("exponent").get<double>()), name);
        if (formula == "cin") return closed_form(cin_model(), name);
        if (formula == "ex2") return closed_form(ex2_model(j.at("epsilon").get<double>()), name);
        throw std::invalid_argument("unknown closed-form formula '" + formula + "'");
    }
    SpectralRep s;
    s.linear_coeff = j.value("A", 0.0);
    if (j.contains("atoms"))
        for (const auto& a : j.at("atoms")) s.atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    if (j.contains("density"))
        for (const auto& p : j.at("density")) {
            DensityPiece piece;
            const std::string family = p.at("family").get<std::string>();
            if (family == "power") {
                piece.family = DensityPiece::Family::Power;
                piece.lower = p.value("lower", 0.0);
                const auto& up = p.at("upper");
                piece.upper = up.is_string() && up.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                                                 : up.get<double>();
            } else if (family == "gamma") {
                piece.family = DensityPiece::Family::Gamma;
                piece.rate = p.at("rate").get<double>();
            } else {
                throw std::invalid_argument("unknown density family '" + family + "'");
            }
            piece.coeff = p.at("coeff").get<double>();
            piece.exponent = p.value("exponent", 0.0);
            s.density.push_back(piece);
        }
    if (kind == "bernstein" || kind == "BernsteinExponential") return bernstein(std::move(s), name);
    if (kind == "finite_n" || kind == "FiniteN") return finite_n(j.at("N").get<int>(), std::move(s), name);
    throw std::invalid_argument("unknown structure function kind '" + kind + "'");
}

namespace {

StructureFunction ex2_field(double eps) {
    std::ostringstream name;
    name << "ex2(" << eps << ")";
    return StructureFunction::closed_form(ex2_model(eps), name.str());
}

}  // namespace

std::vector<StructureFunction> catalog() {
    std::vector<StructureFunction> out;
    out.push_back(StructureFunction::bernstein({0.0, {{1.0, 1.0}}, {}}, "exp1"));
    out.push_back(StructureFunction::bernstein({0.0, {{0.5, 0.5}, {1.0, 0.3}, {3.0, 0.2}}, {}}, "exp-mix"));
    out.push_back(StructureFunction::bernstein({1.0, {{1.0, 1.0}}, {}}, "linear-plus-exp"));
    // (1+r)^{11/12} - 1 = integral of (1 - e^{-rt}) c t^{-23/12} e^{-t} dt with c = (11/12)/Gamma(1/12)
    DensityPiece power;
    power.family = DensityPiece::Family::Gamma;
    power.coeff = (11.0 / 12.0) / std::tgamma(1.0 / 12.0);
    power.exponent = -23.0 / 12.0;
    power.rate = 1.0;
    out.push_back(StructureFunction::bernstein({0.0, {}, {power}}, "power"));
    out.push_back(ex2_field(0.125));
    out.push_back(StructureFunction::closed_form(cin_model(), "f2"));
    out.push_back(StructureFunction::finite_n(3, {0.0, {{1.0, 1.0}}, {}}, "sinc3"));
    return out;
}

StructureFunction lookup(const std::string& name_or_json) {
    const auto first = name_or_json.find_first_not_of(" \t\n");
    if (first != std::string::npos && name_or_json[first] == '{') {
        json j;
        try {
            j = json::parse(name_or_json);
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("bad field descriptor: ") + e.what());
        }
        return StructureFunction::from_json(j);
    }
    if (name_or_json.rfind("ex2(", 0) == 0 && name_or_json.back() == ')') {
        const std::string inner = name_or_json.substr(4, name_or_json.size() - 5);
        std::size_t used = 0;
        double eps = 0.0;
        try {
            eps = std::stod(inner, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != inner.size() || inner.empty()) throw std::invalid_argument("bad ex2 parameter '" + inner + "'");
        return ex2_field(eps);
    }
    for (auto& f : catalog())
        if (f.name() == name_or_json) return f;
    throw std::invalid_argument("unknown field '" + name_or_json + "'");
}

double eval_lambda(int N, double x) { return lambda_kernel(N, x); }

double eval_D(const StructureFunction& f, double r, int order) { return f.eval(r, order); }

}  // namespace kacrice
