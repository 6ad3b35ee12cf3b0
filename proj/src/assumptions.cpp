#include "kacrice/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kacrice/errors.hpp"
#include "kacrice/local_params.hpp"

namespace kacrice {

std::string to_string(ConditionStatus s) {
    switch (s) {
        case ConditionStatus::Holds: return "holds";
        case ConditionStatus::Fails: return "fails";
        case ConditionStatus::Indeterminate: return "indeterminate";
    }
    return "?";
}

namespace {

double normalized_diff(double lhs, double rhs) {
    const double scale = std::abs(lhs) + std::abs(rhs);
    if (scale == 0.0) return 0.0;
    return (lhs - rhs) / scale;
}

ConditionStatus combine(ConditionStatus a, ConditionStatus b) {
    if (a == ConditionStatus::Fails || b == ConditionStatus::Fails) return ConditionStatus::Fails;
    if (a == ConditionStatus::Indeterminate || b == ConditionStatus::Indeterminate) return ConditionStatus::Indeterminate;
    return ConditionStatus::Holds;
}

}  // namespace

void ConditionReport::add(double r, double lhs, double rhs, std::string label, bool strict) {
    Witness w{r, lhs, rhs, std::move(label), normalized_diff(lhs, rhs)};
    ConditionStatus s;
    if (!std::isfinite(lhs) || !std::isfinite(rhs) || std::isnan(w.normalized)) {
        s = ConditionStatus::Indeterminate;
    } else if (strict) {
        s = w.normalized >= kIndeterminateBand    ? ConditionStatus::Holds
            : w.normalized <= -kIndeterminateBand ? ConditionStatus::Fails
                                                   : ConditionStatus::Indeterminate;
    } else {
        s = w.normalized > -kIndeterminateBand ? ConditionStatus::Holds : ConditionStatus::Fails;
    }
    status = combine(status, s);
    margin = std::min(margin, lhs - rhs);
    if (w.normalized < normalized_margin) {
        normalized_margin = w.normalized;
        worst_r = r;
    }
    witnesses.push_back(std::move(w));
}

void ConditionReport::add_sign(double r, double value, int sign, std::string label) {
    Witness w{r, value, 0.0, std::move(label), static_cast<double>(sign)};
    const ConditionStatus s = sign > 0 ? ConditionStatus::Holds : sign < 0 ? ConditionStatus::Fails : ConditionStatus::Indeterminate;
    status = combine(status, s);
    margin = std::min(margin, value);
    if (w.normalized < normalized_margin) {
        normalized_margin = w.normalized;
        worst_r = r;
    }
    witnesses.push_back(std::move(w));
}

void ConditionReport::merge(const ConditionReport& other) {
    status = combine(status, other.status);
    margin = std::min(margin, other.margin);
    if (other.normalized_margin < normalized_margin) {
        normalized_margin = other.normalized_margin;
        worst_r = other.worst_r;
    }
    witnesses.insert(witnesses.end(), other.witnesses.begin(), other.witnesses.end());
}

nlohmann::json ConditionReport::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["status"] = to_string(status);
    j["holds"] = holds();
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    j["margin"] = num(margin);
    j["normalized_margin"] = num(normalized_margin);
    j["worst_r"] = worst_r;
    nlohmann::json ws = nlohmann::json::array();
    for (const auto& w : witnesses) {
        ws.push_back({{"r", w.r}, {"lhs", num(w.lhs)}, {"rhs", num(w.rhs)}, {"label", w.label}, {"normalized", num(w.normalized)}});
    }
    j["witnesses"] = ws;
    return j;
}

std::vector<double> default_r_grid() {
    std::vector<double> g;
    for (int i = 0; i < 60; ++i) g.push_back(std::pow(10.0, -6.0 + 12.0 * i / 59.0));
    for (int i = 1; i <= 40; ++i) g.push_back(10.0 * i / 40.0);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

std::vector<double> parse_r_grid(const std::string& spec) {
    if (spec.empty() || spec == "default") return default_r_grid();
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, sep)) out.push_back(item);
        return out;
    };
    std::vector<double> g;
    if (spec.rfind("log:", 0) == 0 || spec.rfind("lin:", 0) == 0) {
        const auto parts = split(spec, ':');
        if (parts.size() != 4) throw std::invalid_argument("r-grid must look like log:lo:hi:n");
        const double lo = std::stod(parts[1]), hi = std::stod(parts[2]);
        const int n = std::stoi(parts[3]);
        if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw std::invalid_argument("bad r-grid range: " + spec);
        for (int i = 0; i < n; ++i) {
            const double t = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
            g.push_back(parts[0] == "log" ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
        }
    } else {
        for (const auto& s : split(spec, ',')) {
            const double r = std::stod(s);
            if (!(r > 0.0)) throw std::invalid_argument("r-grid values must be positive");
            g.push_back(r);
        }
    }
    std::sort(g.begin(), g.end());
    return g;
}

ConditionReport check_smoothness(const StructureFunction& f) {
    ConditionReport rep;
    rep.name = "smoothness";
    double d4 = std::numeric_limits<double>::quiet_NaN();
    try {
        d4 = f.eval(0.0, 4);
    } catch (const std::domain_error&) {
        d4 = std::numeric_limits<double>::infinity();
    }
    const double a = std::abs(d4);
    Witness w{0.0, d4, 0.0, "|D''''(0)|", 0.0};
    if (!std::isfinite(a)) {
        rep.status = ConditionStatus::Fails;
        w.normalized = -1.0;
    } else if (a == 0.0) {
        rep.status = ConditionStatus::Fails;
        w.normalized = 0.0;
    } else {
        w.normalized = 1.0;
    }
    rep.margin = std::isfinite(a) ? a : -std::numeric_limits<double>::infinity();
    rep.normalized_margin = w.normalized;
    rep.witnesses.push_back(w);
    return rep;
}

namespace {

struct Derivs {
    double Dp0, Dpp0, Dpp, Ip, sigmaY2;
};

Derivs derivs(const StructureFunction& f, double r) {
    const RadialValues v = radial_values(f, r);
    return {v.Dp0, v.Dpp0, v.Dpp, v.Dp_inc, v.sigmaY2};
}

}  // namespace

double nondeg_scalar(const StructureFunction& f, int N, double r) {
    if (N < 1) throw std::invalid_argument("N must be positive");
    const Derivs d = derivs(f, r);
    const double n = N;
    return d.sigmaY2 + ((n + 1.0) * d.Dpp * d.Dpp * r * r + 2.0 * r * d.Dpp * d.Ip + 0.5 * n * d.Ip * d.Ip) /
                           ((n + 2.0) * d.Dpp0);
}

double nondeg_dimfree(const StructureFunction& f, double r) {
    const Derivs d = derivs(f, r);
    return d.sigmaY2 + (d.Dpp * d.Dpp * r * r + 0.5 * d.Ip * d.Ip) / d.Dpp0;
}

ConditionReport check_nondeg(const StructureFunction& f, int N, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "nondegeneracy(N=" + std::to_string(N) + ")";
    for (double r : radii) {
        // compare the positive part against the negative part so the relative margin is meaningful
        const Derivs d = derivs(f, r);
        const double n = N;
        const double neg = -((n + 1.0) * d.Dpp * d.Dpp * r * r + 2.0 * r * d.Dpp * d.Ip + 0.5 * n * d.Ip * d.Ip) /
                           ((n + 2.0) * d.Dpp0);
        rep.add(r, d.sigmaY2, neg, "sigma_Y^2 > dimension terms");
    }
    return rep;
}

ConditionReport check_nondeg_dimfree(const StructureFunction& f, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "nondegeneracy(dimension-free)";
    for (double r : radii) {
        const Derivs d = derivs(f, r);
        rep.add(r, d.sigmaY2, -(d.Dpp * d.Dpp * r * r + 0.5 * d.Ip * d.Ip) / d.Dpp0, "sigma_Y^2 > dimension-free terms");
    }
    return rep;
}

ConditionReport check_assumption3(const StructureFunction& f, double r) {
    ConditionReport rep;
    rep.name = "assumption3";
    const LocalParams p = local_params(f, std::sqrt(r), 0.0);
    const double ar = p.alpha * r;
    rep.add(r, -2.0 * p.Dpp0, (ar + p.beta) * p.beta, "-2D''(0) > (ar+b)b");
    rep.add(r, -4.0 * p.Dpp0, (ar + p.beta) * ar, "-4D''(0) > (ar+b)ar");
    // D''(r) may underflow long before its sign stops being meaningful
    const int sa = f.log_abs(r, 2).sign;
    const double inc = f.increment(r, 1);
    const int sb = inc > 0.0 ? 1 : inc < 0.0 ? -1 : 0;
    rep.add_sign(r, p.alpha * p.beta, sa * sb, "ab > 0");
    return rep;
}

ConditionReport check_assumption3(const StructureFunction& f, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "assumption3";
    for (double r : radii) rep.merge(check_assumption3(f, r));
    return rep;
}

ConditionReport check_c_positive(const StructureFunction& f, double r) {
    ConditionReport rep;
    rep.name = "c_positive";
    const LocalParams p = local_params(f, std::sqrt(r), 0.0);
    const double num = p.d1 + p.d1 * p.d3 - p.d2 * p.d2;
    const double den = p.zeta1_variance();
    // c > 0 as a ratio: compare signs of numerator and denominator through their product
    rep.add(r, num * den, 0.0, "c > 0");
    rep.witnesses.back().lhs = p.c;
    rep.add(r, -4.0 * p.Dpp0, 2.0 * p.beta * p.beta + p.alpha * p.alpha * r * r, "-4D''(0) > 2b^2 + a^2 r^2");
    return rep;
}

ConditionReport check_c_positive(const StructureFunction& f, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "c_positive";
    for (double r : radii) rep.merge(check_c_positive(f, r));
    return rep;
}

ConditionReport check_bernstein_inequality1(const StructureFunction& f, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "bernstein_inequality1";
    for (double r : radii) {
        const RadialValues v = radial_values(f, r);
        const double lhs = -2.0 * v.Dpp0 * v.D_plus_linear_minus_slope;
        const double rhs = 2.0 * r * v.Dpp0 * v.Dp_inc + v.Dp_inc * v.Dp_inc;
        rep.add(r, lhs, rhs, "-2D''(0)(D + rD'(0) - 2rD') > 2rD''(0)(D'-D'(0)) + (D'-D'(0))^2");
    }
    return rep;
}

ConditionReport check_bernstein_inequality2(const StructureFunction& f, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "bernstein_inequality2";
    for (double r : radii) {
        const RadialValues v = radial_values(f, r);
        const double lhs = 2.0 * r * v.Dpp0 * v.Dp_inc * v.Dp_inc / v.Dp0;
        const double rhs = 2.0 * r * v.Dpp_inc * v.Dp_inc;
        rep.add(r, lhs, rhs, "2rD''(0)(D'-D'(0))^2/D'(0) >= 2r(D''-D''(0))(D'-D'(0))", false);
    }
    return rep;
}

ConditionReport check_mean_value(const StructureFunction& f, const std::vector<double>& radii) {
    ConditionReport rep;
    rep.name = "mean_value";
    for (double r : radii) {
        // a r > 2 b  <=>  D''(r) r > D'(r) - D'(0)  (sigma_Y > 0 cancels)
        const RadialValues v = radial_values(f, r);
        rep.add(r, v.Dpp * r, v.Dp_inc, "D''(r) r > D'(r) - D'(0)");
    }
    return rep;
}

Eigen::MatrixXd theta_matrix(int N, double d1, double d2, double d3) {
    if (N < 1) throw std::invalid_argument("theta_matrix needs N >= 1");
    Eigen::MatrixXd T = Eigen::MatrixXd::Constant(N, N, d1);
    T.diagonal().array() += 1.0;
    T(0, 0) = 1.0 + d1 + 2.0 * d2 + d3;
    for (int j = 1; j < N; ++j) T(0, j) = T(j, 0) = d1 + d2;
    return T;
}

double sgoi_schur(int N, double d1, double d2, double d3) {
    const double m = N - 1;
    return 1.0 + d3 + (d1 + 2.0 * d2 - m * d2 * d2) / (1.0 + m * d1);
}

double sgoi_margin(int N, double d1, double d2, double d3) {
    if (N < 2) throw std::invalid_argument("SGOI needs N >= 2");
    const double m = N - 1;
    const double first = (d1 + 1.0 / m) / (std::abs(d1) + 1.0 / m);
    if (!(first > 0.0)) return first;
    const double scale = 1.0 + std::abs(d3) + (std::abs(d1) + 2.0 * std::abs(d2) + m * d2 * d2) / std::abs(1.0 + m * d1);
    return std::min(first, sgoi_schur(N, d1, d2, d3) / scale);
}

bool sgoi_nondeg(int N, double d1, double d2, double d3) {
    if (N < 2) throw std::invalid_argument("SGOI needs N >= 2");
    return d1 > -1.0 / (N - 1) && sgoi_schur(N, d1, d2, d3) > 0.0;
}

Eigen::MatrixXd xi_matrix(int N, double d1, double d2, double d3, double varsigma, double vartheta) {
    if (N < 2) throw std::invalid_argument("SGOI needs N >= 2");
    const int n = N + 1;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, n);
    X(0, 0) = 1.0 + d1 + 2.0 * d2 + d3;
    X(0, 1) = X(1, 0) = varsigma;
    X(1, 1) = d1 - 2.0 * vartheta;
    for (int i = 2; i < n; ++i) {
        X(0, i) = X(i, 0) = d1 + d2 - varsigma;
        X(1, i) = X(i, 1) = vartheta;
        X(i, i) = 1.0;
    }
    return X;
}

double xi_d1pos_expression(int N, double d1, double d2, double d3, double varsigma) {
    const double t = d1 + d2 - varsigma;
    return 1.0 + d1 + 2.0 * d2 + d3 - varsigma * varsigma / d1 - (N - 1) * t * t;
}

Eigen::MatrixXd covariance_full(const StructureFunction& f, const Eigen::VectorXd& x) {
    const int N = static_cast<int>(x.size());
    if (N < 1) throw std::invalid_argument("covariance_full needs a point with N >= 1");
    const double r = x.squaredNorm();
    const double D = f.eval(r, 0), Dp = f.eval(r, 1), Dpp = f.eval(r, 2);
    const double Dp0 = f.eval(0.0, 1), Dpp0 = f.eval(0.0, 2);
    const double Ip = f.increment(r, 1);

    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < N; ++i) pairs.emplace_back(i, i);
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) pairs.emplace_back(i, j);

    const int P = static_cast<int>(pairs.size());
    const int dim = 1 + N + P;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(dim, dim);
    auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };

    C(0, 0) = D;
    for (int i = 0; i < N; ++i) {
        C(0, 1 + i) = C(1 + i, 0) = Dp * x(i);
        C(1 + i, 1 + i) = Dp0;
    }
    for (int a = 0; a < P; ++a) {
        const auto [i, j] = pairs[a];
        const int ia = 1 + N + a;
        C(0, ia) = C(ia, 0) = 2.0 * Dpp * x(i) * x(j) + Ip * delta(i, j);
        for (int b = 0; b < P; ++b) {
            const auto [l, k] = pairs[b];
            C(ia, 1 + N + b) = -2.0 * Dpp0 * (delta(j, l) * delta(i, k) + delta(i, l) * delta(k, j) + delta(k, l) * delta(i, j));
        }
    }
    return C;
}

}  // namespace kacrice
